"""Command-line interface: reconstruct / simulate / rofdemo / bench.

Option precedence is flags > config file > built-in defaults. The config
file is flat ``key=value`` lines ('#' comments allowed) using the long
flag names without the leading dashes.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .events import SensorGeometry, read_stream, write_events
from .pgm import frame_path, write_pgm, write_pgm_autoscale
from .pipeline import ManifoldConfig, PacketPolicy, Thresholds, run_stream
from .simulate import generate_events, render_scene
from .solve import SolverConfig, rof_manifold_solve
from .surface import compute_metric, flat_metric

# dest -> converter, used to type config-file values; filled by _arg()
_CONFIG_TYPES = {}


def _parse_bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_velocity(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"velocity must be 'vx,vy', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _arg(parser, *names, **kwargs):
    action = parser.add_argument(*names, **kwargs)
    if action.const is True:  # store_true style flag
        _CONFIG_TYPES[action.dest] = _parse_bool
    elif action.type is not None:
        _CONFIG_TYPES[action.dest] = action.type
    else:
        _CONFIG_TYPES[action.dest] = str
    return action


def _add_solver_flags(p):
    _arg(p, "--lambda", dest="lam", type=float, default=180.0 / 255.0,
         help="data-fidelity weight")
    _arg(p, "--iterations", type=int, default=50,
         help="solver iterations per packet")
    _arg(p, "--umin", type=float, default=1.0, help="lower intensity bound")
    _arg(p, "--umax", type=float, default=2.0, help="upper intensity bound")
    _arg(p, "--convergence-tol", type=float, default=0.0,
         help="early stop on relative primal change (0 = fixed iterations)")


def _add_manifold_flags(p):
    _arg(p, "--no-manifold", action="store_true", default=False,
         help="freeze the time surface flat (plain TV ablation)")
    _arg(p, "--t-scale", type=float, default=3.0,
         help="height of the freshest events on the time surface")
    _arg(p, "--t-window", type=float, default=None,
         help="event age horizon in ticks (default: span of last 10 packets)")
    _arg(p, "--denoise-weight", type=float, default=1.0,
         help="TV-L1 fidelity weight for timestamp denoising")
    _arg(p, "--denoise-iters", type=int, default=50,
         help="TV-L1 iterations for timestamp denoising")


def _add_packet_flags(p):
    _arg(p, "--events-per-packet", type=int, default=500,
         help="events integrated into one frame")
    _arg(p, "--skip-frames", type=int, default=0,
         help="frames skipped between emitted frames")


def _add_threshold_flags(p):
    _arg(p, "--threshold-pos", type=float, default=0.15,
         help="positive log-intensity quantum")
    _arg(p, "--threshold-neg", type=float, default=0.15,
         help="negative log-intensity quantum")


def _add_geometry_flags(p):
    _arg(p, "--width", type=int, default=128, help="sensor width in pixels")
    _arg(p, "--height", type=int, default=128, help="sensor height in pixels")


def _solver_config(ns):
    return SolverConfig(
        lam=ns.lam,
        u_min=ns.umin,
        u_max=ns.umax,
        max_iterations=ns.iterations,
        convergence_tol=ns.convergence_tol,
    )


def _manifold_config(ns):
    return ManifoldConfig(
        enabled=not ns.no_manifold,
        t_scale=ns.t_scale,
        t_window=ns.t_window,
        denoise_weight=ns.denoise_weight,
        denoise_iterations=ns.denoise_iters,
    )


def cmd_reconstruct(ns):
    input_path = Path(ns.input)
    if not input_path.is_file():
        print(f"error: input file not found: {input_path}", file=sys.stderr)
        return 2
    geometry = SensorGeometry(width=ns.width, height=ns.height)
    solver_cfg = _solver_config(ns)
    manifold_cfg = _manifold_config(ns)
    policy = PacketPolicy(events_per_packet=ns.events_per_packet,
                          frames_to_skip=ns.skip_frames)
    thresholds = Thresholds(pos=ns.threshold_pos, neg=ns.threshold_neg)

    out_dir = Path(ns.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def sink(index, frame):
        path = frame_path(out_dir, ns.prefix, index)
        write_pgm(frame, solver_cfg.bounds, path)
        written.append(path)

    debug_sink = None
    if ns.dump_surface:
        def debug_sink(index, surface, metric):
            if surface is not None:
                write_pgm_autoscale(surface.t, out_dir / f"surface_{index:06d}.pgm")
            write_pgm_autoscale(metric.G, out_dir / f"detg_{index:06d}.pgm")

    trace_fh = open(ns.energy_trace, "w") if ns.energy_trace else None
    try:
        events = read_stream(input_path, geometry)
        _, stats = run_stream(
            events, geometry, policy, manifold_cfg, solver_cfg, thresholds,
            sink=sink, stats_every=ns.stats_every, debug_sink=debug_sink,
            trace=trace_fh,
        )
    except Exception as exc:
        # leave no partial frame sequence behind
        for path in written:
            path.unlink(missing_ok=True)
        print(f"error: reconstruction aborted: {exc}", file=sys.stderr)
        return 1
    finally:
        if trace_fh:
            trace_fh.close()
    print(f"reconstruct: {stats.summary()}", file=sys.stderr)
    return 0


def cmd_simulate(ns):
    geometry = SensorGeometry(width=ns.width, height=ns.height)
    out_dir = Path(ns.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    params = {}
    if ns.velocity is not None:
        if ns.scene == "two_bars":
            params["speed"] = ns.velocity[0]
        else:
            params["velocity"] = ns.velocity
    video = render_scene(ns.scene, geometry, ns.n_frames, dt=ns.dt, **params)
    events = generate_events(video, ns.threshold_pos, ns.threshold_neg)

    if ns.jitter > 0 and events:
        rng = np.random.default_rng(ns.seed)
        shifted = []
        for ev in events:
            delta = int(rng.integers(-ns.jitter, ns.jitter + 1))
            shifted.append(ev.__class__(
                x=ev.x, y=ev.y, polarity=ev.polarity,
                timestamp=max(ev.timestamp + delta, 0),
            ))
        shifted.sort(key=lambda e: (e.timestamp, e.y, e.x, e.polarity))
        events = shifted

    for k in range(video.frames.shape[0]):
        write_pgm(video.frames[k], (1.0, 2.0), frame_path(out_dir, "gt", k))
    n = write_events(
        events, out_dir / "events.txt",
        header=[f"geometry {geometry.width} {geometry.height}",
                f"scene {ns.scene}"],
    )
    if n == 0:
        print("warning: scene produced no events", file=sys.stderr)
    print(f"simulate: {n} events, {video.frames.shape[0]} ground-truth frames "
          f"-> {out_dir}", file=sys.stderr)
    return 0


def _rof_test_image(size, rng, noise_sigma):
    """Piecewise test target: bright square, dark disk, soft backdrop."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = 0.35 + 0.25 * xx / size
    sq = (np.abs(xx - size * 0.3) < size * 0.16) & (np.abs(yy - size * 0.35) < size * 0.16)
    img[sq] = 0.85
    disk = (xx - size * 0.68) ** 2 + (yy - size * 0.65) ** 2 < (size * 0.18) ** 2
    img[disk] = 0.15
    noisy = img + rng.normal(0.0, noise_sigma, img.shape)
    return img, noisy


def rofdemo_surfaces(size, ramp_slope, sine_amplitude, sine_period):
    """The three Fig-style graph functions: flat, ramp along x, sine."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    return {
        "flat": np.zeros((size, size)),
        "ramp": ramp_slope * xx,
        "sine": sine_amplitude * np.sin(2 * np.pi * xx / sine_period),
    }


def cmd_rofdemo(ns):
    out_dir = Path(ns.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(ns.seed)
    clean, noisy = _rof_test_image(ns.size, rng, ns.noise_sigma)
    write_pgm(clean, (0.0, 1.0), out_dir / "clean.pgm")
    write_pgm(noisy, (0.0, 1.0), out_dir / "noisy.pgm")

    surfaces = rofdemo_surfaces(ns.size, ns.ramp_slope, ns.sine_amplitude,
                                ns.sine_period)
    for name, t in surfaces.items():
        metric = flat_metric(noisy.shape) if name == "flat" else compute_metric(t)
        denoised = rof_manifold_solve(noisy, metric, ns.lam, ns.iterations)
        write_pgm(denoised, (0.0, 1.0), out_dir / f"denoised_{name}.pgm")
        write_pgm_autoscale(t, out_dir / f"surface_{name}.pgm")
    print(f"rofdemo: flat/ramp/sine triptych -> {out_dir}", file=sys.stderr)
    return 0


def cmd_bench(ns):
    geometry = SensorGeometry(width=ns.width, height=ns.height)
    needed = ns.packets * ns.events_per_packet
    if ns.input:
        input_path = Path(ns.input)
        if not input_path.is_file():
            print(f"error: input file not found: {input_path}", file=sys.stderr)
            return 2
        events = list(read_stream(input_path, geometry))
    else:
        n_frames = 16
        events = []
        while len(events) < needed and n_frames <= 4096:
            video = render_scene("moving_sine", geometry, n_frames)
            events = generate_events(video, ns.threshold_pos, ns.threshold_neg)
            n_frames *= 2
    if len(events) > needed:
        events = events[:needed]
    if not events:
        print("error: no events to benchmark", file=sys.stderr)
        return 2

    solver_cfg = _solver_config(ns)
    manifold_cfg = _manifold_config(ns)
    policy = PacketPolicy(events_per_packet=ns.events_per_packet)
    thresholds = Thresholds(pos=ns.threshold_pos, neg=ns.threshold_neg)
    _, stats = run_stream(events, geometry, policy, manifold_cfg, solver_cfg,
                          thresholds, sink=None)

    ms = np.asarray(stats.solve_ms)
    fps = 1000.0 / ms.mean()
    print(f"bench: {stats.packets} packets of {ns.events_per_packet} events, "
          f"{geometry.width}x{geometry.height}, {ns.iterations} iterations")
    print(f"  ms/frame  mean {ms.mean():.2f}  median {np.median(ms):.2f}  "
          f"p95 {np.percentile(ms, 95):.2f}")
    print(f"  throughput {fps:.1f} frames/s, {stats.events_per_sec:.0f} events/s")
    verdict = "PASS" if fps >= 30.0 else "WARN"
    print(f"  soft target >= 30 frames/s on CPU: {verdict}")
    return 0


def _load_config(path):
    overrides = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        dest = key.strip().replace("-", "_")
        if dest == "lambda":
            dest = "lam"
        if dest not in _CONFIG_TYPES:
            raise ValueError(f"{path}:{line_no}: unknown option {key.strip()!r}")
        overrides[dest] = _CONFIG_TYPES[dest](value.strip())
    return overrides


def build_parser():
    """Returns (parser, subparsers); config defaults must be set on each
    subparser because argparse gives them fresh namespaces."""
    parser = argparse.ArgumentParser(
        prog="evrecon",
        description="Intensity reconstruction from event-camera streams.",
        allow_abbrev=False,
    )
    parser.add_argument("--config", default=None,
                        help="key=value config file (flags take precedence)")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = []
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("reconstruct", formatter_class=fmt,
                       help="reconstruct frames from an event file")
    _arg(p, "--input", required=True, help="event text file")
    _arg(p, "--output-dir", default="frames", help="directory for PGM frames")
    _arg(p, "--prefix", default="frame", help="frame filename prefix")
    _add_geometry_flags(p)
    _add_solver_flags(p)
    _add_manifold_flags(p)
    _add_packet_flags(p)
    _add_threshold_flags(p)
    _arg(p, "--stats-every", type=int, default=25,
         help="stderr stats cadence in packets (0 = quiet)")
    _arg(p, "--dump-surface", action="store_true", default=False,
         help="also write the time surface and det(g) as auto-scaled PGMs")
    _arg(p, "--energy-trace", default=None,
         help="write per-iteration energy CSV to this path")
    p.set_defaults(func=cmd_reconstruct)
    subparsers.append(p)

    p = sub.add_parser("simulate", formatter_class=fmt,
                       help="render a synthetic scene and emit its events")
    _arg(p, "--output-dir", default="simulated", help="output directory")
    _arg(p, "--scene", default="moving_square",
         choices=["moving_square", "moving_sine", "two_bars"])
    _arg(p, "--n-frames", type=int, default=48, help="ground-truth frames")
    _arg(p, "--dt", type=int, default=1000, help="ticks between frames")
    _arg(p, "--velocity", type=_parse_velocity, default=None,
         help="scene motion in px/frame as 'vx,vy' (scene default if unset)")
    _arg(p, "--jitter", type=int, default=0,
         help="uniform timestamp jitter amplitude in ticks")
    _arg(p, "--seed", type=int, default=0, help="RNG seed for jitter")
    _add_geometry_flags(p)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_simulate)
    subparsers.append(p)

    p = sub.add_parser("rofdemo", formatter_class=fmt,
                       help="quadratic-fidelity denoising on three surfaces")
    _arg(p, "--output-dir", default="rofdemo", help="output directory")
    _arg(p, "--size", type=int, default=96, help="test image side length")
    _arg(p, "--lambda", dest="lam", type=float, default=8.0,
         help="quadratic fidelity weight")
    _arg(p, "--iterations", type=int, default=300, help="solver iterations")
    _arg(p, "--noise-sigma", type=float, default=0.08,
         help="Gaussian noise level on the test image")
    _arg(p, "--ramp-slope", type=float, default=2.0, help="ramp surface slope")
    _arg(p, "--sine-amplitude", type=float, default=2.0,
         help="sine surface amplitude")
    _arg(p, "--sine-period", type=float, default=24.0,
         help="sine surface period in pixels")
    _arg(p, "--seed", type=int, default=0, help="RNG seed for the noise")
    p.set_defaults(func=cmd_rofdemo)
    subparsers.append(p)

    p = sub.add_parser("bench", formatter_class=fmt,
                       help="measure reconstruction throughput")
    _arg(p, "--input", default=None,
         help="event file (default: simulate a dense scene)")
    _arg(p, "--packets", type=int, default=100, help="packets to time")
    _add_geometry_flags(p)
    _add_solver_flags(p)
    _add_manifold_flags(p)
    _add_packet_flags(p)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_bench)
    subparsers.append(p)

    return parser, subparsers


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()

    # pre-scan for --config so file values become defaults (flags still win)
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            overrides = _load_config(known.config)
        except (OSError, ValueError) as exc:
            print(f"error: bad config file: {exc}", file=sys.stderr)
            return 2
        for p in subparsers:
            p.set_defaults(**overrides)

    ns = parser.parse_args(argv)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
