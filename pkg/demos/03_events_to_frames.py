"""End-to-end reconstruction against simulator ground truth.

Renders a textured square drifting across the sensor, converts it to a
stream of threshold-crossing events, reconstructs frames both with the
time-surface regulariser and with the surface held flat, and scores
both against the ground-truth video with offset-aligned PSNR.

Writes frames to demos/output/recon/.
"""

from pathlib import Path

import numpy as np

from evrecon import (
    ManifoldConfig,
    PacketPolicy,
    SensorGeometry,
    SolverConfig,
    Thresholds,
    generate_events,
    psnr_aligned,
    render_scene,
    run_stream,
    write_pgm,
)

out_dir = Path(__file__).parent / "output" / "recon"
out_dir.mkdir(parents=True, exist_ok=True)

geometry = SensorGeometry(width=64, height=64)
video = render_scene(
    "moving_square", geometry, 96, velocity=(1.0, 0.25), size=26.0,
    amplitude=0.45, texture_period=6.0,
)
events = generate_events(video, 0.15, 0.15)
print(f"scene: {video.frames.shape[0]} frames -> {len(events)} events "
      f"({len(events) // 500} packets of 500)")

solver_cfg = SolverConfig(lam=2.0)
policy = PacketPolicy(events_per_packet=500)
thresholds = Thresholds(pos=0.15, neg=0.15)


def reconstruct(manifold_on):
    frames = []
    _, stats = run_stream(
        events, geometry, policy, ManifoldConfig(enabled=manifold_on),
        solver_cfg, thresholds, sink=lambda i, fr: frames.append(fr.copy()),
    )
    return frames, stats


frames_on, stats_on = reconstruct(True)
frames_off, _ = reconstruct(False)
print(f"reconstruction: {stats_on.summary()}")

ends = [events[min((k + 1) * 500, len(events)) - 1].timestamp
        for k in range(len(frames_on))]
print("\noffset-aligned PSNR vs nearest ground-truth frame:")
print("packet   with surface   flat ablation")
for pk, t in enumerate(ends):
    gt = video.frames[min(int(round(t / 1000)), len(video.frames) - 1)]
    on = psnr_aligned(frames_on[pk], gt)
    off = psnr_aligned(frames_off[pk], gt)
    print(f"  {pk:3d}      {on:6.2f} dB      {off:6.2f} dB")

mid = len(frames_on) // 2
for name, img in [
    ("ground_truth", video.frames[min(int(round(ends[mid] / 1000)), 95)]),
    ("with_surface", frames_on[mid]),
    ("flat_ablation", frames_off[mid]),
]:
    write_pgm(img, (1.0, 2.0), out_dir / f"{name}.pgm")
print(f"\nmid-sequence triptych written to {out_dir}")
