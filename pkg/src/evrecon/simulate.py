"""Ground-truth oracle: turn a synthetic intensity video into events.

A pixel fires when its log intensity, linearly interpolated between
frames, crosses a running reference level by the positive or negative
threshold; the reference then jumps by exactly that quantum (comparator
model). This is the inverse of the reconstruction's per-event update, so
noiseless integration of the generated stream recovers the video's final
log intensity to within one quantum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import Event

# guards float-exact threshold hits ("stepped by exactly one quantum")
# when counting crossings
_CROSSING_EPS = 1e-9


@dataclass
class GroundTruthVideo:
    """Frame stack (n, height, width) with strictly increasing integer
    timestamps; all intensities must be positive."""

    frames: np.ndarray
    frame_timestamps: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.frame_timestamps = np.asarray(self.frame_timestamps, dtype=np.int64)
        if self.frames.ndim != 3 or self.frames.shape[0] < 2:
            raise ValueError(
                f"need a (n>=2, h, w) frame stack, got shape {self.frames.shape}"
            )
        if self.frames.shape[0] != self.frame_timestamps.shape[0]:
            raise ValueError("frame count and timestamp count differ")
        if np.any(np.diff(self.frame_timestamps) <= 0):
            raise ValueError("frame timestamps must be strictly increasing")
        if np.any(self.frames <= 0):
            raise ValueError("frame intensities must be positive")

    @property
    def shape(self):
        return self.frames.shape[1:]


def generate_events(video, dp, dn):
    """Simulate the event stream of a video under thresholds dp, dn.

    Returns Events sorted by timestamp with ties broken by (y, x,
    polarity). Crossing times come from linear interpolation of log
    intensity inside each frame interval, rounded to integer ticks.
    """
    if dp <= 0 or dn <= 0:
        raise ValueError(f"thresholds must be positive, got dp={dp}, dn={dn}")
    log_frames = np.log(video.frames)
    times = video.frame_timestamps
    h, w = video.shape
    yy, xx = np.mgrid[0:h, 0:w]

    ref = log_frames[0].copy()
    ts_out, y_out, x_out, p_out = [], [], [], []

    def emit(mask, level, l0, l1, t0, t1, polarity):
        frac = (level[mask] - l0[mask]) / (l1[mask] - l0[mask])
        tc = np.rint(t0 + frac * (t1 - t0)).astype(np.int64)
        ts_out.append(tc)
        y_out.append(yy[mask])
        x_out.append(xx[mask])
        p_out.append(np.full(tc.shape, polarity, dtype=np.int64))

    for k in range(len(times) - 1):
        l0, l1 = log_frames[k], log_frames[k + 1]
        t0, t1 = int(times[k]), int(times[k + 1])

        n_pos = np.floor((l1 - ref) / dp + _CROSSING_EPS).astype(np.int64)
        n_pos = np.maximum(n_pos, 0)
        n_neg = np.floor((ref - l1) / dn + _CROSSING_EPS).astype(np.int64)
        n_neg = np.maximum(n_neg, 0)

        for j in range(1, int(n_pos.max(initial=0)) + 1):
            mask = n_pos >= j
            emit(mask, ref + j * dp, l0, l1, t0, t1, +1)
        for j in range(1, int(n_neg.max(initial=0)) + 1):
            mask = n_neg >= j
            emit(mask, ref - j * dn, l0, l1, t0, t1, -1)

        ref += n_pos * dp - n_neg * dn

    if not ts_out:
        return []
    ts = np.concatenate(ts_out)
    ys = np.concatenate(y_out)
    xs = np.concatenate(x_out)
    ps = np.concatenate(p_out)
    order = np.lexsort((ps, xs, ys, ts))
    return [
        Event(x=int(xs[i]), y=int(ys[i]), polarity=int(ps[i]), timestamp=int(ts[i]))
        for i in order
    ]


def _bilinear_shift(template, dx, dy, wrap):
    """Sample template at (y - dy, x - dx) with bilinear interpolation;
    coordinates wrap around or clamp at the border."""
    h, w = template.shape
    yy, xx = np.mgrid[0:h, 0:w]
    ys = yy - dy
    xs = xx - dx
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = ys - y0
    fx = xs - x0

    def fetch(yi, xi):
        if wrap:
            return template[np.mod(yi, h), np.mod(xi, w)]
        return template[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]

    top = fetch(y0, x0) * (1 - fx) + fetch(y0, x0 + 1) * fx
    bot = fetch(y0 + 1, x0) * (1 - fx) + fetch(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bot * fy


def _smooth_box(coord, half_width, edge=1.5):
    """1-D soft indicator: 1 inside |coord| < half_width, 0 outside, with
    a linear ramp of width ``edge``."""
    return np.clip((half_width - np.abs(coord)) / edge + 0.5, 0.0, 1.0)


def _square_template(h, w, size, background, amplitude, texture_period):
    # texture in [0, 1] keeps the square at least as bright as the
    # background, so a moving square fires positive events on its leading
    # edge and negative ones on the trailing edge
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    mask = _smooth_box(xx - cx, size / 2.0) * _smooth_box(yy - cy, size / 2.0)
    texture = 0.5 + 0.5 * np.cos(2 * np.pi * (xx - cx) / texture_period) * np.cos(
        2 * np.pi * (yy - cy) / texture_period
    )
    return background + mask * amplitude * texture


def render_scene(kind, geometry, n_frames, dt=1000, **params):
    """Deterministic synthetic test scenes with sub-pixel motion.

    Kinds: ``moving_square`` (textured square drifting over a neutral
    background), ``moving_sine`` (sliding 2-D sine pattern, wraps around),
    ``two_bars`` (two bright bars crossing in opposite directions).
    Intensities stay in [1, 2]; frame k has timestamp k * dt.
    """
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames, got {n_frames}")
    h, w = geometry.height, geometry.width
    timestamps = np.arange(n_frames, dtype=np.int64) * int(dt)
    frames = np.empty((n_frames, h, w), dtype=np.float64)

    if kind == "moving_square":
        size = params.pop("size", min(h, w) * 0.4)
        velocity = params.pop("velocity", (0.5, 0.25))
        background = params.pop("background", 1.5)
        amplitude = params.pop("amplitude", 0.4)
        texture_period = params.pop("texture_period", 8.0)
        _reject_unknown(kind, params)
        template = _square_template(h, w, size, background, amplitude, texture_period)
        # symmetric path around the centre keeps the square inside the frame
        for k in range(n_frames):
            shift = k - (n_frames - 1) / 2.0
            frames[k] = _bilinear_shift(
                template, velocity[0] * shift, velocity[1] * shift, wrap=False
            )
    elif kind == "moving_sine":
        period = params.pop("period", 16.0)
        amplitude = params.pop("amplitude", 0.45)
        velocity = params.pop("velocity", (0.5, 0.0))
        _reject_unknown(kind, params)
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
        for k in range(n_frames):
            phase_x = 2 * np.pi * (xx - velocity[0] * k) / period
            phase_y = 2 * np.pi * (yy - velocity[1] * k) / period
            frames[k] = 1.5 + amplitude * np.sin(phase_x) * np.cos(phase_y)
    elif kind == "two_bars":
        bar_width = params.pop("bar_width", 6.0)
        amplitude = params.pop("amplitude", 0.35)
        speed = params.pop("speed", 0.5)
        background = params.pop("background", 1.2)
        _reject_unknown(kind, params)
        xs = np.arange(w, dtype=np.float64)
        for k in range(n_frames):
            x1 = np.mod(w * 0.25 + speed * k, w)
            x2 = np.mod(w * 0.75 - speed * k, w)
            d1 = np.minimum(np.abs(xs - x1), w - np.abs(xs - x1))
            d2 = np.minimum(np.abs(xs - x2), w - np.abs(xs - x2))
            row = background + amplitude * (
                _smooth_box(d1, bar_width / 2.0) + _smooth_box(d2, bar_width / 2.0)
            )
            frames[k] = np.tile(row, (h, 1))
    else:
        raise ValueError(f"unknown scene kind {kind!r}")

    return GroundTruthVideo(frames=frames, frame_timestamps=timestamps)


def _reject_unknown(kind, params):
    if params:
        raise ValueError(f"unknown parameters for {kind!r}: {sorted(params)}")


def psnr_aligned(a, b, peak=1.0):
    """PSNR in dB after removing the mean difference (the reconstruction
    is defined only up to a gray offset); identical images give inf."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    d -= d.mean()
    mse = float(np.mean(d * d))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))
