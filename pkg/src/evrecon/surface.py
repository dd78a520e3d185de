"""Time surface of the event stream and the geometry it induces.

Each pixel remembers the timestamp of its most recent event. The graph of
that scalar field is a 2.5-D surface; its first fundamental form gives a
per-pixel metric

    g = [[1 + tx^2, tx*ty], [tx*ty, 1 + ty^2]],   G = det(g) = 1 + tx^2 + ty^2,

with tx, ty forward differences of the (normalised, denoised) timestamp
field. The surface gradient of an image u, expressed in the embedding
coordinates, is a 3-channel field computed here as `surface_gradient`;
regularising with its G-weighted norm smooths along event-time level sets
and preserves edges across them. A flat surface (t = const) reduces
everything to the ordinary image gradient.

Array convention: fields are (height, width) float64, indexed [y, x];
3-channel fields are (height, width, 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Safe norm-squared bound for the surface gradient operator. The flat
# forward-difference gradient satisfies ||grad||^2 <= 8, and the per-pixel
# metric weighting never expands a vector, but the looser classical bound
# is kept as the step-size contract.
OPERATOR_NORM_BOUND_SQ = 8.0 + 4.0 * np.sqrt(2.0)


@dataclass
class TimeSurface:
    """Normalised per-pixel event-age field; values in [0, t_scale],
    most recent events at height t_scale."""

    t: np.ndarray
    t_scale: float

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        if not np.all(np.isfinite(self.t)):
            raise ValueError("time surface contains non-finite values")
        if self.t.min() < 0 or self.t.max() > self.t_scale + 1e-9:
            raise ValueError(
                f"time surface values must lie in [0, {self.t_scale}], got "
                f"[{self.t.min()}, {self.t.max()}]"
            )


@dataclass
class MetricField:
    """Per-pixel surface geometry: timestamp derivatives, metric
    determinant G = 1 + tx^2 + ty^2 and its square root."""

    tx: np.ndarray
    ty: np.ndarray
    G: np.ndarray
    sqrtG: np.ndarray
    _coeffs: tuple = field(default=None, init=False, repr=False)

    @property
    def shape(self):
        return self.G.shape

    @property
    def is_flat(self):
        return not (self.tx.any() or self.ty.any())

    @property
    def coeffs(self):
        """Entries of the per-pixel 3x2 matrix mapping (ux, uy) to the
        surface gradient channels, cached: (a11, a12, a22, a31, a32) with

            channel0 = a11 ux + a12 uy      a11 = (1 + ty^2) / G
            channel1 = a12 ux + a22 uy      a12 = -tx ty / G
            channel2 = a31 ux + a32 uy      a22 = (1 + tx^2) / G
                                            a31 = tx / G,  a32 = ty / G
        """
        if self._coeffs is None:
            tx, ty, G = self.tx, self.ty, self.G
            self._coeffs = (
                (1.0 + ty * ty) / G,
                -(tx * ty) / G,
                (1.0 + tx * tx) / G,
                tx / G,
                ty / G,
            )
        return self._coeffs


def grad_x(u):
    """Forward difference along x (columns); zero at the last column."""
    d = np.zeros_like(u)
    d[:, :-1] = u[:, 1:] - u[:, :-1]
    return d


def grad_y(u):
    """Forward difference along y (rows); zero at the last row."""
    d = np.zeros_like(u)
    d[:-1, :] = u[1:, :] - u[:-1, :]
    return d


def div_xy(qx, qy):
    """Backward-difference divergence, the negative adjoint of
    (grad_x, grad_y): <grad u, q> = <u, -div q> for all u, q.

    The last column of qx and last row of qy are ignored, matching the
    zeroed boundary of the forward differences.
    """
    out = np.empty_like(qx)
    out[:, 0] = qx[:, 0]
    out[:, 1:-1] = qx[:, 1:-1] - qx[:, :-2]
    out[:, -1] = -qx[:, -2]
    out[0, :] += qy[0, :]
    out[1:-1, :] += qy[1:-1, :] - qy[:-2, :]
    out[-1, :] -= qy[-2, :]
    return out


def update_timestamp_map(raw_map, event):
    """Record the event's timestamp at its pixel (in place); returns the map."""
    raw_map[event.y, event.x] = event.timestamp
    return raw_map


def normalize_timestamps(raw_map, now, t_scale, t_window):
    """Map raw last-event timestamps to surface heights.

    Event age is clamped to [0, t_window] and mapped linearly so that
    pixels updated at ``now`` sit at height t_scale and pixels older than
    the window sit at 0.
    """
    if t_window <= 0:
        raise ValueError(f"t_window must be positive, got {t_window}")
    if t_scale < 0:
        raise ValueError(f"t_scale must be non-negative, got {t_scale}")
    age = np.clip(now - np.asarray(raw_map, dtype=np.float64), 0.0, t_window)
    t = t_scale * (1.0 - age / t_window)
    return TimeSurface(t=t, t_scale=t_scale)


def denoise_timestamps(surface, weight, iterations=50):
    """TV-L1 denoising of the time surface (flat primal-dual scheme).

    Minimises TV(t) + weight * |t - t_in|_1; small weights remove isolated
    timestamp spikes (hot pixels), large weights leave the surface
    untouched. Output is clamped back to [0, t_scale].
    """
    if weight <= 0:
        raise ValueError(f"denoise weight must be positive, got {weight}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    f = surface.t
    tau = sigma = 1.0 / np.sqrt(8.0)
    shrink = tau * weight

    u = f.copy()
    u_bar = f.copy()
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    gx = np.empty_like(f)
    gy = np.empty_like(f)
    t1 = np.empty_like(f)
    for _ in range(iterations):
        gx[:, :-1] = u_bar[:, 1:] - u_bar[:, :-1]
        gx[:, -1] = 0.0
        gy[:-1, :] = u_bar[1:, :] - u_bar[:-1, :]
        gy[-1, :] = 0.0
        gx *= sigma
        px += gx
        gy *= sigma
        py += gy
        np.multiply(px, px, out=t1)
        np.multiply(py, py, out=gx)
        t1 += gx
        np.sqrt(t1, out=t1)
        np.maximum(t1, 1.0, out=t1)
        px /= t1
        py /= t1

        u_old = u
        np.multiply(div_xy(px, py), tau, out=t1)
        t1 += u
        # soft shrinkage toward f: prox of the weighted L1 fidelity
        np.subtract(t1, f, out=gx)
        np.clip(gx, -shrink, shrink, out=gx)
        u = t1 - gx
        np.multiply(u, 2.0, out=u_bar)
        u_bar -= u_old

    np.clip(u, 0.0, surface.t_scale, out=u)
    return TimeSurface(t=u, t_scale=surface.t_scale)


def compute_metric(surface):
    """Metric field of a time surface (or of a bare 2-D height array)."""
    t = surface.t if isinstance(surface, TimeSurface) else np.asarray(surface, dtype=np.float64)
    tx = grad_x(t)
    ty = grad_y(t)
    G = 1.0 + tx * tx + ty * ty
    return MetricField(tx=tx, ty=ty, G=G, sqrtG=np.sqrt(G))


def flat_metric(shape):
    """Identity metric (t = const): reduces all operators to plain TV."""
    z = np.zeros(shape, dtype=np.float64)
    return MetricField(tx=z, ty=z.copy(), G=np.ones(shape), sqrtG=np.ones(shape))


def surface_gradient(u, m):
    """Gradient of u on the surface, in embedding coordinates.

    Per pixel, with ux = grad_x(u), uy = grad_y(u):

        out[..., 0] = ((1 + ty^2) ux - tx ty uy) / G
        out[..., 1] = ((1 + tx^2) uy - tx ty ux) / G
        out[..., 2] = (tx ux + ty uy) / G

    For a flat surface this is (ux, uy, 0). The channels factor as a
    per-pixel 3x2 matrix applied to (ux, uy), which is what makes the
    adjoint below exact.
    """
    if u.shape != m.shape:
        raise ValueError(f"image shape {u.shape} != metric shape {m.shape}")
    ux = grad_x(u)
    uy = grad_y(u)
    a11, a12, a22, a31, a32 = m.coeffs
    out = np.empty(u.shape + (3,), dtype=np.float64)
    out[..., 0] = a11 * ux + a12 * uy
    out[..., 1] = a12 * ux + a22 * uy
    out[..., 2] = a31 * ux + a32 * uy
    return out


def surface_gradient_adjoint(p, m):
    """Adjoint of surface_gradient under the unweighted inner products.

    Transposes the per-pixel 3x2 metric matrix onto p and applies the
    negative divergence matching the forward differences:
    <surface_gradient(u), p> == <u, surface_gradient_adjoint(p)>.
    """
    if p.shape[:2] != m.shape or p.shape[2:] != (3,):
        raise ValueError(f"dual shape {p.shape} incompatible with metric {m.shape}")
    a11, a12, a22, a31, a32 = m.coeffs
    p1, p2, p3 = p[..., 0], p[..., 1], p[..., 2]
    qx = a11 * p1 + a12 * p2 + a31 * p3
    qy = a12 * p1 + a22 * p2 + a32 * p3
    return -div_xy(qx, qy)


def operator_norm_bound():
    """Squared-norm bound used for the primal-dual step-size product."""
    return OPERATOR_NORM_BOUND_SQ
