"""Independent reference implementations used as test oracles.

Deliberately coded with different array idioms than the package (np.diff
/ concatenate instead of sliced assignment) while sharing the same
discretisation contract: forward differences with a zeroed last
row/column, and the matching negative-adjoint divergence. The flat
solvers below know nothing about surfaces; they are plain 2-channel
primal-dual TV codes with their own step sizes.
"""

import numpy as np


def ref_grad(u):
    gx = np.diff(u, axis=1, append=u[:, -1:])
    gy = np.diff(u, axis=0, append=u[-1:, :])
    return gx, gy


def ref_div(qx, qy):
    h, w = qx.shape
    rx = qx.copy()
    rx[:, -1] = 0.0
    ry = qy.copy()
    ry[-1, :] = 0.0
    dx = rx - np.concatenate([np.zeros((h, 1)), rx[:, :-1]], axis=1)
    dy = ry - np.concatenate([np.zeros((1, w)), ry[:-1, :]], axis=0)
    return dx + dy


def ref_flat_tvkl(f, lam, u_min, u_max, iterations=10000, tau=None, sigma=None):
    """Flat total-variation + Kullback-Leibler solve on the box, plain
    Chambolle-Pock with 2-channel duals and its own step sizes."""
    if tau is None:
        tau = 1.0 / np.sqrt(8.0)
    if sigma is None:
        sigma = 1.0 / np.sqrt(8.0)
    u = f.copy()
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    beta = tau * lam
    for _ in range(iterations):
        u_old = u
        u_bar = u + tau * ref_div(px, py)
        s = u_bar - beta
        u = np.clip(0.5 * (s + np.sqrt(s * s + 4.0 * beta * f)), u_min, u_max)
        gx, gy = ref_grad(2.0 * u - u_old)
        px = px + sigma * gx
        py = py + sigma * gy
        mag = np.maximum(1.0, np.sqrt(px * px + py * py))
        px = px / mag
        py = py / mag
    return u


def ref_flat_rof(f, lam, iterations, tau=None, sigma=None):
    """Standard flat ROF denoising (quadratic fidelity), Chambolle-Pock."""
    if tau is None:
        tau = 1.0 / np.sqrt(8.0)
    if sigma is None:
        sigma = 1.0 / np.sqrt(8.0)
    u = f.copy()
    px = np.zeros_like(f)
    py = np.zeros_like(f)
    for _ in range(iterations):
        u_old = u
        u = (u + tau * ref_div(px, py) + tau * lam * f) / (1.0 + tau * lam)
        gx, gy = ref_grad(2.0 * u - u_old)
        px = px + sigma * gx
        py = py + sigma * gy
        mag = np.maximum(1.0, np.sqrt(px * px + py * py))
        px = px / mag
        py = py / mag
    return u


def golden_section(objective, lo, hi, tol=1e-10):
    """Scalar minimiser of a unimodal objective on [lo, hi]."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = objective(c), objective(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = objective(d)
    return 0.5 * (a + b)


def power_iteration_norm_sq(apply_op, apply_adjoint, shape, iterations=100, seed=0):
    """Largest eigenvalue of (adjoint . op), i.e. the squared operator
    norm, by plain power iteration from a random start."""
    rng = np.random.default_rng(seed)
    b = rng.normal(0.0, 1.0, shape)
    b /= np.linalg.norm(b)
    lam = 0.0
    for _ in range(iterations):
        nb = apply_adjoint(apply_op(b))
        norm = np.linalg.norm(nb)
        if norm == 0.0:
            return 0.0
        b = nb / norm
        lam = norm
    return float(lam)


def smooth_random_surface(shape, rng, amplitude=2.0, cutoff=4):
    """Band-limited random height field: random low-frequency Fourier
    modes, scaled to a given amplitude."""
    h, w = shape
    spec = np.zeros((h, w), dtype=complex)
    ky = rng.integers(0, cutoff, size=8)
    kx = rng.integers(0, cutoff, size=8)
    spec[ky, kx] = rng.normal(size=8) + 1j * rng.normal(size=8)
    t = np.real(np.fft.ifft2(spec))
    t -= t.min()
    peak = t.max()
    if peak > 0:
        t *= amplitude / peak
    return t
