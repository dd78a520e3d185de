"""Quadratic-fidelity denoising on three different surfaces.

The same noisy image is denoised with the surface held flat, tilted as a
ramp along x, and bent into a sine. A flat surface is ordinary ROF
denoising; curved surfaces re-weight the smoothing direction: on the
ramp, gradients along y cost sqrt(1 + a^2) times more than along x, so
vertical structure is smoothed harder and horizontal structure survives.

Writes PGMs to demos/output/rof/.
"""

from pathlib import Path

import numpy as np

from evrecon import (
    compute_metric,
    flat_metric,
    grad_x,
    grad_y,
    rof_manifold_solve,
    write_pgm,
    write_pgm_autoscale,
)

out_dir = Path(__file__).parent / "output" / "rof"
out_dir.mkdir(parents=True, exist_ok=True)

size = 96
rng = np.random.default_rng(1)
yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

clean = 0.35 + 0.25 * xx / size
clean[(np.abs(xx - 30) < 15) & (np.abs(yy - 34) < 15)] = 0.85
clean[(xx - 65) ** 2 + (yy - 62) ** 2 < 17**2] = 0.15
noisy = clean + rng.normal(0, 0.08, clean.shape)

surfaces = {
    "flat": np.zeros((size, size)),
    "ramp": 2.0 * xx,
    "sine": 2.0 * np.sin(2 * np.pi * xx / 24.0),
}

write_pgm(clean, (0, 1), out_dir / "clean.pgm")
write_pgm(noisy, (0, 1), out_dir / "noisy.pgm")

results = {}
for name, t in surfaces.items():
    metric = flat_metric(noisy.shape) if name == "flat" else compute_metric(t)
    u = rof_manifold_solve(noisy, metric, lam=8.0, iterations=300)
    results[name] = u
    write_pgm(u, (0, 1), out_dir / f"denoised_{name}.pgm")
    write_pgm_autoscale(t, out_dir / f"surface_{name}.pgm")
    gx = np.sum(grad_x(u) ** 2)
    gy = np.sum(grad_y(u) ** 2)
    print(f"{name:5s}: residual gradient energy x {gx:8.3f}  y {gy:8.3f}  "
          f"x/y ratio {gx / gy:.2f}")

diff = np.abs(results["sine"] - results["flat"]).max()
print(f"\nmax |sine - flat| = {diff:.4f}  (curved surfaces change the result)")
print(f"outputs in {out_dir}")
