import numpy as np
import pytest

from evrecon import (
    SolverConfig,
    compute_metric,
    energy,
    flat_metric,
    grad_x,
    operator_norm_bound,
    primal_dual_solve,
    prox_data,
    prox_dual,
    rof_manifold_solve,
    surface_gradient,
    surface_gradient_adjoint,
)
from reference import golden_section, ref_flat_rof, ref_flat_tvkl


def random_box_image(rng, shape, cfg):
    return np.clip(
        0.5 * (cfg.u_min + cfg.u_max) + 0.4 * rng.normal(0, 1, shape),
        cfg.u_min,
        cfg.u_max,
    )


# --- config ---------------------------------------------------------------


def test_config_defaults_satisfy_step_rule():
    cfg = SolverConfig()
    assert cfg.tau * cfg.sigma <= 1.0 / operator_norm_bound() + 1e-12


def test_config_rejects_bad_step_product():
    with pytest.raises(ValueError, match="step sizes"):
        SolverConfig(tau=1.0, sigma=1.0)


def test_config_rejects_bad_box():
    with pytest.raises(ValueError):
        SolverConfig(u_min=0.0, u_max=1.0)
    with pytest.raises(ValueError):
        SolverConfig(u_min=2.0, u_max=1.0)


# --- prox_data ------------------------------------------------------------


def test_prox_data_zero_weight_is_projection():
    cfg = SolverConfig(lam=0.0)
    m = flat_metric((1, 3))
    u_bar = np.array([[0.2, 1.4, 3.0]])
    f = np.array([[1.5, 1.5, 1.5]])
    out = prox_data(u_bar, f, m, tau=0.3, cfg=cfg)
    np.testing.assert_allclose(out, [[1.0, 1.4, 2.0]])


def test_prox_data_measurement_is_fixed_point():
    cfg = SolverConfig(lam=2.0)
    m = flat_metric((2, 2))
    f = np.array([[1.2, 1.5], [1.8, 1.01]])
    out = prox_data(f.copy(), f, m, tau=0.7, cfg=cfg)
    np.testing.assert_allclose(out, f, atol=1e-14)


def test_prox_data_rejects_nonpositive_measurement():
    cfg = SolverConfig()
    with pytest.raises(ValueError, match="positive"):
        prox_data(np.ones((1, 1)), np.zeros((1, 1)), flat_metric((1, 1)), 0.1, cfg)


def test_prox_data_matches_golden_section():
    # the frozen spot-check instance plus a randomized sweep
    cfg = SolverConfig(lam=1.0, u_min=1.0, u_max=2.0)
    m = flat_metric((1, 1))
    out = prox_data(np.array([[1.3]]), np.array([[1.6]]), m, tau=0.2, cfg=cfg)
    want = golden_section(
        lambda u: 0.5 * (u - 1.3) ** 2 + 0.2 * (u - 1.6 * np.log(u)), 1.0, 2.0
    )
    assert abs(out[0, 0] - np.clip(want, 1.0, 2.0)) <= 1e-8

    rng = np.random.default_rng(20)
    for _ in range(300):
        u_bar = rng.uniform(0.3, 2.8)
        f = rng.uniform(1.0, 2.0)
        beta = rng.uniform(0.0, 0.6)
        got = prox_data(np.array([[u_bar]]), np.array([[f]]), m, beta, cfg)[0, 0]
        ref = golden_section(
            lambda u: 0.5 * (u - u_bar) ** 2 + beta * (u - f * np.log(u)), 1.0, 2.0
        )
        assert abs(got - np.clip(ref, 1.0, 2.0)) <= 1e-7


def test_prox_data_respects_box():
    rng = np.random.default_rng(21)
    cfg = SolverConfig(lam=3.0)
    m = compute_metric(rng.normal(0, 2, (6, 6)))
    out = prox_data(
        rng.uniform(-1, 4, (6, 6)), rng.uniform(1, 2, (6, 6)), m, 0.3, cfg
    )
    assert out.min() >= cfg.u_min and out.max() <= cfg.u_max


# --- prox_dual ------------------------------------------------------------


def test_prox_dual_zero():
    m = flat_metric((3, 3))
    out = prox_dual(np.zeros((3, 3, 3)), m)
    np.testing.assert_array_equal(out, 0.0)


def test_prox_dual_halves_double_norm():
    rng = np.random.default_rng(22)
    m = compute_metric(rng.normal(0, 1.5, (5, 5)))
    direction = rng.normal(0, 1, (5, 5, 3))
    direction /= np.linalg.norm(direction, axis=2, keepdims=True)
    p = direction * (2.0 * m.sqrtG)[..., None]
    out = prox_dual(p, m)
    np.testing.assert_allclose(out, p / 2.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(out, axis=2), m.sqrtG, atol=1e-12)


def test_prox_dual_interior_unchanged():
    rng = np.random.default_rng(23)
    m = compute_metric(rng.normal(0, 1, (4, 4)))
    p = rng.normal(0, 0.2, (4, 4, 3))  # norms well below sqrtG >= 1
    np.testing.assert_array_equal(prox_dual(p, m), p)


def test_prox_dual_nonexpansive():
    rng = np.random.default_rng(24)
    m = compute_metric(rng.normal(0, 2, (6, 6)))
    for _ in range(50):
        p = rng.normal(0, 2, (6, 6, 3))
        q = rng.normal(0, 2, (6, 6, 3))
        dist_out = np.linalg.norm(prox_dual(p, m) - prox_dual(q, m))
        assert dist_out <= np.linalg.norm(p - q) + 1e-12


def test_prox_dual_matches_radial_formula():
    rng = np.random.default_rng(25)
    m = compute_metric(rng.normal(0, 2, (8, 8)))
    p = rng.normal(0, 2, (8, 8, 3))
    out = prox_dual(p, m)
    norms = np.linalg.norm(p, axis=2)
    for i in range(8):
        for j in range(8):
            r = m.sqrtG[i, j]
            if norms[i, j] <= r:
                expected = p[i, j]
            else:
                expected = p[i, j] * (r / norms[i, j])
            np.testing.assert_allclose(out[i, j], expected, atol=1e-12)


# --- energy ---------------------------------------------------------------


def test_energy_constant_closed_form():
    c, lam, n = 1.5, 0.7, 6 * 6
    img = np.full((6, 6), c)
    e = energy(img, img, flat_metric((6, 6)), lam)
    assert e == pytest.approx(lam * n * (c - c * np.log(c)))


def test_energy_linear_in_lambda():
    rng = np.random.default_rng(26)
    cfg = SolverConfig()
    u = random_box_image(rng, (7, 7), cfg)
    f = random_box_image(rng, (7, 7), cfg)
    m = compute_metric(rng.normal(0, 1, (7, 7)))
    tv = energy(u, f, m, 0.0)
    e1 = energy(u, f, m, 1.0)
    e2 = energy(u, f, m, 2.0)
    assert e2 - tv == pytest.approx(2.0 * (e1 - tv), rel=1e-12)


def test_energy_rejects_nonpositive():
    with pytest.raises(ValueError):
        energy(np.zeros((2, 2)), np.ones((2, 2)), flat_metric((2, 2)), 1.0)


# --- primal_dual_solve ------------------------------------------------------


def test_solve_constant_fixed_point():
    cfg = SolverConfig(lam=0.7, max_iterations=50)
    f = np.full((8, 8), 1.3)
    res = primal_dual_solve(f, flat_metric((8, 8)), cfg)
    np.testing.assert_allclose(res.u, 1.3, atol=1e-12)


def test_solve_output_in_box_and_dual_feasible():
    rng = np.random.default_rng(27)
    cfg = SolverConfig(lam=1.0, max_iterations=60)
    f = random_box_image(rng, (12, 12), cfg)
    m = compute_metric(rng.normal(0, 1.5, (12, 12)))
    res = primal_dual_solve(f, m, cfg)
    assert res.u.min() >= cfg.u_min and res.u.max() <= cfg.u_max
    assert np.all(np.linalg.norm(res.p, axis=2) <= m.sqrtG + 1e-9)


def test_solve_decreases_energy_vs_init():
    rng = np.random.default_rng(28)
    cfg = SolverConfig(lam=0.7, max_iterations=80)
    f = random_box_image(rng, (16, 16), cfg)
    m = compute_metric(rng.normal(0, 1, (16, 16)))
    res = primal_dual_solve(f, m, cfg)
    assert energy(res.u, f, m, cfg.lam) <= energy(f, f, m, cfg.lam) + 1e-9


def test_solve_energy_monotone_after_transient():
    rng = np.random.default_rng(29)
    cfg = SolverConfig(lam=0.7, max_iterations=80)
    f = random_box_image(rng, (16, 16), cfg)
    m = compute_metric(rng.normal(0, 1, (16, 16)))
    trace = []
    primal_dual_solve(f, m, cfg, trace=trace)
    energies = [row[1] for row in trace]
    for a, b in zip(energies[3:], energies[4:]):
        assert b <= a + 1e-9


def test_solve_early_stop_on_tolerance():
    cfg = SolverConfig(lam=0.7, max_iterations=500, convergence_tol=1e-5)
    rng = np.random.default_rng(30)
    f = random_box_image(rng, (10, 10), cfg)
    res = primal_dual_solve(f, flat_metric((10, 10)), cfg)
    assert res.iterations < 500
    assert res.rel_change < 1e-5


def test_solve_rejects_out_of_box_measurement():
    cfg = SolverConfig()
    f = np.full((4, 4), 5.0)
    with pytest.raises(ValueError, match="box"):
        primal_dual_solve(f, flat_metric((4, 4)), cfg)


def test_solve_geometry_mismatch():
    cfg = SolverConfig()
    with pytest.raises(ValueError):
        primal_dual_solve(np.full((4, 4), 1.5), flat_metric((5, 5)), cfg)


def test_solve_deterministic():
    rng = np.random.default_rng(31)
    cfg = SolverConfig(lam=1.2, max_iterations=40)
    f = random_box_image(rng, (9, 9), cfg)
    m = compute_metric(rng.normal(0, 1, (9, 9)))
    r1 = primal_dual_solve(f, m, cfg)
    r2 = primal_dual_solve(f, m, cfg)
    np.testing.assert_array_equal(r1.u, r2.u)
    np.testing.assert_array_equal(r1.p, r2.p)


def test_solve_single_iteration_matches_op_composition():
    # the fused loop must stay equivalent to the documented half-steps
    rng = np.random.default_rng(32)
    cfg = SolverConfig(lam=0.9, max_iterations=1)
    f = random_box_image(rng, (11, 7), cfg)
    m = compute_metric(rng.normal(0, 1.3, (11, 7)))
    u0 = random_box_image(rng, (11, 7), cfg)
    p0 = rng.normal(0, 0.5, (11, 7, 3))
    res = primal_dual_solve(f, m, cfg, u_init=u0, p_init=p0)
    u1 = prox_data(u0 - cfg.tau * surface_gradient_adjoint(p0, m), f, m, cfg.tau, cfg)
    p1 = prox_dual(p0 + cfg.sigma * surface_gradient(2 * u1 - u0, m), m)
    np.testing.assert_allclose(res.u, u1, atol=1e-14)
    np.testing.assert_allclose(res.p, p1, atol=1e-14)


def test_solve_flat_matches_independent_reference():
    rng = np.random.default_rng(33)
    cfg = SolverConfig(lam=0.7, max_iterations=10000)
    f = random_box_image(rng, (8, 8), cfg)
    res = primal_dual_solve(f, flat_metric((8, 8)), cfg)
    ref = ref_flat_tvkl(f, cfg.lam, cfg.u_min, cfg.u_max, 10000)
    assert np.abs(res.u - ref).max() <= 1e-4


# --- ROF variant ------------------------------------------------------------


def test_rof_flat_equals_standard_rof():
    rng = np.random.default_rng(34)
    f = rng.normal(0.5, 0.25, (20, 20))
    step = 1.0 / np.sqrt(operator_norm_bound())
    ours = rof_manifold_solve(f, flat_metric((20, 20)), lam=8.0, iterations=250)
    ref = ref_flat_rof(f, lam=8.0, iterations=250, tau=step, sigma=step)
    np.testing.assert_allclose(ours, ref, atol=1e-12)


def test_rof_flat_converges_to_standard_rof_minimiser():
    # independent step sizes: same minimiser, looser tolerance
    rng = np.random.default_rng(35)
    f = rng.normal(0.5, 0.2, (12, 12))
    ours = rof_manifold_solve(f, flat_metric((12, 12)), lam=8.0, iterations=6000)
    ref = ref_flat_rof(f, lam=8.0, iterations=6000)
    assert np.abs(ours - ref).max() <= 1e-3


def test_rof_constant_fixed_point():
    f = np.full((6, 6), 0.8)
    rng = np.random.default_rng(36)
    m = compute_metric(rng.normal(0, 2, (6, 6)))
    out = rof_manifold_solve(f, m, lam=4.0, iterations=100)
    np.testing.assert_allclose(out, 0.8, atol=1e-12)


def test_rof_ramp_preserves_vertical_stripes_more():
    # ramp surface boosts fidelity in x, so stripe gradients survive more
    size = 24
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    stripes = 0.5 + 0.4 * np.sign(np.sin(2 * np.pi * xx / 8.0))
    a = 2.0
    ramp = a * xx
    flat_out = rof_manifold_solve(stripes, flat_metric(stripes.shape), 2.0, 400)
    ramp_out = rof_manifold_solve(stripes, compute_metric(ramp), 2.0, 400)
    assert np.sum(grad_x(ramp_out) ** 2) > np.sum(grad_x(flat_out) ** 2)
