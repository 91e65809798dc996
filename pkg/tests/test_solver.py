import math
import warnings

import numpy as np
import pytest

from sspvip import (AffineScalar, BoundedLinearOp, InfeasibleCertificateWarning,
                    LpSpace, SolverConfig, SspvipInstance, WholeSpace, certificate,
                    contraction_certificate, generate_instance, solve_spvip,
                    solve_sspvip, suggest_parameters)
from sspvip.solver import contraction_factor, step_window

from hilbert_reference import hilbert_iterates


def test_theta_vanishes_at_optimal_step():
    assert contraction_factor(1.0, 1.0, 1.0, 1.0) == 0.0
    cert = contraction_certificate((1, 1, 1, 1, 1, 1, 1, 1), 1.0, 1.0, 1.0, 1.0, 0.5, 1.0)
    assert cert.theta1 == 0.0 and cert.theta3 == 0.0


def test_decoupled_limit():
    mod = (1.0, 1.5, 0.8, 1.2, 1.0, 1.0, 1.0, 1.0)
    cert = contraction_certificate(mod, 2.0, 1.0, 0.3, 0.5, 0.0, 3.0)
    assert cert.m == 0.0 and cert.p1 == 1.0 and cert.p2 == 1.0
    assert (cert.k1, cert.k2) == (cert.theta1, cert.theta2)
    # Window is (0, min 2 alpha_i / (c beta_i^2)).
    assert cert.lambda_window[0] == 0.0
    assert cert.lambda_window[1] == pytest.approx(min(2 * 1.0 / (2 * 1.5 ** 2),
                                                      2 * 0.8 / (2 * 1.2 ** 2)), rel=1e-15)
    assert cert.feasible == (cert.theta < 1)


def test_certificate_with_zero_operator_decouples(rng):
    X, Y = LpSpace(2, 3), LpSpace(2, 3)
    A = BoundedLinearOp(np.zeros((2, 2)), X, Y)
    F = AffineScalar(X, 1.0)
    inst = SspvipInstance(X, Y, WholeSpace(X), WholeSpace(Y), F, F, F, F, A)
    cert = certificate(inst, SolverConfig(0.5, 0.5, 1.0))
    assert cert.m == 0 and cert.feasible
    assert cert.theta == pytest.approx(math.sqrt(1 - 1 + 2 * 0.25), rel=1e-15)


def test_negative_radicand_is_diagnosed_not_raised():
    cert = contraction_certificate((2, 1, 1, 1, 1, 1, 1, 1), 1.0, 1.0, 1.0, 1.0, 0.1, 1.0)
    assert math.isnan(cert.theta1)
    assert not cert.feasible
    assert any("radicand" in d for d in cert.diagnostics)


def test_window_membership_matches_theta_below_p(rng):
    agree = 0
    for _ in range(5000):
        b = rng.uniform(0.5, 3.0, 4)
        a = b * rng.uniform(0.6, 1.0, 4)
        mod = (a[0], b[0], a[1], b[1], a[2], b[2], a[3], b[3])
        c1, c2 = rng.choice([1.0, 2.0, 3.0], 2)
        gam = a[2] / (c2 * b[2] ** 2)
        lam = rng.uniform(0, 2) * a[0] / (c1 * b[0] ** 2)
        cert = contraction_certificate(mod, c1, c2, lam, gam, rng.uniform(0, 0.2), 1.0)
        lo, hi = cert.lambda_window
        if math.isnan(lo):
            continue
        direct = cert.theta1 < cert.p1 and cert.theta2 < cert.p2
        assert (lo < lam < hi) == direct
        assert cert.feasible == direct == (cert.theta < 1)
        agree += 1
        if agree == 100:
            break
    assert agree == 100


def test_step_window_roots():
    assert step_window(1.0, 1.0, 1.0, 0.5) == (0.5, 1.5)
    lo, hi = step_window(1.0, 1.1, 1.5, 0.8)
    for s in (lo, hi):
        assert 1.5 * 1.21 * s * s - 2 * s + (1 - 0.64) == pytest.approx(0, abs=1e-14)
    assert step_window(0.1, 2.0, 3.0, 0.0) is None


def hilbert_instance(seed=0, **kw):
    kw.setdefault("active_fraction", 0.5)
    return generate_instance(seed, (4, 3), 2.0, 2.0, **kw)


def config_for(inst, **kw):
    lam, gam, rho = suggest_parameters(inst)
    kw.setdefault("tol_residual", 1e-13)
    return SolverConfig(lam, gam, rho, **kw)


def test_start_at_solution_stops_immediately():
    inst = hilbert_instance()
    u = inst.known_solution[0]
    tr = solve_sspvip(inst, config_for(inst), (u, u))
    assert tr.iterations == 0 and tr.status == "converged"
    assert tr.final_residual <= 1e-12


def _reduced_parts(inst):
    return (inst.space1, inst.space2, inst.C1, inst.C2, inst.F, inst.F,
            inst.f, inst.f, inst.A, inst.known_solution)


def test_hilbert_instance_converges_monotonically():
    inst = hilbert_instance(3)
    cfg = config_for(inst, alpha=0.9)
    assert certificate(inst, cfg).feasible
    tr = solve_sspvip(inst, cfg, (np.ones(4), -np.ones(4)))
    assert tr.status == "converged" and tr.iterations <= 10_000
    assert tr.final_residual <= 1e-8
    assert np.all(np.diff(tr.err_star) <= 0)


@pytest.mark.parametrize("seed", range(5))
def test_p3_per_iteration_bound(seed, rng):
    inst = generate_instance(seed, (6, 4), 3.0, 3.0, sets=("box", "orthant"),
                             active_fraction=0.5)
    cfg = config_for(inst, alpha=0.7)
    cert = certificate(inst, cfg)
    assert cert.feasible
    start = rng.standard_normal((2, 6)) * 3
    tr = solve_sspvip(inst, cfg, start)
    e = tr.err_star
    fac = 1 - tr.alphas * (1 - cert.theta)
    assert np.all(e[1:] <= fac * e[:-1] + 1e-12 * (1 + e[:-1]))
    assert np.all(e <= tr.cumulative_bound + 1e-12 * (1 + e))
    est = tr.intermediate_estimates(inst)
    for lhs, rhs in est.values():
        assert np.all(lhs <= rhs + 1e-10 * (1 + rhs))


def test_spvip_matches_sspvip_under_reduction(rng):
    base = generate_instance(4, (5, 3), 3.0, 2.0, sets=("box", "box"), active_fraction=0.4)
    inst = SspvipInstance(*_reduced_parts(base))
    lam, _, rho = suggest_parameters(inst)
    cfg = SolverConfig(lam, lam, rho, tol_residual=1e-13, max_iters=400)
    x0 = rng.standard_normal(5)
    full = solve_sspvip(inst, cfg, (x0, x0))
    red = solve_spvip(inst, cfg, x0)
    assert red.iterations == full.iterations
    assert np.max(np.abs(red.x1 - full.x1)) <= 1e-14
    assert np.max(np.abs(full.y1 - full.x1)) <= 1e-14


def test_spvip_requires_reduction():
    inst = generate_instance(0, moduli=(1.0, 1.25, 1.1, 1.3, 1.0, 1.25, 1.0, 1.25))
    with pytest.raises(ValueError):
        solve_spvip(inst, SolverConfig(0.5, 0.5, 0.1))
    red = SspvipInstance(*_reduced_parts(inst))
    with pytest.raises(ValueError):
        solve_spvip(red, SolverConfig(0.5, 0.6, 0.1))


@pytest.mark.filterwarnings("ignore::sspvip.InfeasibleCertificateWarning")
def test_spvip_identity_maps_contract_geometrically():
    X, Y = LpSpace(3, 2), LpSpace(2, 2)
    A = BoundedLinearOp(np.array([[1.0, 0.5, 0.0], [0.0, 1.0, -1.0]]), X, Y)
    F, f = AffineScalar(X, 1.0), AffineScalar(Y, 1.0)
    inst = SspvipInstance(X, Y, WholeSpace(X), WholeSpace(Y), F, F, f, f, A,
                          (np.zeros(3), np.zeros(3)))
    lam, t = 0.4, 0.8
    cfg = SolverConfig(lam, lam, 0.3, alpha=t, max_iters=50, tol_residual=0, tol_step=0)
    x0 = np.array([1.0, -2.0, 0.5])
    tr = solve_spvip(inst, cfg, x0)
    # a2 - A a1 = 0 here, so x_{n+1} = (1 - t lam) x_n.
    expected = (1 - t * lam) ** np.arange(51)[:, None] * x0
    np.testing.assert_allclose(tr.x1, expected, rtol=1e-12, atol=1e-300)


def test_spvip_zero_start_at_solution():
    X = LpSpace(2, 3)
    F = AffineScalar(X, 1.0)
    A = BoundedLinearOp(np.eye(2), X, X)
    inst = SspvipInstance(X, X, WholeSpace(X), WholeSpace(X), F, F, F, F, A,
                          (np.zeros(2), np.zeros(2)))
    tr = solve_spvip(inst, SolverConfig(0.5, 0.5, 0.1), np.zeros(2))
    assert tr.iterations == 0 and tr.status == "converged"


@pytest.mark.parametrize("sets", [("box", "box"), ("ball", "orthant"),
                                  ("subspace", "ball"), ("whole", "subspace")])
def test_generic_path_equals_direct_hilbert(sets, rng):
    inst = generate_instance(8, (5, 4), 2.0, 2.0, sets=sets, active_fraction=0.5)
    lam, gam, rho = suggest_parameters(inst)
    cfg = SolverConfig(lam, gam, rho, alpha=0.6, max_iters=60, tol_residual=0, tol_step=0)
    x0, y0 = rng.standard_normal((2, 5))
    tr = solve_sspvip(inst, cfg, (x0, y0))
    xs, ys = hilbert_iterates(inst, lam, gam, rho, 0.6, x0, y0, 60)
    assert np.max(np.abs(tr.x1 - xs)) <= 1e-14
    assert np.max(np.abs(tr.y1 - ys)) <= 1e-14


def test_harmonic_schedule():
    cfg = SolverConfig(1.0, 1.0, 1.0, alpha="harmonic", harmonic_scale=0.5)
    assert [cfg.alpha_n(n) for n in range(3)] == [0.5, 0.25, 0.5 / 3]
    inst = hilbert_instance(2)
    cfg = config_for(inst, alpha="harmonic", max_iters=300)
    tr = solve_sspvip(inst, cfg, (np.ones(4), np.ones(4)))
    e = tr.err_star
    assert np.all(e[1:] <= tr.bound_rhs[1:] + 1e-12 * (1 + e[:-1]))
    assert e[-1] < e[0]


def test_bad_configs():
    for kw in ({"lam": 0}, {"rho": -1}, {"alpha": 1.5}, {"alpha": "fib"}, {"max_iters": 0}):
        args = {"lam": 1.0, "gam": 1.0, "rho": 1.0, **kw}
        with pytest.raises(ValueError):
            SolverConfig(**args)


def test_infeasible_certificate_warns_and_divergence_is_reported():
    inst = hilbert_instance(1, sets=("whole", "whole"))
    cfg = SolverConfig(40.0, 0.5, 0.5, max_iters=2000)
    with pytest.warns(InfeasibleCertificateWarning):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            warnings.simplefilter("always", InfeasibleCertificateWarning)
            tr = solve_sspvip(inst, cfg, (np.ones(4), np.ones(4)))
    assert tr.status == "diverged" and tr.diverged
    assert tr.message


def test_trace_rows_layout():
    inst = hilbert_instance(5)
    tr = solve_sspvip(inst, config_for(inst, max_iters=7, tol_residual=0, tol_step=0))
    rows = tr.rows()
    assert len(rows) == tr.iterations + 1 == 8
    assert rows[0][6] is None and rows[0][7] is None
    assert rows[3][0] == 3 and rows[3][7] == tr.bound_rhs[3]
    assert tr.status == "max_iters"
