"""Randomized invariant suites backing ``sspvip --command verify``.

Each check returns a :class:`Check` with the worst observed (scaled)
violation; all sampling goes through the caller's generator so a fixed seed
gives identical reports.
"""

from dataclasses import dataclass

import numpy as np

from .problem import estimate_moduli, residuals
from .retractions import verify_sunny_nonexpansive


@dataclass
class Check:
    name: str
    max_violation: float
    tol: float

    @property
    def passed(self):
        return bool(self.max_violation <= self.tol)

    def to_dict(self):
        return {"name": self.name, "max_violation": self.max_violation,
                "tol": self.tol, "passed": self.passed}


def random_vectors(rng, n, dim, zero_share=0.1):
    """Unit-scale Gaussian vectors with a share of exact zero coordinates."""
    v = rng.standard_normal((n, dim))
    return np.where(rng.random((n, dim)) < zero_share, 0.0, v)


def _nonzero(rng, n, dim):
    v = random_vectors(rng, n, dim)
    bad = ~np.any(v != 0, axis=1)
    v[bad, 0] = 1.0
    return v


def sip_axiom_violations(space, n, rng):
    """Scaled violations of the semi-inner-product axioms.

    Keys: additivity, homogeneity (first argument), positivity,
    norm_identity (``[x, x] = ||x||^2``), cauchy_schwarz,
    second_arg_positive (``[x, t y] = t [x, y]`` for ``t > 0``) and
    second_arg_real (same identity for any real ``t``).
    """
    d = space.dim
    x, y, z = (_nonzero(rng, n, d) for _ in range(3))
    lam = rng.uniform(-5, 5, n)
    t = np.exp(rng.uniform(-3, 3, n))
    nx, ny, nz = space.norm(x), space.norm(y), space.norm(z)
    sxz, syz = space.sip(x, z), space.sip(y, z)
    sxy = space.sip(x, y)
    sxx, syy = space.sip(x, x), space.sip(y, y)
    out = {}
    out["additivity"] = np.abs(space.sip(x + y, z) - sxz - syz) / ((nx + ny) * nz)
    lx = lam[:, None] * x
    out["homogeneity"] = np.abs(space.sip(lx, y) - lam * sxy) / (
        np.maximum(np.abs(lam), 1e-300) * nx * ny)
    out["positivity"] = np.where(sxx > 0, 0.0, 1.0)
    out["norm_identity"] = np.abs(sxx - nx ** 2) / nx ** 2
    out["cauchy_schwarz"] = np.maximum(sxy ** 2 - sxx * syy, 0.0) / (nx * ny) ** 2
    out["second_arg_positive"] = np.abs(space.sip(x, t[:, None] * y) - t * sxy) / (t * nx * ny)
    out["second_arg_real"] = np.abs(space.sip(x, lam[:, None] * y) - lam * sxy) / (
        np.maximum(np.abs(lam), 1e-300) * nx * ny)
    return {k: float(np.max(v)) for k, v in out.items()}


def smoothness_violation(space, n, rng, c=None):
    """Worst ``(||x+y||^2 - ||x||^2 - 2[y, x] - c||y||^2) / (||x|| + ||y||)^2``.

    Returns ``(max positive violation, max absolute gap)``; the gap is the
    equality defect used at p = 2.
    """
    c = space.c if c is None else c
    x = random_vectors(rng, n, space.dim)
    y = random_vectors(rng, n, space.dim)
    nx, ny = space.norm(x), space.norm(y)
    scale = np.maximum((nx + ny) ** 2, 1e-300)
    gap = (space.norm(x + y) ** 2 - nx ** 2 - 2 * space.sip(y, x) - c * ny ** 2) / scale
    return float(max(np.max(gap), 0.0)), float(np.max(np.abs(gap)))


def adjoint_violations(op, n, rng):
    """Defining-identity defect and norm-bound excess of the generalized adjoint."""
    X, Y = op.domain_space, op.codomain_space
    x = random_vectors(rng, n, X.dim)
    y = random_vectors(rng, n, Y.dim)
    ay = op.adjoint_apply(y)
    lhs = Y.sip(op.apply(x), y)
    rhs = X.sip(x, ay)
    ident = np.abs(lhs - rhs) / (1.0 + np.abs(lhs))
    excess = (X.norm(ay) - op.norm_upper * Y.norm(y)) / (1.0 + op.norm_upper * Y.norm(y))
    return float(np.max(ident)), float(max(np.max(excess), 0.0))


def run_instance_suite(inst, rng, samples=2000, lam=1.0, gam=1.0):
    """All invariant checks relevant to one instance."""
    checks = []
    for label, sp in (("space1", inst.space1), ("space2", inst.space2)):
        for key, v in sip_axiom_violations(sp, samples, rng).items():
            checks.append(Check(f"sip.{key}[{label}]", v, 1e-10))
        viol, gap = smoothness_violation(sp, samples, rng)
        checks.append(Check(f"smoothness[{label}]", viol, 1e-10))
        if sp.p == 2:
            checks.append(Check(f"smoothness_equality[{label}]", gap, 1e-12))
        u = random_vectors(rng, samples, sp.dim)
        back = sp.inverse_duality_map(sp.duality_map(u))
        rt = np.max(sp.norm(back - u) / np.maximum(sp.norm(u), 1e-300))
        checks.append(Check(f"duality_round_trip[{label}]", float(rt), 1e-10))
    ident, excess = adjoint_violations(inst.A, samples, rng)
    checks.append(Check("adjoint.identity", ident, 1e-10))
    checks.append(Check("adjoint.norm_bound", excess, 0.0))
    checks.append(Check("opnorm.lower_le_upper",
                        max(inst.A.norm_lower - inst.A.norm_upper, 0.0), 0.0))
    for label, cset in (("C1", inst.C1), ("C2", inst.C2)):
        rep = verify_sunny_nonexpansive(cset, trials=samples // 2, tol=1e-12, rng=rng)
        checks.append(Check(f"retraction.characterization_ii[{label}]",
                            rep.characterization_ii, 1e-12))
        checks.append(Check(f"retraction.characterization_iii[{label}]",
                            rep.characterization_iii, 1e-12))
        checks.append(Check(f"retraction.nonexpansive[{label}]", rep.nonexpansive, 1e-12))
        checks.append(Check(f"retraction.sunny[{label}]", rep.sunny, 1e-12))
        checks.append(Check(f"retraction.idempotence[{label}]", rep.idempotence, 0.0))
        checks.append(Check(f"retraction.fixes_set[{label}]", rep.fixes_set, 0.0))
    for label in ("F", "G", "f", "g"):
        fmap = getattr(inst, label)
        a_est, b_est = estimate_moduli(fmap, samples // 2, rng)
        checks.append(Check(f"moduli.alpha[{label}]", max(fmap.alpha - a_est, 0.0), 1e-9))
        checks.append(Check(f"moduli.beta[{label}]", max(b_est - fmap.beta, 0.0), 1e-9))
    if inst.known_solution is not None:
        r = residuals(inst, *inst.known_solution, lam, gam)
        checks.append(Check("known_solution.residual", float(np.max(r)), 1e-10))
    return checks
