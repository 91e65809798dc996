"""Relaxed retraction iterations for SSpVIP and SpVIP with contraction certificates.

One sweep of the coupled scheme, for iterates ``(x, y)`` in space 1::

    a1 = Q1(y - lam F y)          b1 = Q1(x - lam G x)
    a2 = Q2(Ay - gam f(Ay))       b2 = Q2(Ax - gam g(Ax))
    x+ = (1 - t) x + t (a1 + rho A+(a2 - A a1))
    y+ = (1 - t) y + t (b1 + rho A+(b2 - A b1))

with ``t = alpha_n`` and ``A+`` the generalized adjoint. When the
certificate is feasible the star-norm error ``||x - x*|| + ||y - y*||``
shrinks at least by ``1 - alpha_n (1 - theta)`` per sweep.
"""

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import minimize_scalar

from .problem import SspvipInstance


class InfeasibleCertificateWarning(RuntimeWarning):
    pass


DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class SolverConfig:
    """Step sizes, relaxation sequence and stopping rules.

    ``alpha`` is either a constant in (0, 1] or ``"harmonic"``, giving
    ``alpha_n = harmonic_scale / (n + 1)``. Both satisfy ``sum alpha_n = inf``.
    A tolerance of 0 disables that stopping rule.
    """

    lam: float
    gam: float
    rho: float
    alpha: object = 0.9
    harmonic_scale: float = 1.0
    max_iters: int = 10_000
    tol_residual: float = 1e-10
    tol_step: float = 1e-15

    def __post_init__(self):
        if not (self.lam > 0 and self.gam > 0 and self.rho > 0):
            raise ValueError("lam, gam and rho must be positive")
        if self.alpha == "harmonic":
            if not 0 < self.harmonic_scale <= 1:
                raise ValueError("harmonic_scale must lie in (0, 1]")
        elif isinstance(self.alpha, str) or not 0 < float(self.alpha) <= 1:
            raise ValueError(f"alpha must be in (0, 1] or 'harmonic', got {self.alpha!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if self.tol_residual < 0 or self.tol_step < 0:
            raise ValueError("tolerances must be nonnegative")

    def alpha_n(self, n):
        if self.alpha == "harmonic":
            return self.harmonic_scale / (n + 1.0)
        return float(self.alpha)


# --------------------------------------------------------------------------
# Contraction certificate


def contraction_factor(step, mono, lip, c):
    """``sqrt(1 - 2 step mono + c step^2 lip^2)``, or NaN for a negative radicand."""
    r = 1.0 - 2.0 * step * mono + c * step * step * lip * lip
    return math.sqrt(r) if r >= 0 else math.nan


def step_window(mono, lip, c, p):
    """Open interval of steps with ``contraction_factor < p``, or None if empty.

    Roots of ``c lip^2 s^2 - 2 mono s + (1 - p^2) = 0``.
    """
    disc = mono * mono - c * lip * lip * (1.0 - p * p)
    if not disc > 0:
        return None
    r = math.sqrt(disc)
    den = c * lip * lip
    return ((mono - r) / den, (mono + r) / den)


@dataclass
class ContractionCertificate:
    theta1: float
    theta2: float
    theta3: float
    theta4: float
    m: float
    p1: float
    p2: float
    k1: float
    k2: float
    theta: float
    lambda_window: tuple
    lam: float
    gam: float
    rho: float
    norm_A: float
    norm_A_adjoint: float
    feasible: bool
    diagnostics: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["lambda_window"] = list(self.lambda_window)
        return d


def contraction_certificate(moduli, c1, c2, lam, gam, rho, norm_A, norm_A_adjoint=None):
    """Evaluate the contraction constants for given moduli and parameters.

    ``moduli = (alpha1, beta1, alpha2, beta2, sigma1, eta1, sigma2, eta2)``;
    ``c1, c2`` are the smoothness constants of the two spaces.
    ``norm_A_adjoint`` defaults to ``norm_A``, which bounds ``||A+ y|| / ||y||``.
    """
    a1, b1, a2, b2, s1, e1, s2, e2 = (float(v) for v in moduli)
    if norm_A_adjoint is None:
        norm_A_adjoint = norm_A
    diag = []
    th = [contraction_factor(lam, a1, b1, c1), contraction_factor(lam, a2, b2, c1),
          contraction_factor(gam, s1, e1, c2), contraction_factor(gam, s2, e2, c2)]
    for i, t in enumerate(th, 1):
        if math.isnan(t):
            diag.append(f"theta{i}: negative radicand (parameters outside the real regime)")
    m = rho * norm_A_adjoint * norm_A
    ps = [(1.0 - m * th[2]) / (1.0 + m), (1.0 - m * th[3]) / (1.0 + m)]
    ks = [th[0] + m * (th[0] + th[2]), th[1] + m * (th[1] + th[3])]
    theta = max(ks)

    windows = []
    for i, (al, be, p) in enumerate(((a1, b1, ps[0]), (a2, b2, ps[1])), 1):
        if math.isnan(p):
            continue
        if not 0 < p <= 1:
            diag.append(f"p{i} = {p!r} outside (0, 1]; m * theta{i + 2} must be < 1")
            continue
        if not al > be * math.sqrt(c1 * (1.0 - p * p)):
            diag.append(f"alpha{i} <= beta{i} sqrt(c1 (1 - p{i}^2))")
            continue
        windows.append(step_window(al, be, c1, p))
    lo, hi = math.nan, math.nan
    window_ok = len(windows) == 2 and None not in windows
    if window_ok:
        lo, hi = max(w[0] for w in windows), min(w[1] for w in windows)
        if not lo < hi:
            diag.append("lambda window is empty")
            window_ok = False
    window = (lo, hi) if window_ok else (math.nan, math.nan)
    inside = window_ok and lo < lam < hi
    if window_ok and not inside:
        diag.append(f"lam = {lam!r} outside window ({lo!r}, {hi!r})")
    if not theta < 1:
        diag.append(f"theta = {theta!r} is not < 1")
    feasible = bool(window_ok and inside and theta < 1 and not any(math.isnan(t) for t in th))
    return ContractionCertificate(*th, m, *ps, *ks, theta, window, lam, gam, rho,
                                  norm_A, norm_A_adjoint, feasible, diag)


def certificate(inst, cfg):
    """Contraction certificate of ``inst`` under ``cfg``.

    ``||A||`` and ``||A+||`` are both taken as the certified bound
    ``inst.A.norm_upper``.
    """
    nA = inst.A.norm_upper
    return contraction_certificate(inst.moduli, inst.space1.c, inst.space2.c,
                                   cfg.lam, cfg.gam, cfg.rho, nA, nA)


def suggest_parameters(inst, coupling=0.5, m_cap=4.0):
    """Pick ``(lam, gam, rho)`` with a feasible certificate.

    ``gam`` minimizes ``max(theta3, theta4)``; ``rho`` puts ``m`` at
    ``coupling`` times the largest coupling for which some ``lam`` still
    contracts (capped at ``m_cap``); ``lam`` then minimizes ``theta``.
    """
    a1, b1, a2, b2, s1, e1, s2, e2 = inst.moduli
    c1, c2 = inst.space1.c, inst.space2.c
    nA = inst.A.norm_upper

    def worst_gam(g):
        return max(contraction_factor(g, s1, e1, c2), contraction_factor(g, s2, e2, c2))

    g_hi = 2.0 * max(s1 / (c2 * e1 * e1), s2 / (c2 * e2 * e2))
    gam = float(minimize_scalar(worst_gam, bounds=(0.0, g_hi), method="bounded",
                                options={"xatol": 1e-12}).x)
    t3 = contraction_factor(gam, s1, e1, c2)
    t4 = contraction_factor(gam, s2, e2, c2)
    l_hi = 2.0 * max(a1 / (c1 * b1 * b1), a2 / (c1 * b2 * b2))

    def best(m):
        def k(lam):
            t1 = contraction_factor(lam, a1, b1, c1)
            t2 = contraction_factor(lam, a2, b2, c1)
            return max(t1 + m * (t1 + t3), t2 + m * (t2 + t4))
        r = minimize_scalar(k, bounds=(0.0, l_hi), method="bounded",
                            options={"xatol": 1e-12})
        return float(r.x), float(r.fun)

    if best(m_cap)[1] < 1:
        m_crit = m_cap
    else:
        lo, hi = 0.0, m_cap
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if best(mid)[1] < 1 else (lo, mid)
        m_crit = lo
    m = coupling * m_crit
    rho = m / (nA * nA) if nA > 0 else 1.0
    lam = best(rho * nA * nA)[0]
    return lam, gam, rho


# --------------------------------------------------------------------------
# Iterations


@dataclass
class IterateTrace:
    """Per-iteration record; row ``n`` describes the iterate ``(x^n, y^n)``.

    ``a1, a2, b1, b2`` are the intermediates computed from that iterate and
    ``residuals`` the fixed-point residuals there. ``step[n]`` and
    ``bound_rhs[n]`` refer to the transition from ``n - 1`` (NaN at n = 0).
    For the single-inequality scheme ``y1, b1, b2`` are None and there
    are two residuals.
    """

    x1: np.ndarray
    y1: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    residuals: np.ndarray
    err_star: np.ndarray
    step: np.ndarray
    alphas: np.ndarray
    bound_rhs: np.ndarray
    cumulative_bound: np.ndarray
    certificate: ContractionCertificate
    status: str
    message: str = ""

    @property
    def iterations(self):
        return len(self.x1) - 1

    @property
    def converged(self):
        return self.status in ("converged", "stalled")

    @property
    def diverged(self):
        return self.status == "diverged"

    @property
    def final_residual(self):
        return float(np.max(self.residuals[-1]))

    def rows(self):
        """Table rows ``(n, r1..r4, err_star, step, theta_bound_rhs)``; None = unknown."""
        out = []
        for n in range(self.iterations + 1):
            r = list(self.residuals[n]) + [math.nan] * (4 - self.residuals.shape[1])
            e = None if self.err_star is None else self.err_star[n]
            s = None if n == 0 else self.step[n]
            b = None if n == 0 or self.bound_rhs is None else self.bound_rhs[n]
            out.append((n, *r, e, s, b))
        return out

    def intermediate_estimates(self, inst):
        """Left and right sides of the per-sweep estimates at a known solution.

        Returns a dict mapping ``"a1"``, ``"b1"``, ``"a2"``, ``"b2"`` to
        ``(lhs, rhs)`` arrays, e.g. ``||a1 - x*|| <= theta1 ||y - y*||``,
        plus ``"Ay"`` and ``"Ax"`` for ``||A(y - y*)|| <= ||A|| ||y - y*||``.
        """
        if inst.known_solution is None:
            raise ValueError("instance carries no known solution")
        if self.y1 is None:
            raise ValueError("trace from the single-inequality scheme")
        X, Y = inst.space1, inst.space2
        xs, ys = inst.known_solution
        x2s, y2s = inst.A(xs), inst.A(ys)
        x2, y2 = inst.A(self.x1), inst.A(self.y1)
        c = self.certificate
        dx, dy = X.norm(self.x1 - xs), X.norm(self.y1 - ys)
        dx2, dy2 = Y.norm(x2 - x2s), Y.norm(y2 - y2s)
        nA = inst.A.norm_upper
        return {
            "a1": (X.norm(self.a1 - xs), c.theta1 * dy),
            "b1": (X.norm(self.b1 - ys), c.theta2 * dx),
            "a2": (Y.norm(self.a2 - x2s), c.theta3 * dy2),
            "b2": (Y.norm(self.b2 - y2s), c.theta4 * dx2),
            "Ay": (dy2, nA * dy),
            "Ax": (dx2, nA * dx),
        }


class _Recorder:
    def __init__(self, n_res):
        self.cols = {k: [] for k in ("x1", "y1", "a1", "a2", "b1", "b2")}
        self.res, self.err, self.step, self.alphas = [], [], [], []
        self.n_res = n_res

    def add(self, res, err, step, **vecs):
        for k, v in vecs.items():
            self.cols[k].append(v)
        self.res.append(res)
        self.err.append(err)
        self.step.append(step)

    def finish(self, cert, status, message, known):
        def stack(k):
            return np.array(self.cols[k]) if self.cols[k] else None

        err = np.array(self.err) if known else None
        alphas = np.array(self.alphas)
        bound_rhs = cum = None
        if known:
            fac = 1.0 - alphas * (1.0 - cert.theta)
            bound_rhs = np.concatenate([[math.nan], fac * err[:-1]])
            cum = err[0] * np.concatenate([[1.0], np.cumprod(fac)])
        return IterateTrace(stack("x1"), stack("y1"), stack("a1"), stack("a2"),
                            stack("b1"), stack("b2"), np.array(self.res), err,
                            np.array(self.step), alphas, bound_rhs, cum, cert,
                            status, message)


def _warn_if_infeasible(cert):
    if not cert.feasible:
        warnings.warn("contraction certificate is infeasible: "
                      + "; ".join(cert.diagnostics), InfeasibleCertificateWarning,
                      stacklevel=3)


def solve_sspvip(inst: SspvipInstance, cfg: SolverConfig, start=None):
    """Run the coupled relaxed retraction scheme from ``start = (x0, y0)``.

    ``start`` defaults to ``(Q1(0), Q1(0))``. Stops when the largest
    residual drops to ``cfg.tol_residual`` (status ``"converged"``), the
    star-norm step to ``cfg.tol_step`` (``"stalled"``), after
    ``cfg.max_iters`` sweeps (``"max_iters"``), or on a non-finite or
    exploding iterate (``"diverged"``).
    """
    X, Y, A = inst.space1, inst.space2, inst.A
    C1, C2, F, G, f, g = inst.C1, inst.C2, inst.F, inst.G, inst.f, inst.g
    lam, gam, rho = cfg.lam, cfg.gam, cfg.rho
    cert = certificate(inst, cfg)
    _warn_if_infeasible(cert)

    if start is None:
        x = C1(X.zeros())
        y = x.copy()
    else:
        x = np.array(X.check(start[0], "x0"), dtype=float)
        y = np.array(X.check(start[1], "y0"), dtype=float)
    known = inst.known_solution is not None
    xs, ys = inst.known_solution if known else (None, None)

    def sweep(x, y):
        x2, y2 = A(x), A(y)
        a1 = C1(y - lam * F(y))
        a2 = C2(y2 - gam * f(y2))
        b1 = C1(x - lam * G(x))
        b2 = C2(x2 - gam * g(x2))
        res = np.array([X.norm(x - a1), Y.norm(x2 - a2),
                        X.norm(y - b1), Y.norm(y2 - b2)])
        return a1, a2, b1, b2, res

    def error(x, y):
        return float(X.norm(x - xs) + X.norm(y - ys)) if known else math.nan

    rec = _Recorder(4)
    a1, a2, b1, b2, res = sweep(x, y)
    err0 = error(x, y)
    size0 = float(X.norm(x) + X.norm(y))
    rec.add(res, err0, math.nan, x1=x, y1=y, a1=a1, a2=a2, b1=b1, b2=b2)
    status, message = "max_iters", ""
    for n in range(cfg.max_iters):
        if np.max(res) <= cfg.tol_residual:
            status = "converged"
            break
        t = cfg.alpha_n(n)
        x_new = (1 - t) * x + t * (a1 + rho * A.adjoint_apply(a2 - A(a1)))
        y_new = (1 - t) * y + t * (b1 + rho * A.adjoint_apply(b2 - A(b1)))
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new))):
            status, message = "diverged", f"non-finite iterate at sweep {n + 1}"
            break
        step = float(X.norm(x_new - x) + X.norm(y_new - y))
        x, y = x_new, y_new
        a1, a2, b1, b2, res = sweep(x, y)
        err = error(x, y)
        rec.alphas.append(t)
        rec.add(res, err, step, x1=x, y1=y, a1=a1, a2=a2, b1=b1, b2=b2)
        size = float(X.norm(x) + X.norm(y))
        if (size > DIVERGENCE_FACTOR * (1.0 + size0)
                or (known and err > DIVERGENCE_FACTOR * (1.0 + err0))):
            status, message = "diverged", f"iterate blew up at sweep {n + 1}"
            break
        if step <= cfg.tol_step:
            status = "converged" if np.max(res) <= cfg.tol_residual else "stalled"
            break
    else:
        if np.max(res) <= cfg.tol_residual:
            status = "converged"
    if status == "diverged":
        warnings.warn(message, RuntimeWarning, stacklevel=2)
    return rec.finish(cert, status, message, known)


def is_single_inequality(inst):
    """True when ``F = G`` and ``f = g`` (same object or same serialized form)."""
    def same(u, v):
        if u is v:
            return True
        try:
            return u.to_dict() == v.to_dict()
        except Exception:
            return False

    return same(inst.F, inst.G) and same(inst.f, inst.g)


def solve_spvip(inst: SspvipInstance, cfg: SolverConfig, start=None):
    """Single-inequality scheme (``F = G``, ``f = g``, ``gam = lam``).

    Iterates ``x+ = (1 - t) x + t (a1 + rho A+(a2 - A a1))`` with
    ``a1 = Q1(x - lam F x)``, ``a2 = Q2(Ax - lam f(Ax))``. The trace holds the
    x-iterates only; ``err_star`` is ``||x - x*||``.
    """
    if not is_single_inequality(inst):
        raise ValueError("solve_spvip needs an instance with F = G and f = g")
    if cfg.gam != cfg.lam:
        raise ValueError("solve_spvip needs gam == lam")
    X, Y, A = inst.space1, inst.space2, inst.A
    C1, C2, F, f = inst.C1, inst.C2, inst.F, inst.f
    lam, rho = cfg.lam, cfg.rho
    cert = certificate(inst, cfg)
    _warn_if_infeasible(cert)

    x = C1(X.zeros()) if start is None else np.array(X.check(start, "x0"), dtype=float)
    known = inst.known_solution is not None
    xs = inst.known_solution[0] if known else None

    def sweep(x):
        x2 = A(x)
        a1 = C1(x - lam * F(x))
        a2 = C2(x2 - lam * f(x2))
        return a1, a2, np.array([X.norm(x - a1), Y.norm(x2 - a2)])

    def error(x):
        return float(X.norm(x - xs)) if known else math.nan

    rec = _Recorder(2)
    a1, a2, res = sweep(x)
    err0 = error(x)
    size0 = float(X.norm(x))
    rec.add(res, err0, math.nan, x1=x, a1=a1, a2=a2)
    status, message = "max_iters", ""
    for n in range(cfg.max_iters):
        if np.max(res) <= cfg.tol_residual:
            status = "converged"
            break
        t = cfg.alpha_n(n)
        x_new = (1 - t) * x + t * (a1 + rho * A.adjoint_apply(a2 - A(a1)))
        if not np.all(np.isfinite(x_new)):
            status, message = "diverged", f"non-finite iterate at sweep {n + 1}"
            break
        step = float(X.norm(x_new - x))
        x = x_new
        a1, a2, res = sweep(x)
        err = error(x)
        rec.alphas.append(t)
        rec.add(res, err, step, x1=x, a1=a1, a2=a2)
        if (float(X.norm(x)) > DIVERGENCE_FACTOR * (1.0 + size0)
                or (known and err > DIVERGENCE_FACTOR * (1.0 + err0))):
            status, message = "diverged", f"iterate blew up at sweep {n + 1}"
            break
        if step <= cfg.tol_step:
            status = "converged" if np.max(res) <= cfg.tol_residual else "stalled"
            break
    else:
        if np.max(res) <= cfg.tol_residual:
            status = "converged"
    if status == "diverged":
        warnings.warn(message, RuntimeWarning, stacklevel=2)
    return rec.finish(cert, status, message, known)
