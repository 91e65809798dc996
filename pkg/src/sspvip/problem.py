"""Problem data for systems of split variational inequalities.

An :class:`SspvipInstance` asks for ``(x1, y1)`` in ``C1 x C1`` with

    x1 = Q_C1(y1 - lam F y1),    A x1 = Q_C2(A y1 - gam f(A y1)),
    y1 = Q_C1(x1 - lam G x1),    A y1 = Q_C2(A x1 - gam g(A x1)).

The four residuals of these fixed-point equations vanish exactly at
solutions, independently of ``lam, gam > 0``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .linops import BoundedLinearOp
from .lp_space import LpSpace, StructuralError
from .retractions import (Box, CoordinateSubspace, EuclideanBall,
                          NonnegativeOrthant, SET_KINDS, WholeSpace,
                          set_from_dict)

FORMAT_VERSION = 1


class MonotoneMap:
    """Strongly monotone, Lipschitz map on a whole lp space.

    ``alpha`` is the strong-monotonicity modulus with respect to the
    semi-inner product, ``[Fx - Fy, x - y] >= alpha ||x - y||^2``, and
    ``beta`` the Lipschitz constant.
    """

    kind = "abstract"
    space: LpSpace
    alpha: float
    beta: float

    def __call__(self, x):
        return self.evaluate(self.space.check(x))

    def evaluate(self, x):
        raise NotImplementedError

    def _check_moduli(self):
        if not (0 < self.alpha <= self.beta < np.inf):
            raise StructuralError(
                f"need 0 < alpha <= beta, got alpha={self.alpha}, beta={self.beta}")

    def to_dict(self):
        raise StructuralError(f"{type(self).__name__} cannot be serialized")


def _frozen_vec(space, v, name):
    v = np.array(space.check(np.broadcast_to(np.asarray(v, dtype=float),
                                             (space.dim,)), name), copy=True)
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class AffineScalar(MonotoneMap):
    """``F(x) = a x + shift`` with ``a > 0``; alpha = beta = a."""

    space: LpSpace
    a: float
    shift: np.ndarray = 0.0
    kind = "affine_scalar"

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "shift", _frozen_vec(self.space, self.shift, "shift"))
        self._check_moduli()

    @property
    def alpha(self):
        return self.a

    @property
    def beta(self):
        return self.a

    def evaluate(self, x):
        return self.a * x + self.shift

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "shift": self.shift.tolist()}


@dataclass(frozen=True, eq=False)
class DiagonalAffine(MonotoneMap):
    """``F(x) = d * x + shift`` with positive diagonal ``d``."""

    space: LpSpace
    d: np.ndarray
    shift: np.ndarray = 0.0
    kind = "diagonal_affine"

    def __post_init__(self):
        d = _frozen_vec(self.space, self.d, "d")
        if np.any(d <= 0):
            raise StructuralError("diagonal entries must be positive")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "shift", _frozen_vec(self.space, self.shift, "shift"))

    @property
    def alpha(self):
        return float(np.min(self.d))

    @property
    def beta(self):
        return float(np.max(self.d))

    def evaluate(self, x):
        return self.d * x + self.shift

    def to_dict(self):
        return {"kind": self.kind, "d": self.d.tolist(), "shift": self.shift.tolist()}


def default_phi(alpha, beta):
    """Scalar map with slope ``alpha + (beta - alpha)(1 + cos t)/2``."""
    h = 0.5 * (beta - alpha)

    def phi(t):
        return alpha * t + h * (t + np.sin(t))

    return phi


@dataclass(frozen=True, eq=False)
class ComponentwiseMonotone(MonotoneMap):
    """``F(x)_i = phi(x_i) + shift_i`` for a scalar ``phi`` with slope in [alpha, beta].

    Coordinatewise maps keep their moduli in every lp: the semi-inner
    product is a positively weighted sum over coordinates. ``phi`` defaults
    to :func:`default_phi`; a custom ``phi`` makes the map unserializable.
    """

    space: LpSpace
    alpha: float
    beta: float
    shift: np.ndarray = 0.0
    phi: object = field(default=None, repr=False)
    kind = "componentwise"

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        self._check_moduli()
        object.__setattr__(self, "shift", _frozen_vec(self.space, self.shift, "shift"))
        object.__setattr__(self, "_custom", self.phi is not None)
        if self.phi is None:
            object.__setattr__(self, "phi", default_phi(self.alpha, self.beta))

    def evaluate(self, x):
        return self.phi(x) + self.shift

    def to_dict(self):
        if self._custom:
            raise StructuralError("componentwise map with custom phi cannot be serialized")
        return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta,
                "shift": self.shift.tolist()}


def map_from_dict(space, d):
    kind = d.get("kind")
    if kind == AffineScalar.kind:
        return AffineScalar(space, d["a"], np.array(d["shift"], dtype=float))
    if kind == DiagonalAffine.kind:
        return DiagonalAffine(space, np.array(d["d"], dtype=float),
                              np.array(d["shift"], dtype=float))
    if kind == ComponentwiseMonotone.kind:
        return ComponentwiseMonotone(space, d["alpha"], d["beta"],
                                     np.array(d["shift"], dtype=float))
    raise StructuralError(f"unknown map kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SspvipInstance:
    space1: LpSpace
    space2: LpSpace
    C1: object
    C2: object
    F: MonotoneMap
    G: MonotoneMap
    f: MonotoneMap
    g: MonotoneMap
    A: BoundedLinearOp
    known_solution: tuple = None
    seed: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, obj, sp in (("C1", self.C1, self.space1), ("C2", self.C2, self.space2),
                              ("F", self.F, self.space1), ("G", self.G, self.space1),
                              ("f", self.f, self.space2), ("g", self.g, self.space2)):
            if obj.space != sp:
                raise StructuralError(f"{name} lives in {obj.space}, expected {sp}")
        if self.A.domain_space != self.space1 or self.A.codomain_space != self.space2:
            raise StructuralError("A must map space1 into space2")
        if self.known_solution is not None:
            x, y = self.known_solution
            x = np.array(self.space1.check(x, "known x1"), copy=True)
            y = np.array(self.space1.check(y, "known y1"), copy=True)
            x.setflags(write=False)
            y.setflags(write=False)
            object.__setattr__(self, "known_solution", (x, y))

    @property
    def moduli(self):
        """(alpha1, beta1, alpha2, beta2, sigma1, eta1, sigma2, eta2)."""
        return (self.F.alpha, self.F.beta, self.G.alpha, self.G.beta,
                self.f.alpha, self.f.beta, self.g.alpha, self.g.beta)

    def to_dict(self):
        d = {
            "format": "sspvip-instance",
            "version": FORMAT_VERSION,
            "seed": self.seed,
            "space1": {"dim": self.space1.dim, "p": self.space1.p},
            "space2": {"dim": self.space2.dim, "p": self.space2.p},
            "C1": self.C1.to_dict(),
            "C2": self.C2.to_dict(),
            "maps": {k: getattr(self, k).to_dict() for k in ("F", "G", "f", "g")},
            "A": self.A.matrix.tolist(),
            "known_solution": None,
            "meta": self.meta,
        }
        if self.known_solution is not None:
            d["known_solution"] = {"x1": self.known_solution[0].tolist(),
                                   "y1": self.known_solution[1].tolist()}
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "sspvip-instance":
            raise StructuralError("not an sspvip instance document")
        if d.get("version") != FORMAT_VERSION:
            raise StructuralError(f"unsupported instance version {d.get('version')}")
        s1 = LpSpace(d["space1"]["dim"], d["space1"]["p"])
        s2 = LpSpace(d["space2"]["dim"], d["space2"]["p"])
        maps = d["maps"]
        ks = d.get("known_solution")
        known = None if ks is None else (np.array(ks["x1"], dtype=float),
                                         np.array(ks["y1"], dtype=float))
        return cls(s1, s2, set_from_dict(s1, d["C1"]), set_from_dict(s2, d["C2"]),
                   map_from_dict(s1, maps["F"]), map_from_dict(s1, maps["G"]),
                   map_from_dict(s2, maps["f"]), map_from_dict(s2, maps["g"]),
                   BoundedLinearOp(np.array(d["A"], dtype=float), s1, s2),
                   known, d.get("seed"), dict(d.get("meta") or {}))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def loads(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"malformed instance document: {exc}") from exc
        try:
            return cls.from_dict(d)
        except (KeyError, TypeError) as exc:
            raise StructuralError(f"malformed instance document: {exc!r}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


def residuals(inst, x1, y1, lam, gam):
    """The four fixed-point residuals ``(r1, r2, r3, r4)`` at ``(x1, y1)``."""
    if not (lam > 0 and gam > 0):
        raise ValueError("lam and gam must be positive")
    X, Y = inst.space1, inst.space2
    x1 = X.check(x1, "x1")
    y1 = X.check(y1, "y1")
    x2, y2 = inst.A(x1), inst.A(y1)
    r1 = X.norm(x1 - inst.C1(y1 - lam * inst.F(y1)))
    r2 = Y.norm(x2 - inst.C2(y2 - gam * inst.f(y2)))
    r3 = X.norm(y1 - inst.C1(x1 - lam * inst.G(x1)))
    r4 = Y.norm(y2 - inst.C2(x2 - gam * inst.g(x2)))
    return np.array([r1, r2, r3, r4], dtype=float)


def estimate_moduli(fmap, trials=1000, rng=None, spread=3.0):
    """Sampled ``(alpha_est, beta_est)`` for a map on its host space.

    ``alpha_est`` is the smallest observed ``[Fx - Fy, x - y] / ||x - y||^2``
    and ``beta_est`` the largest ``||Fx - Fy|| / ||x - y||``.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    rng = np.random.default_rng(rng)
    sp = fmap.space
    x = spread * rng.standard_normal((trials, sp.dim))
    y = spread * rng.standard_normal((trials, sp.dim))
    # Include some close pairs to probe local slopes.
    y[: trials // 4] = x[: trials // 4] + 1e-3 * rng.standard_normal((trials // 4, sp.dim))
    dx = x - y
    nd = sp.norm(dx)
    keep = nd > 0
    dF = fmap(x) - fmap(y)
    a = sp.sip(dF, dx)[keep] / nd[keep] ** 2
    b = sp.norm(dF)[keep] / nd[keep]
    return float(np.min(a)), float(np.max(b))


@dataclass
class InstanceReport:
    residuals: np.ndarray
    x_in_C1: bool
    Ax_in_C2: bool
    moduli_declared: tuple
    moduli_estimated: tuple
    tol: float

    @property
    def moduli_ok(self):
        ok = True
        for k in range(4):
            a, b = self.moduli_declared[2 * k: 2 * k + 2]
            ae, be = self.moduli_estimated[2 * k: 2 * k + 2]
            ok &= ae >= a - 1e-9 and be <= b + 1e-9
        return bool(ok)

    @property
    def passed(self):
        return bool(np.all(self.residuals <= self.tol) and self.x_in_C1
                    and self.Ax_in_C2 and self.moduli_ok)


def verify_instance(inst, lam=1.0, gam=1.0, trials=500, rng=None, tol=1e-10):
    """Residuals at the known solution, feasibility and moduli brackets."""
    if inst.known_solution is None:
        raise ValueError("instance carries no known solution")
    rng = np.random.default_rng(rng)
    x1, y1 = inst.known_solution
    res = residuals(inst, x1, y1, lam, gam)
    est = []
    for m in (inst.F, inst.G, inst.f, inst.g):
        est.extend(estimate_moduli(m, trials, rng))
    return InstanceReport(
        res,
        inst.C1.contains(x1, 1e-12) and inst.C1.contains(y1, 1e-12),
        inst.C2.contains(inst.A(x1), 1e-12) and inst.C2.contains(inst.A(y1), 1e-12),
        inst.moduli, tuple(est), tol)


# --------------------------------------------------------------------------
# Synthetic instances with a known solution.

DEFAULT_MODULI = (1.0, 1.25, 1.0, 1.25, 1.0, 1.25, 1.0, 1.25)


def _check_generator_moduli(moduli):
    if len(moduli) != 8:
        raise StructuralError("moduli must be (a1, b1, a2, b2, s1, e1, s2, e2)")
    for lo, hi in zip(moduli[::2], moduli[1::2]):
        if not (0 < lo <= hi < np.inf):
            raise StructuralError(f"invalid modulus pair ({lo}, {hi})")


def _pick(rng, n, frac):
    k = int(round(frac * n))
    idx = np.zeros(n, dtype=bool)
    if k:
        idx[rng.choice(n, size=min(k, n), replace=False)] = True
    return idx


def _feasible_set(kind, space, rng, pinned_zero, active, base=None):
    """Return (set, point, normal-cone sampler).

    ``pinned_zero`` marks coordinates that the point must have exactly zero;
    ``base`` (if given) is the point the set must contain (used in space 2).
    The sampler draws vectors ``n`` with ``Q(point - t n) = point`` for t >= 0.
    """
    d = space.dim
    if base is None:
        u = rng.standard_normal(d)
        u[pinned_zero] = 0.0
    else:
        u = np.array(base, dtype=float)
    sign = np.zeros(d)  # +1: lower face active, -1: upper face, 2: free sign

    if kind == "whole":
        cset = WholeSpace(space)
    elif kind == "box":
        lo = u - rng.uniform(0.5, 2.0, d)
        hi = u + rng.uniform(0.5, 2.0, d)
        low_face = rng.random(d) < 0.5
        lo = np.where(active & low_face, u, lo)
        hi = np.where(active & ~low_face, u, hi)
        sign = np.where(active, np.where(low_face, 1.0, -1.0), 0.0)
        cset = Box(space, lo, hi)
    elif kind == "orthant":
        if base is None:
            u = np.abs(u)
            u[active] = 0.0
        cset = NonnegativeOrthant(space)
        sign = np.where(active & (u == 0), 1.0, 0.0)
    elif kind == "subspace":
        mask = pinned_zero.copy() if base is None else (pinned_zero & (u == 0))
        cset = CoordinateSubspace(space, mask)
        sign = np.where(active & mask, 2.0, 0.0)
    elif kind == "ball":
        if space.p != 2:
            raise StructuralError("ball sets require p = 2")
        w = rng.standard_normal(d)
        center = u - w
        dist = float(np.linalg.norm(w))
        on_sphere = bool(np.any(active)) and dist > 0
        radius = dist if on_sphere else max(2.0 * dist, 1.0)
        cset = EuclideanBall(space, center, radius)

        def normal(rng):
            if not on_sphere:
                return np.zeros(d)
            return -rng.uniform(0.5, 1.5) * w / dist

        return cset, u, normal
    else:
        raise StructuralError(f"unknown set kind {kind!r}; choose from {SET_KINDS}")

    def normal(rng):
        mag = rng.uniform(0.5, 1.5, d)
        free = rng.choice([-1.0, 1.0], d)
        return np.where(sign == 2.0, free * mag,
                        np.where(sign == 0.0, 0.0, sign * mag))

    return cset, u, normal


def _make_map(kind, space, lo, hi, rng, anchor, target):
    """Map with moduli (lo, hi) whose value at ``anchor`` is ``target``."""
    if kind == "componentwise":
        phi = default_phi(lo, hi)
        return ComponentwiseMonotone(space, lo, hi, target - phi(anchor))
    if kind == "diagonal":
        dvec = rng.uniform(lo, hi, space.dim)
        dvec[0] = lo
        dvec[-1] = hi
        return DiagonalAffine(space, dvec, target - dvec * anchor)
    raise StructuralError(f"unknown map kind {kind!r}")


def generate_instance(seed=0, dims=(4, 3), p1=2.0, p2=2.0, moduli=DEFAULT_MODULI,
                      sets=("box", "box"), map_kind="componentwise", a_norm=1.0,
                      active_fraction=0.0):
    """Random instance with known solution ``(u, u)``.

    ``u`` lies in ``C1`` and ``A u`` in ``C2``. The maps are shifted so that
    ``F(u), G(u)`` (resp. ``f(Au), g(Au)``) lie in the normal cone of the
    set at the point; with ``active_fraction = 0`` they vanish there, and
    larger values pin that share of coordinates to active constraints.
    ``A`` is scaled so that its certified norm bound equals ``a_norm``.
    """
    n1, n2 = int(dims[0]), int(dims[1])
    if n1 < 1 or n2 < 1:
        raise StructuralError("dims must be positive")
    _check_generator_moduli(moduli)
    if not 0.0 <= active_fraction <= 1.0:
        raise StructuralError("active_fraction must lie in [0, 1]")
    set1, set2 = sets
    for kind, p in ((set1, p1), (set2, p2)):
        if kind not in SET_KINDS:
            raise StructuralError(f"unknown set kind {kind!r}; choose from {SET_KINDS}")
        if kind == "ball" and p != 2:
            raise StructuralError("ball sets are only available at p = 2")
    rng = np.random.default_rng(seed)
    X, Y = LpSpace(n1, p1), LpSpace(n2, p2)

    zero1 = _pick(rng, n1, 1.0 / 3.0)
    act1 = _pick(rng, n1, active_fraction)
    if set1 == "subspace":
        act1 = act1 & zero1
    C1, u, normal1 = _feasible_set(set1, X, rng, zero1, act1)
    # Coordinates where u is exactly zero; rows supported there map u to 0.
    zcols = u == 0

    mat = rng.standard_normal((n2, n1)) / np.sqrt(n1)
    zero_rows = np.zeros(n2, dtype=bool)
    if set2 in ("subspace", "orthant"):
        zero_rows = _pick(rng, n2, 1.0 / 3.0)
        mat[np.ix_(zero_rows, ~zcols)] = 0.0
    if set2 == "orthant":
        v0 = mat @ u
        mat[v0 < 0] *= -1.0
    bound = BoundedLinearOp(mat, X, Y).norm_upper
    if bound > 0:
        mat = mat * (a_norm / bound)
    A = BoundedLinearOp(mat, X, Y)
    v = A(u)
    if set2 == "orthant":
        v = np.abs(v)  # clears -0.0; values are already >= 0
    act2 = _pick(rng, n2, active_fraction)
    if set2 in ("subspace", "orthant"):
        act2 = act2 & zero_rows
    C2, _, normal2 = _feasible_set(set2, Y, rng, zero_rows, act2, base=v)
    v = A(u)

    a1, b1, a2, b2, s1, e1, s2, e2 = (float(m) for m in moduli)
    F = _make_map(map_kind, X, a1, b1, rng, u, normal1(rng))
    G = _make_map(map_kind, X, a2, b2, rng, u, normal1(rng))
    f = _make_map(map_kind, Y, s1, e1, rng, v, normal2(rng))
    g = _make_map(map_kind, Y, s2, e2, rng, v, normal2(rng))

    meta = {"generator": {"dims": [n1, n2], "p1": X.p, "p2": Y.p,
                          "moduli": [a1, b1, a2, b2, s1, e1, s2, e2],
                          "sets": [set1, set2], "map_kind": map_kind,
                          "a_norm": float(a_norm),
                          "active_fraction": float(active_fraction)}}
    return SspvipInstance(X, Y, C1, C2, F, G, f, g, A, (u, u.copy()), seed, meta)
