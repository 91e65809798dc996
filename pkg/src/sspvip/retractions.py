"""Sunny nonexpansive retractions onto a catalog of convex sets.

Every set here has a retraction that is sunny and nonexpansive in the host
lp norm. For the coordinatewise sets (box, orthant, coordinate subspace)
this holds for every p because the retraction acts on each coordinate by a
monotone 1-Lipschitz map and the semi-inner product is a positively
weighted coordinate sum. The Euclidean ball is only admitted at p = 2, where
metric projection is the sunny nonexpansive retraction.
"""

from dataclasses import dataclass

import numpy as np

from .lp_space import LpSpace, StructuralError


_SPHERE_SLACK = 1e-14


class ConvexSet:
    """Base class; subclasses implement :meth:`retract` and :meth:`contains`."""

    kind = "abstract"
    space: LpSpace

    def retract(self, x):
        raise NotImplementedError

    def contains(self, x, tol=0.0):
        raise NotImplementedError

    def sample(self, rng, n):
        """Draw ``n`` points of the set (interior and boundary)."""
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind}

    def __call__(self, x):
        return self.retract(x)


@dataclass(frozen=True, eq=False)
class WholeSpace(ConvexSet):
    space: LpSpace
    kind = "whole"

    def retract(self, x):
        return np.array(self.space.check(x), copy=True)

    def contains(self, x, tol=0.0):
        self.space.check(x)
        return True

    def sample(self, rng, n):
        return rng.standard_normal((n, self.space.dim))


def _encode_bound(v):
    return [("inf" if b > 0 else "-inf") if np.isinf(b) else float(b) for b in v]


def _decode_bound(v):
    return np.array([float(b) for b in v])


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    """``{x : lower <= x <= upper}``; bounds may be infinite."""

    space: LpSpace
    lower: np.ndarray
    upper: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        d = self.space.dim
        if lo.shape != (d,) or hi.shape != (d,):
            raise StructuralError(f"box bounds must have length {d}")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise StructuralError("box bounds contain NaN")
        if np.any(lo > hi) or np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise StructuralError("box is empty")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def retract(self, x):
        return np.clip(self.space.check(x), self.lower, self.upper)

    def contains(self, x, tol=0.0):
        x = self.space.check(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def sample(self, rng, n):
        d = self.space.dim
        lo = np.where(np.isfinite(self.lower), self.lower,
                      np.where(np.isfinite(self.upper), self.upper - 3.0, -3.0))
        hi = np.where(np.isfinite(self.upper), self.upper, lo + 3.0)
        pts = lo + (hi - lo) * rng.random((n, d))
        # Push a share of coordinates onto the faces.
        face = rng.random((n, d))
        pts = np.where(face < 0.15, lo, np.where(face > 0.85, hi, pts))
        return pts

    def to_dict(self):
        return {"kind": self.kind, "lower": _encode_bound(self.lower),
                "upper": _encode_bound(self.upper)}


@dataclass(frozen=True, eq=False)
class NonnegativeOrthant(ConvexSet):
    space: LpSpace
    kind = "orthant"

    def retract(self, x):
        return np.maximum(self.space.check(x), 0.0)

    def contains(self, x, tol=0.0):
        return bool(np.all(self.space.check(x) >= -tol))

    def sample(self, rng, n):
        pts = np.abs(rng.standard_normal((n, self.space.dim)))
        return np.where(rng.random(pts.shape) < 0.2, 0.0, pts)


@dataclass(frozen=True, eq=False)
class CoordinateSubspace(ConvexSet):
    """``{x : x_i = 0 for every masked i}``."""

    space: LpSpace
    mask: np.ndarray
    kind = "subspace"

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool).reshape(-1)
        if m.shape != (self.space.dim,):
            raise StructuralError(f"mask must have length {self.space.dim}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    def retract(self, x):
        return np.where(self.mask, 0.0, self.space.check(x))

    def contains(self, x, tol=0.0):
        x = self.space.check(x)
        return bool(np.all(np.abs(x[..., self.mask]) <= tol))

    def sample(self, rng, n):
        return np.where(self.mask, 0.0, rng.standard_normal((n, self.space.dim)))

    def to_dict(self):
        return {"kind": self.kind, "mask": [bool(b) for b in self.mask]}


@dataclass(frozen=True, eq=False)
class EuclideanBall(ConvexSet):
    """Closed Euclidean ball; only valid in a p = 2 space."""

    space: LpSpace
    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        if self.space.p != 2:
            raise StructuralError(
                "EuclideanBall has a sunny nonexpansive retraction only at p = 2; "
                f"host space has p = {self.space.p}")
        c = self.space.check(np.array(self.center, dtype=float), "center")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise StructuralError("radius must be a positive finite number")
        c = np.array(c, copy=True)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    def retract(self, x):
        x = self.space.check(x)
        d = x - self.center
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        # Points already on the sphere up to rounding are left alone so Q is
        # exactly idempotent.
        out = n > self.radius * (1 + _SPHERE_SLACK)
        scale = self.radius / np.where(out, n, 1.0)
        return np.where(out, self.center + d * scale, x)

    def contains(self, x, tol=0.0):
        d = self.space.check(x) - self.center
        return bool(np.all(np.linalg.norm(d, axis=-1) <= self.radius + tol))

    def sample(self, rng, n):
        d = self.space.dim
        u = rng.standard_normal((n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = self.radius * rng.random((n, 1)) ** (1.0 / d)
        r = np.where(rng.random((n, 1)) < 0.2, self.radius, r)
        return self.center + r * u

    def to_dict(self):
        return {"kind": self.kind, "center": [float(v) for v in self.center],
                "radius": self.radius}


SET_KINDS = ("whole", "box", "orthant", "subspace", "ball")


def set_from_dict(space, d):
    kind = d.get("kind")
    if kind == "whole":
        return WholeSpace(space)
    if kind == "box":
        return Box(space, _decode_bound(d["lower"]), _decode_bound(d["upper"]))
    if kind == "orthant":
        return NonnegativeOrthant(space)
    if kind == "subspace":
        return CoordinateSubspace(space, np.array(d["mask"], dtype=bool))
    if kind == "ball":
        return EuclideanBall(space, np.array(d["center"], dtype=float), d["radius"])
    raise StructuralError(f"unknown set kind {kind!r}")


def retract(cset, x):
    return cset.retract(x)


@dataclass
class RetractionReport:
    """Worst observed violations; ``passed`` compares them against ``tol``."""

    kind: str
    p: float
    trials: int
    tol: float
    characterization_ii: float = 0.0
    characterization_iii: float = 0.0
    nonexpansive: float = 0.0
    sunny: float = 0.0
    idempotence: float = 0.0
    fixes_set: float = 0.0

    @property
    def max_violation(self):
        return max(self.characterization_ii, self.characterization_iii,
                   self.nonexpansive, self.sunny)

    @property
    def passed(self):
        return (self.max_violation <= self.tol and self.idempotence == 0.0
                and self.fixes_set == 0.0)


SUNNY_TS = (0.0, 0.5, 1.0, 2.0, 10.0)


def verify_sunny_nonexpansive(cset, trials=1000, tol=1e-12, rng=None, spread=2.0):
    """Check the retraction of ``cset`` numerically on random samples.

    Reports the largest violations of

    * ``||Qx - Qy||^2 <= [x - y, Qx - Qy]``
    * ``[x - Qx, y - Qx] <= 0`` for y in the set
    * ``||Qx - Qy|| <= ||x - y||``
    * ``Q(Qx + t(x - Qx)) = Qx`` for t in ``SUNNY_TS``

    together with exact idempotence and exact fixing of set points.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng)
    sp = cset.space
    d = sp.dim
    x = spread * rng.standard_normal((trials, d))
    y = spread * rng.standard_normal((trials, d))
    z = cset.sample(rng, trials)
    qx, qy = cset.retract(x), cset.retract(y)
    dq = qx - qy

    rep = RetractionReport(cset.kind, sp.p, trials, tol)
    rep.characterization_ii = _worst(sp.norm(dq) ** 2 - sp.sip(x - y, dq))
    rep.characterization_iii = _worst(sp.sip(x - qx, z - qx))
    rep.nonexpansive = _worst(sp.norm(dq) - sp.norm(x - y))
    for t in SUNNY_TS:
        moved = cset.retract(qx + t * (x - qx))
        rep.sunny = max(rep.sunny, float(np.max(sp.norm(moved - qx))))
    rep.idempotence = float(np.max(np.abs(cset.retract(qx) - qx)))
    rep.fixes_set = float(np.max(np.abs(cset.retract(z) - z)))
    return rep


def _worst(v):
    return max(0.0, float(np.max(v)))
