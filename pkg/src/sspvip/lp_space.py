"""Finite-dimensional real lp spaces with the Giles semi-inner product.

All vector arguments may carry leading batch axes; the coordinate axis is
always the last one.
"""

from dataclasses import dataclass, field

import numpy as np


class StructuralError(ValueError):
    """Raised on dimension mismatches, non-finite input or ill-formed data."""


def _as_vector(x, dim, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != dim:
        raise StructuralError(
            f"{name} has shape {x.shape}, expected trailing dimension {dim}")
    if not np.all(np.isfinite(x)):
        raise StructuralError(f"{name} contains non-finite entries")
    return x


def _signed_power(w, e):
    # w * |w|**e with 0 -> 0, valid for negative e as well.
    a = np.abs(w)
    nz = a > 0
    out = np.zeros_like(w)
    np.power(a, e, out=out, where=nz)
    return w * out


def _pnorm(x, p):
    scale = np.max(np.abs(x), axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    s = np.sum((np.abs(x) / safe) ** p, axis=-1) ** (1.0 / p)
    return np.squeeze(scale, -1) * s


def _duality(y, p):
    if p == 2:
        return np.array(y, dtype=float, copy=True)
    n = _pnorm(y, p)[..., None]
    safe = np.where(n > 0, n, 1.0)
    return np.where(n > 0, n * _signed_power(y / safe, p - 2.0), 0.0)


@dataclass(frozen=True)
class LpSpace:
    """Real lp space of dimension ``dim`` with exponent ``p >= 2``.

    ``c`` is the constant of smoothness ``p - 1`` appearing in
    ``||x + y||^2 <= ||x||^2 + 2 [y, x] + c ||y||^2``.
    """

    dim: int
    p: float = 2.0
    c: float = field(init=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise StructuralError(f"dim must be a positive integer, got {self.dim}")
        p = float(self.p)
        if not np.isfinite(p) or p < 2:
            raise StructuralError(
                f"exponent p={self.p} not supported; need 2 <= p < inf")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "c", p - 1.0)

    @property
    def q(self):
        """Conjugate exponent p / (p - 1)."""
        return self.p / (self.p - 1.0)

    def check(self, x, name="x"):
        """Return ``x`` as a float array after shape and finiteness checks."""
        return _as_vector(x, self.dim, name)

    def zeros(self):
        return np.zeros(self.dim)

    def norm(self, x):
        """(sum |x_i|^p)^(1/p), computed with max-scaling."""
        return _pnorm(self.check(x), self.p)

    def dual_norm(self, u):
        """Norm of the dual space lq."""
        u = self.check(u, "u")
        return _pnorm(u, self.q)

    def sip(self, x, y):
        """Giles semi-inner product ``[x, y]``; ``[x, 0] = 0``.

        Linear in ``x``; in ``y`` only positively homogeneous.
        """
        x = self.check(x)
        y = self.check(y, "y")
        if self.p == 2:
            return np.sum(x * y, axis=-1)
        return np.sum(x * _duality(y, self.p), axis=-1)

    def duality_map(self, y):
        """Normalized duality mapping J(y) in dual (lq) coordinates.

        ``<y, J(y)> = ||y||_p^2`` and ``||J(y)||_q = ||y||_p``. Identity at p = 2.
        """
        return _duality(self.check(y, "y"), self.p)

    def inverse_duality_map(self, u):
        """Inverse of :meth:`duality_map`, i.e. the duality map of lq."""
        u = self.check(u, "u")
        if self.p == 2:
            return np.array(u, copy=True)
        return _duality(u, self.q)
