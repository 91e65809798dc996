"""Dense linear operators between lp spaces and their generalized adjoints."""

from dataclasses import dataclass, field

import numpy as np

from .lp_space import LpSpace, StructuralError


def _row_holder_bound(a, p_dom, p_cod):
    # ||Ax||_r <= (sum_i ||a_i||_{q}^r)^(1/r) with q conjugate to p_dom (Holder per row).
    q = p_dom / (p_dom - 1.0)
    rows = np.sum(np.abs(a) ** q, axis=1) ** (1.0 / q)
    return float(np.sum(rows ** p_cod) ** (1.0 / p_cod))


def _same_p_bound(a, p):
    # Riesz-Thorin between the column-sum (l1) and row-sum (l_inf) norms.
    n1 = np.max(np.sum(np.abs(a), axis=0))
    ninf = np.max(np.sum(np.abs(a), axis=1))
    if n1 == 0 or ninf == 0:
        return 0.0
    return float(n1 ** (1.0 / p) * ninf ** (1.0 - 1.0 / p))


def p_norm_upper_bound(matrix, p_dom, p_cod=None):
    """Certified upper bound on ``||A||`` from l^p_dom to l^p_cod.

    Takes the smallest of several rigorous bounds: Riesz-Thorin
    interpolation, a row-wise Holder bound, identity-embedding bounds when
    the exponents differ, and the spectral norm at p = 2.
    """
    a = np.asarray(matrix, dtype=float)
    if p_cod is None:
        p_cod = p_dom
    if a.size == 0 or not np.any(a):
        return 0.0
    m, n = a.shape
    nz = a != 0
    if p_dom == p_cod and np.all(nz.sum(axis=0) <= 1) and np.all(nz.sum(axis=1) <= 1):
        # Scaled partial permutation: the norm is max |a_ij| exactly.
        return float(np.max(np.abs(a)))
    bounds = [_row_holder_bound(a, p_dom, p_cod)]
    if p_dom == p_cod:
        bounds.append(_same_p_bound(a, p_dom))
        if p_dom == 2:
            bounds.append(float(np.linalg.norm(a, 2)))
    else:
        # ||x||_s <= k^(1/s - 1/r) ||x||_r on R^k for s <= r.
        def embed(k, s, r):
            return 1.0 if s >= r else k ** (1.0 / s - 1.0 / r)

        # A: l^p_dom -> l^p_dom then embed into l^p_cod on the codomain.
        bounds.append(_same_p_bound(a, p_dom) * embed(m, p_cod, p_dom))
        # Embed domain into l^p_cod first, then A: l^p_cod -> l^p_cod.
        bounds.append(_same_p_bound(a, p_cod) * embed(n, p_cod, p_dom))
    # Cover the rounding error of the bound computations themselves.
    return min(bounds) * (1.0 + 16.0 * np.finfo(float).eps * (m + n))


@dataclass(frozen=True, eq=False)
class BoundedLinearOp:
    """Dense matrix ``A`` mapping ``domain_space`` into ``codomain_space``.

    ``norm_upper`` is a certified bound on the operator norm; ``norm_lower``
    an empirical estimate from sampling and a power iteration.
    """

    matrix: np.ndarray
    domain_space: LpSpace
    codomain_space: LpSpace
    norm_upper: float = field(init=False)
    norm_lower: float = field(init=False)
    lower_samples: int = field(default=64, repr=False)

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        shape = (self.codomain_space.dim, self.domain_space.dim)
        if a.shape != shape:
            raise StructuralError(f"matrix has shape {a.shape}, expected {shape}")
        if not np.all(np.isfinite(a)):
            raise StructuralError("matrix contains non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        upper = p_norm_upper_bound(a, self.domain_space.p, self.codomain_space.p)
        object.__setattr__(self, "norm_upper", upper)
        lower = p_norm_lower_estimate(self, self.lower_samples)
        object.__setattr__(self, "norm_lower", min(lower, upper))

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        x = self.domain_space.check(x)
        return x @ self.matrix.T

    __call__ = apply

    def adjoint_apply(self, y):
        """Generalized adjoint ``A+ y = J_X^{-1}(A^T J_Y(y))``.

        Satisfies ``[Ax, y]_Y = [x, A+ y]_X`` for every x. Not linear unless
        both spaces are Hilbert, where it is the transpose.
        """
        u = self.codomain_space.duality_map(y) @ self.matrix
        return self.domain_space.inverse_duality_map(u)

    generalized_adjoint_apply = adjoint_apply


def p_norm_lower_estimate(op, samples=64, iters=50, rng=None):
    """Empirical lower estimate of ``||A||`` (never above the true norm).

    Random sampling plus Boyd's fixed-point iteration
    ``x <- A+(A x) / ||A+(A x)||``, which increases ``||Ax|| / ||x||``
    monotonically.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    a = op.matrix
    if not np.any(a):
        return 0.0
    X, Y = op.domain_space, op.codomain_space
    rng = np.random.default_rng(0 if rng is None else rng)
    cand = rng.standard_normal((samples, X.dim))
    cand = np.vstack([np.eye(X.dim), cand])
    ratios = Y.norm(cand @ a.T) / X.norm(cand)
    best = float(np.max(ratios))
    x = cand[int(np.argmax(ratios))]
    x = x / X.norm(x)
    for _ in range(iters):
        ax = a @ x
        if not np.any(ax):
            break
        z = op.adjoint_apply(ax)
        nz = X.norm(z)
        if nz == 0:
            break
        x_new = z / nz
        r = float(Y.norm(a @ x_new))
        if r <= best * (1 + 1e-15):
            best = max(best, r)
            break
        best, x = r, x_new
    return best
