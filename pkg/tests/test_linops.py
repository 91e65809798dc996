import numpy as np
import pytest

from sspvip import BoundedLinearOp, LpSpace, StructuralError, p_norm_upper_bound


def op(mat, p1=2.0, p2=None):
    mat = np.asarray(mat, dtype=float)
    return BoundedLinearOp(mat, LpSpace(mat.shape[1], p1),
                           LpSpace(mat.shape[0], p1 if p2 is None else p2))


def sampled_norm(mat, p1, p2, rng, n=1000):
    y = rng.standard_normal((n, mat.shape[1]))
    num = np.sum(np.abs(y @ mat.T) ** p2, axis=1) ** (1 / p2)
    den = np.sum(np.abs(y) ** p1, axis=1) ** (1 / p1)
    return np.max(num / den)


def test_apply_examples():
    x = np.array([1.0, 2.0])
    assert np.array_equal(op(np.eye(2)).apply(x), x)
    assert np.array_equal(op([[0, 1], [1, 0]]).apply(x), [2.0, 1.0])
    assert np.array_equal(op(np.zeros((3, 2))).apply(x), np.zeros(3))


def test_apply_is_linear(rng):
    A = op(rng.standard_normal((3, 4)), 3.0)
    x, y = rng.standard_normal((2, 4))
    np.testing.assert_allclose(A(2.5 * x - 1.5 * y), 2.5 * A(x) - 1.5 * A(y), atol=1e-13)


def test_adjoint_hilbert_is_transpose():
    A = op([[0, 1], [1, 0]])
    assert np.array_equal(A.adjoint_apply([1.0, 2.0]), [2.0, 1.0])


@pytest.mark.parametrize("p1,p2", [(2, 2), (3, 3), (4, 2), (2, 4), (3, 4)])
def test_adjoint_of_zero_is_zero(p1, p2, rng):
    A = op(rng.standard_normal((3, 2)), p1, p2)
    assert np.array_equal(A.adjoint_apply(np.zeros(3)), np.zeros(2))


@pytest.mark.parametrize("p1,p2", [(3, 3), (2, 3), (4, 3), (3, 2), (4, 4)])
def test_adjoint_defining_identity(p1, p2, rng):
    for _ in range(200):
        A = op(rng.standard_normal((3, 2)), p1, p2)
        X, Y = A.domain_space, A.codomain_space
        x, y = rng.standard_normal(2), rng.standard_normal(3)
        lhs = Y.sip(A(x), y)
        rhs = X.sip(x, A.adjoint_apply(y))
        assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


@pytest.mark.parametrize("p1,p2", [(2, 2), (3, 3), (4, 2), (2, 4)])
def test_adjoint_norm_bound_and_exact_norm(p1, p2, rng):
    A = op(rng.standard_normal((4, 3)), p1, p2)
    X, Y = A.domain_space, A.codomain_space
    for _ in range(200):
        y = rng.standard_normal(4)
        ay = A.adjoint_apply(y)
        assert X.norm(ay) <= A.norm_upper * Y.norm(y) * (1 + 1e-12)
        exact = X.dual_norm(Y.duality_map(y) @ A.matrix)
        assert X.norm(ay) == pytest.approx(exact, rel=1e-10)


def test_adjoint_is_not_linear_for_p3():
    A = op([[1.0, 2.0], [0.0, 1.0]], 3.0)
    y1, y2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    lhs = A.adjoint_apply(y1 + y2)
    rhs = A.adjoint_apply(y1) + A.adjoint_apply(y2)
    assert np.max(np.abs(lhs - rhs)) > 1e-2


def test_upper_bound_examples(rng):
    for p in (2.0, 3.0, 4.0, 9.0):
        assert p_norm_upper_bound(np.eye(5), p) == 1.0
    assert p_norm_upper_bound(np.diag([2.0, 3.0]), 2.0) == pytest.approx(3.0, rel=1e-15)
    for _ in range(20):
        mat = rng.standard_normal((4, 4))
        assert p_norm_upper_bound(mat, 3.0) >= sampled_norm(mat, 3.0, 3.0, rng)


@pytest.mark.parametrize("p1,p2", [(2, 3), (3, 2), (4, 2), (2, 4), (3, 3)])
@pytest.mark.parametrize("shape", [(1, 5), (5, 1), (4, 6), (6, 4)])
def test_upper_bound_dominates_sampled_and_power_estimates(p1, p2, shape, rng):
    A = op(rng.standard_normal(shape), p1, p2)
    assert A.norm_upper >= sampled_norm(A.matrix, p1, p2, rng)
    assert A.norm_lower <= A.norm_upper


def test_lower_estimate_examples():
    assert op(np.eye(3), 3.0).norm_lower == pytest.approx(1.0, abs=1e-12)
    assert op(np.diag([2.0, 3.0])).norm_lower >= 3 - 1e-6
    assert op(np.zeros((2, 3)), 4.0).norm_lower == 0.0
    assert op(np.zeros((2, 3)), 4.0).norm_upper == 0.0


def test_power_iteration_improves_on_sampling(rng):
    from sspvip import p_norm_lower_estimate
    A = op(rng.standard_normal((8, 8)), 4.0)
    assert p_norm_lower_estimate(A, samples=1) >= sampled_norm(A.matrix, 4, 4, rng, 5) * 0.999


def test_structural_errors():
    with pytest.raises(StructuralError):
        BoundedLinearOp(np.ones((2, 3)), LpSpace(2), LpSpace(2))
    with pytest.raises(StructuralError):
        BoundedLinearOp(np.array([[np.nan]]), LpSpace(1), LpSpace(1))
    A = op(np.ones((2, 3)))
    with pytest.raises(StructuralError):
        A.apply(np.ones(2))
    with pytest.raises(StructuralError):
        A.adjoint_apply(np.ones(3))
