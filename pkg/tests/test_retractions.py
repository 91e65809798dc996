import numpy as np
import pytest

from sspvip import (Box, CoordinateSubspace, EuclideanBall, LpSpace,
                    NonnegativeOrthant, StructuralError, WholeSpace, retract,
                    verify_sunny_nonexpansive)
from sspvip.retractions import set_from_dict


def catalog(p, dim=4, rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    sp = LpSpace(dim, p)
    sets = [WholeSpace(sp),
            Box(sp, -rng.random(dim), rng.random(dim)),
            Box(sp, [-np.inf, 0.0, -1.0, 0.5][:dim] + [0.0] * (dim - 4),
                [1.0, np.inf, np.inf, 0.5][:dim] + [1.0] * (dim - 4)),
            NonnegativeOrthant(sp),
            CoordinateSubspace(sp, [True, False] * (dim // 2) + [False] * (dim % 2))]
    if p == 2:
        sets.append(EuclideanBall(sp, rng.standard_normal(dim), 1.5))
    return sets


def test_box_clip_example():
    box = Box(LpSpace(2, 2), [0.0, 0.0], [1.0, 1.0])
    assert np.array_equal(retract(box, [2.0, -3.0]), [1.0, 0.0])
    assert np.array_equal(box.retract([0.25, 1.0]), [0.25, 1.0])


def test_each_variant_realization():
    sp = LpSpace(3, 3)
    x = np.array([-1.0, 2.0, 0.5])
    assert np.array_equal(WholeSpace(sp).retract(x), x)
    assert np.array_equal(NonnegativeOrthant(sp).retract(x), [0.0, 2.0, 0.5])
    assert np.array_equal(CoordinateSubspace(sp, [False, True, False]).retract(x),
                          [-1.0, 0.0, 0.5])
    ball = EuclideanBall(LpSpace(2, 2), [0.0, 0.0], 1.0)
    np.testing.assert_allclose(ball.retract([3.0, 4.0]), [0.6, 0.8], rtol=1e-15)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_box_characterization_iii_p3_style(p, rng):
    sp = LpSpace(2, p)
    box = Box(sp, [0.0, 0.0], [1.0, 1.0])
    x = 3 * rng.standard_normal((1000, 2))
    y = rng.random((1000, 2))
    qx = box.retract(x)
    assert np.max(sp.sip(x - qx, y - qx)) <= 1e-12


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0, 6.0])
def test_catalog_is_sunny_nonexpansive(p, rng):
    for cset in catalog(p, 6, rng):
        rep = verify_sunny_nonexpansive(cset, trials=1000, tol=1e-12, rng=rng)
        assert rep.passed, rep


def test_whole_space_report_is_clean():
    rep = verify_sunny_nonexpansive(WholeSpace(LpSpace(3, 3)), trials=200, rng=1)
    assert rep.max_violation <= 1e-12
    assert rep.idempotence == 0 and rep.fixes_set == 0


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_idempotent_and_fixes_set_exactly(p, rng):
    for cset in catalog(p, 5, rng):
        x = 4 * rng.standard_normal((300, 5))
        q = cset.retract(x)
        assert np.array_equal(cset.retract(q), q)
        z = cset.sample(rng, 300)
        assert np.array_equal(cset.retract(z), z)
        assert cset.contains(q, 1e-12)


def test_radial_retraction_fails_off_hilbert():
    # Why the ball is restricted to p = 2: radial retraction onto the l2 ball
    # viewed in l4 breaks the characterization [x - Qx, y - Qx] <= 0.
    sp = LpSpace(2, 4)
    x = np.array([3.0, 1.0])
    qx = x / np.linalg.norm(x)
    ys = np.stack([np.cos(t) * np.array([1, 0]) + np.sin(t) * np.array([0, 1])
                   for t in np.linspace(0, 2 * np.pi, 400)])
    assert np.max(sp.sip(x - qx, ys - qx)) > 1e-3
    with pytest.raises(StructuralError):
        EuclideanBall(sp, [0.0, 0.0], 1.0)


def test_malformed_sets_rejected():
    sp = LpSpace(2, 2)
    with pytest.raises(StructuralError):
        Box(sp, [1.0, 0.0], [0.0, 1.0])
    with pytest.raises(StructuralError):
        Box(sp, [0.0], [1.0])
    with pytest.raises(StructuralError):
        Box(sp, [np.inf, 0.0], [np.inf, 1.0])
    with pytest.raises(StructuralError):
        CoordinateSubspace(sp, [True])
    with pytest.raises(StructuralError):
        EuclideanBall(sp, [0.0, 0.0], -1.0)
    with pytest.raises(StructuralError):
        Box(sp, [0.0, 0.0], [1.0, 1.0]).retract([1.0, 2.0, 3.0])
    with pytest.raises(StructuralError):
        set_from_dict(sp, {"kind": "simplex"})


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_dict_round_trip(p):
    for cset in catalog(p, 4):
        back = set_from_dict(cset.space, cset.to_dict())
        x = np.array([5.0, -5.0, 0.3, 2.0])
        assert np.array_equal(back.retract(x), cset.retract(x))
        assert back.to_dict() == cset.to_dict()
