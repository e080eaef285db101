import math

import numpy as np
import pytest
from scipy.linalg import expm

from geobound import jacobi


def test_constant_positive_is_sinh():
    s = jacobi.solve_jacobi(jacobi.constant(1.0), 2.0)
    assert s.j[-1] == pytest.approx(math.sinh(2.0), abs=1e-8)
    assert s.stuck_at is None


def test_zero_is_linear():
    s = jacobi.solve_jacobi(jacobi.constant(0.0), 3.0)
    np.testing.assert_allclose(s.j, s.t, atol=1e-14)


def test_negative_sticks_at_pi():
    s = jacobi.solve_jacobi(jacobi.constant(-1.0), 5.0)
    assert s.stuck_at == pytest.approx(math.pi, abs=1e-6)
    after = s.t > s.stuck_at
    assert np.all(s.j[after] == 0.0) and np.all(s.jp[after] == 0.0)


def test_average_pair_values():
    av = jacobi.average_pair(jacobi.constant(1.0), jacobi.constant(0.0))
    assert av(0.3) == 0.5
    s = jacobi.KappaSchedule(np.sin, "sin")
    m = jacobi.KappaSchedule(lambda t: -np.sin(t), "-sin")
    ts = np.linspace(0, 10, 101)
    assert np.all(jacobi.average_pair(s, m)(ts) == 0)


def test_pair_product_at_one():
    t = 1.0
    j_av = math.sinh(math.sqrt(2) * t) / math.sqrt(2)
    j1, j2 = math.sinh(2 * t) / 2, t
    sav = jacobi.solve_jacobi(jacobi.average_pair(jacobi.constant(4), jacobi.constant(0)), t)
    s1 = jacobi.solve_jacobi(jacobi.constant(4), t)
    s2 = jacobi.solve_jacobi(jacobi.constant(0), t)
    assert sav.j[-1] == pytest.approx(j_av, rel=1e-10)
    assert s1.j[-1] * s2.j[-1] == pytest.approx(j1 * j2, rel=1e-10)
    assert sav.j[-1] ** 2 >= s1.j[-1] * s2.j[-1]


def test_lemma_random_pairs():
    rng = np.random.default_rng(7)
    A = jacobi.FourierBatch(rng, 200)
    B = jacobi.FourierBatch(rng, 200)
    rm, pm, events = jacobi.lemma_margins_batch(A, B, 3.0)
    assert rm.min() >= -1e-10 and pm.min() >= -1e-10
    assert events == []


def test_lemma_equal_schedules_are_tight():
    k = jacobi.KappaSchedule(lambda t: 1 + 0.5 * np.sin(3 * t), "k")
    res = jacobi.multiplicative_lemma_check(k, k, 2.0)
    ok_ratio, ok_prod, margin = res
    assert ok_ratio and ok_prod
    assert abs(margin) < 1e-10


def test_lemma_sign_changing_with_sticks():
    res = jacobi.multiplicative_lemma_check(jacobi.constant(-1.0), jacobi.constant(3.0), 5.0)
    assert res.ratio_ok and res.product_ok


@pytest.mark.parametrize("k1,k2", [(4.0, 0.0), (2.0, -1.0), (3.0, 1.0)])
def test_taylor_coefficient_constants(k1, k2):
    fit, pred = jacobi.taylor_coefficient(jacobi.constant(k1), jacobi.constant(k2))
    assert fit == pytest.approx(pred, rel=0.05)


def test_taylor_coefficient_fourier():
    fb = jacobi.FourierBatch(np.random.default_rng(1), 2)
    fit, pred = jacobi.taylor_coefficient(fb.schedule(0), fb.schedule(1))
    assert fit == pytest.approx(pred, rel=0.05)


def test_multi_average_monotone():
    ks = [jacobi.constant(4), jacobi.constant(1), jacobi.constant(1)]
    mono, prods = jacobi.multi_average_check(ks, 1.0, dt=2e-3, seed=3)
    assert mono
    limit = (math.sinh(math.sqrt(2)) / math.sqrt(2)) ** 3
    assert prods[-1] == pytest.approx(limit, rel=1e-6)


def test_multi_average_equal_unchanged():
    ks = [jacobi.constant(2)] * 3
    mono, prods = jacobi.multi_average_check(ks, 1.0, dt=2e-3)
    assert mono
    assert np.ptp(prods) == 0.0


def test_full_average_beats_original():
    t = 2.0
    orig = (math.sinh(3 * t) / 3) * t * t
    avg = (math.sinh(math.sqrt(3) * t) / math.sqrt(3)) ** 3
    assert avg >= orig
    got = [jacobi.solve_jacobi(jacobi.constant(k), t).j[-1] for k in (9, 0, 0)]
    assert np.prod(got) == pytest.approx(orig, rel=1e-8)


def test_multi_average_needs_three():
    with pytest.raises(ValueError):
        jacobi.multi_average_check([jacobi.constant(1)] * 2, 1.0)


# ------------------------------------------------------------------ shuffling


def _propagator(k, h):
    return expm(np.array([[0.0, 1.0], [k, 0.0]]) * h)


def test_shuffle_matches_matrix_product():
    k1, k2, delta, t_end = 2.0, -0.5, 0.1, 1.0
    y = np.array([0.0, 1.0])
    for i in range(10):
        y = _propagator(k1 if i % 2 == 0 else k2, delta) @ y
    s = jacobi.shuffle_evolve(jacobi.constant(k1), jacobi.constant(k2), delta, t_end)
    assert s.j[-1] == pytest.approx(y[0], rel=1e-10)


def test_shuffle_equal_schedules():
    k = jacobi.KappaSchedule(lambda t: 1 + np.cos(t), "k")
    ref = jacobi.solve_jacobi(k, 2.0)
    for delta in (0.3, 0.01):
        s = jacobi.shuffle_evolve(k, k, delta, 2.0)
        assert s.j[-1] == pytest.approx(ref.j[-1], rel=1e-10)


def test_shuffle_close_to_average():
    s = jacobi.shuffle_evolve(jacobi.constant(2), jacobi.constant(0), 1e-3, 2.0)
    ref = math.sinh(2.0)
    assert abs(s.j[-1] - ref) < 1e-2 * ref


def test_shuffle_rejects_bad_delta():
    with pytest.raises(ValueError):
        jacobi.shuffle_evolve(jacobi.constant(1), jacobi.constant(0), 0.0, 1.0)


def test_shuffle_convergence_is_second_order():
    """Alternating equal-width intervals is a symmetric splitting up to a conjugation,
    and the boundary half-steps do not move j started from (0, 1); the error is O(delta^2)."""
    errs, slope, ref = jacobi.shuffle_convergence(jacobi.constant(4), jacobi.constant(0),
                                                  [1e-1, 1e-2, 1e-3], 2.0)
    assert ref == pytest.approx(math.sinh(2 * math.sqrt(2)) / math.sqrt(2), rel=1e-9)
    assert np.all(np.diff(errs) < 0)
    assert slope == pytest.approx(2.0, abs=0.1)
    # leading constant from a matrix-product oracle at the coarsest delta
    y = np.array([0.0, 1.0])
    for i in range(20):
        y = _propagator(4.0 if i % 2 == 0 else 0.0, 0.1) @ y
    assert errs[0] == pytest.approx(abs(y[0] - ref), rel=1e-6)
