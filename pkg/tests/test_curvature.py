import math

import numpy as np
import pytest

from geobound import catalog
from geobound.curvature import (DirectionField, christoffel, riemann_ricci, scan_directions,
                                sectional_spectrum, tidal, tidal_derivative)
from geobound.errors import NonUnitDirection, SingularMetric
from geobound.metric import MetricSpec, normalize, sphere_array

import sym_oracle
from conftest import euclidean, polar_hyperbolic3

NONPOS = [("h2xh2", {}), ("squashed-h3", {"c": 2.0}), ("hd", {"d": 4}), ("h2n", {"n": 3}),
          ("squashed-h3", {"c": 5.0})]


# --------------------------------------------------------------- Christoffel


def test_flat_christoffel_zero():
    assert np.all(christoffel(euclidean(3), np.zeros(3)) == 0)


def test_polar_hyperbolic_christoffel():
    gam = christoffel(polar_hyperbolic3(), [1.0, math.pi / 2, 0.0])
    assert gam[0, 1, 1] == pytest.approx(-math.sinh(1) * math.cosh(1), rel=1e-8)
    np.testing.assert_allclose(gam, gam.transpose(0, 2, 1), atol=1e-14)


@pytest.mark.parametrize("z", [0.0, 0.3, -0.5])
def test_squashed_christoffel_zxx(z):
    c = 2.0
    gam = christoffel(catalog.get("squashed-h3", c=c).spec, [0.0, 0.0, z])
    assert gam[2, 0, 0] == pytest.approx(-c * math.exp(2 * c * z), rel=1e-13)


def test_singular_metric_rejected():
    spec = MetricSpec(dim=2, components=lambda p: np.diag([1.0, 1e-14]))
    with pytest.raises(SingularMetric):
        christoffel(spec, np.zeros(2))


# ------------------------------------------------------------------ Riemann


@pytest.mark.parametrize("p", [np.zeros(3), np.array([0.2, -0.1, 0.4])])
def test_riemann_matches_symbolic(p):
    spec = catalog.get("squashed-h3", c=2.0).spec
    cd = riemann_ricci(spec, p)
    g, _, Rl = sym_oracle.squashed(2.0).at(p)
    np.testing.assert_allclose(np.einsum("af,fbcd->abcd", g, cd.riemann), Rl, atol=1e-10)


def test_riemann_symmetries(squashed2):
    cd = riemann_ricci(squashed2.spec, np.array([0.1, 0.2, 0.3]))
    g = squashed2.spec.components(cd.at)
    R = np.einsum("af,fbcd->abcd", g, cd.riemann)
    np.testing.assert_allclose(R, -R.transpose(1, 0, 2, 3), atol=1e-8)
    np.testing.assert_allclose(R, -R.transpose(0, 1, 3, 2), atol=1e-8)
    np.testing.assert_allclose(R, R.transpose(2, 3, 0, 1), atol=1e-8)
    cyc = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
    assert np.max(np.abs(cyc)) < 1e-8


def test_product_ricci_is_minus_g(h2xh2, rng):
    cd = riemann_ricci(h2xh2.spec, h2xh2.spec.base_point)
    g = h2xh2.spec.components(h2xh2.spec.base_point)
    for X in sphere_array(g, 40):
        assert X @ cd.ricci @ X == pytest.approx(-1.0, abs=1e-12)


def test_hyperbolic_radial_ricci():
    for d in (3, 4, 5):
        e = catalog.get("hd-polar", d=d)
        ric = riemann_ricci(e.spec, e.spec.base_point).ricci
        assert ric[0, 0] == pytest.approx(-(d - 1), abs=1e-12)


def test_squashed_x_ricci():
    for c in (1.0, 2.0, 3.0):
        e = catalog.get("squashed-h3", c=c)
        ric = riemann_ricci(e.spec, e.spec.base_point).ricci
        assert ric[0, 0] == pytest.approx(-c * (1 + c), rel=1e-13)


def test_fd_route_matches_jet_route(squashed2):
    bare = MetricSpec(dim=3, components=squashed2.spec.components)
    a = riemann_ricci(squashed2.spec, np.zeros(3)).riemann
    b = riemann_ricci(bare, np.zeros(3)).riemann
    np.testing.assert_allclose(b, a, atol=1e-6)


# -------------------------------------------------------------------- tidal


def test_product_diagonal_w2(h2xh2):
    X = h2xh2.direction("diag")
    assert tidal(h2xh2.spec, h2xh2.spec.base_point, X).w2 == pytest.approx(1 / 6, abs=1e-12)


@pytest.mark.parametrize("psi", [0.0, 0.3, 0.9, math.pi / 2])
def test_product_w2_angle_family(h2xh2, psi):
    X = h2xh2.direction(f"psi={psi}")
    val = tidal(h2xh2.spec, h2xh2.spec.base_point, X, with_derivative=False).w2
    assert val == pytest.approx(1 / 6 + 0.5 * math.cos(2 * psi) ** 2, abs=1e-12)


def test_hyperbolic_w_vanishes(rng):
    e = catalog.get("hd", d=5)
    g = e.spec.components(e.spec.base_point)
    for _ in range(10):
        X = normalize(g, rng.normal(size=5))
        td = tidal(e.spec, e.spec.base_point, X)
        assert np.max(np.abs(td.w)) < 1e-12
        assert td.wprime2 < 1e-12


@pytest.mark.parametrize("c", [1.5, 2.0, 4.0])
def test_squashed_x_w2(c):
    e = catalog.get("squashed-h3", c=c)
    td = tidal(e.spec, e.spec.base_point, e.direction("x"))
    assert td.w2 == pytest.approx(0.5 * c * c * (c - 1) ** 2, rel=1e-12)
    assert td.wprime2 < 1e-12


def test_non_unit_direction_rejected(h2xh2):
    with pytest.raises(NonUnitDirection):
        tidal(h2xh2.spec, h2xh2.spec.base_point, np.array([1.0, 0, 1e-7, 0]) * 1.001)


def test_product_wprime_zero(h2xh2):
    Wp = tidal_derivative(h2xh2.spec, h2xh2.spec.base_point, h2xh2.direction("diag"))
    assert np.max(np.abs(Wp)) < 1e-7


@pytest.mark.parametrize("c", [1.5, 2.0, 3.0])
def test_squashed_wprime_max_direction(c):
    e = catalog.get("squashed-h3", c=c)
    X = e.direction(f"psi=0,phi={math.pi / 4}")
    td = tidal(e.spec, e.spec.base_point, X)
    assert td.wprime2 == pytest.approx(2 * (c - 1) ** 2 * c * c, rel=1e-6)
    W = td.w_prime
    np.testing.assert_allclose(W, W.T, atol=1e-8)
    assert np.max(np.abs(W @ X)) < 1e-7


def test_tidal_scalars_match_symbolic(squashed2, rng):
    sym = sym_oracle.squashed(2.0)
    g = squashed2.spec.components(np.zeros(3))
    F = DirectionField(squashed2.spec)
    for _ in range(8):
        X = normalize(g, rng.normal(size=3))
        want = sym.tidal(np.zeros(3), X)
        td = tidal(squashed2.spec, np.zeros(3), X)
        np.testing.assert_allclose([td.r2, td.w2, td.wprime2], want, rtol=1e-6, atol=1e-8)
        got = np.ravel(F.values(F.to_unit(X)))
        np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-9)


def test_direction_field_gradients_match_fd(squashed2, rng):
    F = DirectionField(squashed2.spec)
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    for f, grad in ((F.r2, F.grad_r2), (F.w2, F.grad_w2), (F.wprime2, F.grad_wprime2)):
        G = grad(u)[0]
        # tangential derivative along two orthonormal tangent vectors
        T = np.linalg.svd(np.eye(3) - np.outer(u, u))[0][:, :2]
        for t in T.T:
            h = 1e-6
            num = (f(np.cos(h) * u + np.sin(h) * t)[0] - f(np.cos(h) * u - np.sin(h) * t)[0]) / (2 * h)
            assert G @ t == pytest.approx(num, abs=1e-6 * max(1.0, abs(num)))


# --------------------------------------------------------- spectrum / invariants


def test_spectrum_single_plane(h2xh2):
    s = sectional_spectrum(h2xh2.spec, h2xh2.spec.base_point, h2xh2.direction("plane"))
    np.testing.assert_allclose(s, [1, 0, 0], atol=1e-12)


def test_spectrum_diagonal(h2xh2):
    s = sectional_spectrum(h2xh2.spec, h2xh2.spec.base_point, h2xh2.direction("diag"))
    np.testing.assert_allclose(s, [0.5, 0.5, 0], atol=1e-12)


def test_spectrum_hyperbolic():
    e = catalog.get("hd", d=5)
    s = sectional_spectrum(e.spec, e.spec.base_point, e.direction("e2"))
    np.testing.assert_allclose(s, np.ones(4), atol=1e-12)


@pytest.mark.parametrize("name,params", NONPOS)
def test_tidal_invariants_random_directions(name, params):
    e = catalog.get(name, params)
    p = e.spec.base_point
    g = e.spec.components(p)
    gi = np.linalg.inv(g)
    ric = riemann_ricci(e.spec, p).ricci
    rng = np.random.default_rng(7)
    for _ in range(200):
        X = normalize(g, rng.normal(size=e.dim))
        td = tidal(e.spec, p, X, with_derivative=False)
        assert np.max(np.abs(td.w @ X)) < 1e-8
        assert abs(np.einsum("ab,ab->", gi, td.w)) < 1e-8
        assert np.einsum("ab,ab->", gi, td.kappa) == pytest.approx(-X @ ric @ X, abs=1e-8)
        s = sectional_spectrum(e.spec, p, X)
        assert s.min() >= -1e-10
        assert s.sum() == pytest.approx(-X @ ric @ X, abs=1e-8)


# -------------------------------------------------------------------- scans


def test_scan_product(h2xh2):
    sc = scan_directions(h2xh2.spec)
    assert sc.r2_max == pytest.approx(1, abs=1e-12)
    assert sc.r2_min == pytest.approx(1, abs=1e-12)
    assert sc.w2_min == pytest.approx(1 / 6, abs=1e-12)
    assert sc.wprime2_max < 1e-12


def test_scan_squashed(squashed2):
    sc = scan_directions(squashed2.spec)
    assert sc.r2_max == pytest.approx(6, rel=1e-12)
    assert sc.r2_min == pytest.approx(3, rel=1e-12)
    assert sc.wprime2_max == pytest.approx(8, rel=1e-8)


@pytest.mark.parametrize("name,params", [("h2xh2", {}), ("squashed-h3", {"c": 2.0}), ("h2n", {"n": 3})])
def test_scan_converged_in_resolution(name, params):
    e = catalog.get(name, params)
    d = e.dim
    F = DirectionField(e.spec)
    a = scan_directions(e.spec, n=16 * d * d, dfield=F)
    b = scan_directions(e.spec, n=32 * d * d, dfield=F)
    for key in ("r2_max", "r2_min", "w2_min", "wprime2_max"):
        assert abs(getattr(a, key) - getattr(b, key)) < 1e-6


def test_scan_resolution_floor(h2xh2):
    with pytest.raises(ValueError):
        scan_directions(h2xh2.spec, n=10)


def test_flat_scan_is_zero():
    sc = scan_directions(catalog.get("flat", d=3).spec)
    assert sc.r2_max == 0 and sc.w2_min == 0 and sc.wprime2_max == 0
