import math

import numpy as np
import pytest

from geobound import catalog
from geobound.errors import NonFiniteMetric, StepTooSmall
from geobound.metric import (MetricSpec, fd_jet, fd_metric_derivs, jet_at, metric_at, metric_derivs,
                             normalize, sphere_array, sphere_directions)

from conftest import euclidean, polar_hyperbolic3


def test_product_polar_metric_at_reference_point():
    e = catalog.get("h2xh2-polar")
    s = math.sinh(1.0) ** 2
    np.testing.assert_allclose(metric_at(e.spec, [1, 0, 1, 0]), np.diag([1, s, 1, s]), rtol=1e-14)


def test_euclidean_metric_is_identity():
    assert np.array_equal(metric_at(euclidean(3), [4.0, -2.0, 7.0]), np.eye(3))


def test_squashed_metric_components():
    e = catalog.get("squashed-h3", c=2.0)
    np.testing.assert_allclose(metric_at(e.spec, [0, 0, 1]), np.diag([math.e ** 4, math.e ** 2, 1.0]),
                               rtol=1e-14)


def test_nonfinite_metric_rejected():
    bad = MetricSpec(dim=2, components=lambda p: np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(NonFiniteMetric):
        metric_at(bad, [0, 0])


def test_euclidean_derivs_vanish():
    assert np.all(fd_metric_derivs(euclidean(4), np.zeros(4)) == 0)


def test_polar_angular_derivative_matches_analytic():
    dg = metric_derivs(polar_hyperbolic3(), [1.0, math.pi / 2, 0.0])
    assert dg[0, 1, 1] == pytest.approx(2 * math.sinh(1) * math.cosh(1), rel=1e-9)


def test_squashed_dz_gxx_at_origin():
    for c in (1.0, 2.0, 3.5):
        spec = catalog.get("squashed-h3", c=c).spec
        fd = fd_metric_derivs(spec, np.zeros(3))
        assert fd[2, 0, 0] == pytest.approx(2 * c, rel=1e-9)
        assert metric_derivs(spec, np.zeros(3))[2, 0, 0] == pytest.approx(2 * c, rel=1e-14)


def test_fd_jet_agrees_with_analytic_jet():
    spec = catalog.get("squashed-h3", c=2.0).spec
    p = np.array([0.1, -0.2, 0.3])
    g, dg, d2g = jet_at(spec, p)
    bare = MetricSpec(dim=3, components=spec.components)
    g2, dg2, d2g2 = fd_jet(bare, p)
    np.testing.assert_allclose(g2, g, rtol=1e-14)
    np.testing.assert_allclose(dg2, dg, rtol=1e-8, atol=1e-9)
    np.testing.assert_allclose(d2g2, d2g, rtol=1e-6, atol=1e-6)


def test_tiny_step_reports_roundoff():
    spec = catalog.get("squashed-h3", c=2.0).spec
    bare = MetricSpec(dim=3, components=spec.components)
    with pytest.raises(StepTooSmall):
        fd_metric_derivs(bare, np.zeros(3), h=1e-15)


def test_circle_directions_are_the_axes():
    X = sphere_array(np.eye(2), 4)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-15)
    angles = np.sort(np.mod(np.arctan2(X[:, 1], X[:, 0]), 2 * np.pi))
    np.testing.assert_allclose(np.diff(angles), np.pi / 2, atol=1e-14)


def test_sphere_unit_norms_identity():
    dirs = sphere_directions(np.eye(4), 400)
    assert len(dirs) == 400
    norms = np.array([np.linalg.norm(v.comps) for v in dirs])
    assert np.max(np.abs(norms - 1)) < 1e-12


def test_sphere_unit_norms_anisotropic():
    g = np.diag([4.0, 1, 1, 1])
    X = sphere_array(g, 400)
    np.testing.assert_allclose(np.einsum("na,ab,nb->n", X, g, X), 1.0, atol=1e-12)
    assert np.max(np.abs(X[:, 0])) <= 0.5 + 1e-15


def test_sphere_grid_is_deterministic():
    assert np.array_equal(sphere_array(np.eye(3), 100), sphere_array(np.eye(3), 100))


def test_normalize():
    g = np.diag([2.0, 3.0])
    X = normalize(g, [1.0, 1.0])
    assert X @ g @ X == pytest.approx(1.0, abs=1e-15)
