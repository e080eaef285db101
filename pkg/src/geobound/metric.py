"""Coordinate metrics, their derivatives, and unit-sphere sampling.

A metric is described by a :class:`MetricSpec`. Catalog metrics carry a
*jet*: a function ``jet(p, params) -> (g, dg, d2g)`` with analytic first and
second partial derivatives, written so numba can compile it. Metrics built
from a bare ``components`` callable fall back to central finite differences.

Index conventions used throughout the package::

    dg[c, a, b]      = d_c g_ab
    d2g[c, e, a, b]  = d_c d_e g_ab
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import norm, qmc

from .errors import NonFiniteMetric, StepTooSmall

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TangentVector:
    comps: np.ndarray
    point: Optional[np.ndarray] = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.comps, dtype=dtype)


@dataclass(frozen=True, eq=False)
class MetricSpec:
    dim: int
    components: Callable[[np.ndarray], np.ndarray]
    derivs: Optional[Callable[[np.ndarray], np.ndarray]] = None
    base_point: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict)
    jet: Optional[Callable] = None
    param_array: np.ndarray = field(default_factory=lambda: np.zeros(1))
    name: str = ""
    kind: int = -1

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.base_point is None:
            object.__setattr__(self, "base_point", np.zeros(self.dim))
        else:
            object.__setattr__(self, "base_point", np.asarray(self.base_point, dtype=float))

    @classmethod
    def from_jet(cls, dim, jet, params=None, param_array=None, base_point=None, name="", kind=-1):
        """Build a spec whose components and derivatives both come from ``jet``."""
        pa = np.zeros(1) if param_array is None else np.asarray(param_array, dtype=float)

        def components(p, _jet=jet, _pa=pa):
            return _jet(np.asarray(p, dtype=float), _pa)[0]

        def derivs(p, _jet=jet, _pa=pa):
            return _jet(np.asarray(p, dtype=float), _pa)[1]

        return cls(dim=dim, components=components, derivs=derivs, base_point=base_point,
                   params=dict(params or {}), jet=jet, param_array=pa, name=name, kind=kind)


def default_step(p) -> float:
    return 1e-5 * (1.0 + float(np.max(np.abs(p))))


def metric_at(spec: MetricSpec, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    g = np.asarray(spec.components(p), dtype=float)
    if g.shape != (spec.dim, spec.dim):
        raise ValueError(f"metric has shape {g.shape}, expected {(spec.dim, spec.dim)}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteMetric(f"non-finite metric component at {p}")
    return 0.5 * (g + g.T)


def _check_noise(scale: float, h: float, signal: float):
    noise = _EPS * scale / h
    if noise > 1e-6 * max(signal, scale, 1e-300):
        raise StepTooSmall(f"finite-difference step h={h:g} is dominated by roundoff")


def metric_derivs(spec: MetricSpec, p, h: Optional[float] = None) -> np.ndarray:
    """First partials ``dg[c, a, b]``; analytic when the spec supplies them."""
    p = np.asarray(p, dtype=float)
    if spec.derivs is not None and h is None:
        dg = np.asarray(spec.derivs(p), dtype=float)
        return 0.5 * (dg + dg.transpose(0, 2, 1))
    return fd_metric_derivs(spec, p, h)


def fd_metric_derivs(spec: MetricSpec, p, h: Optional[float] = None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    d = spec.dim
    h = default_step(p) if h is None else float(h)
    if h <= 0:
        raise ValueError("h must be positive")
    dg = np.empty((d, d, d))
    scale = 0.0
    for c in range(d):
        e = np.zeros(d)
        e[c] = h
        gp = metric_at(spec, p + e)
        gm = metric_at(spec, p - e)
        scale = max(scale, np.max(np.abs(gp)), np.max(np.abs(gm)))
        dg[c] = (gp - gm) / (2 * h)
    _check_noise(scale, h, float(np.max(np.abs(dg))))
    return dg


def fd_jet(spec: MetricSpec, p, h: Optional[float] = None):
    """``(g, dg, d2g)`` at ``p`` with second partials from differenced first partials."""
    p = np.asarray(p, dtype=float)
    d = spec.dim
    g = metric_at(spec, p)
    dg = metric_derivs(spec, p)
    # second differences need a coarser step than first differences
    h2 = (1e-4 * (1.0 + float(np.max(np.abs(p))))) if h is None else float(h)
    d2g = np.empty((d, d, d, d))
    for e_idx in range(d):
        e = np.zeros(d)
        e[e_idx] = h2
        d2g[:, e_idx] = (metric_derivs(spec, p + e) - metric_derivs(spec, p - e)) / (2 * h2)
    d2g = 0.5 * (d2g + d2g.transpose(1, 0, 2, 3))
    return g, dg, d2g


def jet_at(spec: MetricSpec, p):
    """Metric jet at ``p``, analytic when available."""
    p = np.asarray(p, dtype=float)
    if spec.jet is not None:
        g, dg, d2g = spec.jet(p, spec.param_array)
        if not np.all(np.isfinite(g)):
            raise NonFiniteMetric(f"non-finite metric component at {p}")
        return np.asarray(g), np.asarray(dg), np.asarray(d2g)
    return fd_jet(spec, p)


def python_jet(spec: MetricSpec):
    """A ``jet(p, params)`` callable for specs without an analytic jet."""
    if spec.jet is not None:
        return spec.jet

    def jet(p, _params):
        return fd_jet(spec, p)

    return jet


def unit_norm(g, X) -> float:
    X = np.asarray(X, dtype=float)
    return float(np.sqrt(X @ g @ X))


def normalize(g, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X / unit_norm(g, X)


def inv_sqrt(g) -> np.ndarray:
    w, V = np.linalg.eigh(g)
    if np.any(w <= 0):
        raise ValueError("metric is not positive definite")
    return (V / np.sqrt(w)) @ V.T


def _euclidean_sphere(d: int, n: int) -> np.ndarray:
    if d == 2:
        a = 2 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(a), np.sin(a)])
    axes = np.vstack([np.eye(d), -np.eye(d)])
    m = n - 2 * d
    if m <= 0:
        return axes[:n]
    halton = qmc.Halton(d=d, scramble=False).random(m + 1)[1:]
    gauss = norm.ppf(halton)
    gauss /= np.linalg.norm(gauss, axis=1, keepdims=True)
    return np.vstack([axes, gauss])


def sphere_array(g, n: int) -> np.ndarray:
    """``(n, d)`` array of g-unit vectors, quasi-uniform and deterministic."""
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    if n < 2 * d:
        raise ValueError(f"need n >= 2d = {2 * d}")
    u = _euclidean_sphere(d, n)
    X = u @ inv_sqrt(g)
    X /= np.sqrt(np.einsum("na,ab,nb->n", X, g, X))[:, None]
    return X


def sphere_directions(g, n: int) -> list[TangentVector]:
    return [TangentVector(x) for x in sphere_array(g, n)]
