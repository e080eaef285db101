"""Geodesic-ball flows: expansion, shear and their evolution equations.

A flow starts near the base point with the small-radius expansion
``M = I/t0 + (t0/3) K`` and co-integrates position, tangent, a parallel
orthonormal frame, the expansion matrix ``M`` and the transport matrix ``T``.
Everything transverse is stored in frame components, so covariant time
derivatives are ordinary derivatives of the stored arrays.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import kernels
from ._accel import max_threads
from .curvature import DirectionField, _check_unit, orthonormal_frame
from .errors import CausticEncountered, SeriesTooShort, WindowTooShort
from .metric import MetricSpec, TangentVector, jet_at, python_jet

DEFAULT_T0 = 1e-3
DEFAULT_DT = 1e-3
STEP_RATIO = 0.05
THETA_CAP = 1e8
RESIDUAL_T_MIN = 1.0


@dataclass
class FlowState:
    t: float
    pos: np.ndarray
    X: TangentVector
    T: np.ndarray
    M: np.ndarray
    frame: np.ndarray


@dataclass
class Decomposition:
    theta: float
    sigma: np.ndarray
    omega: np.ndarray
    f: np.ndarray


def _embed(A):
    """Transverse ``(n, n)`` block to a ``(d, d)`` frame matrix with zero first row and column."""
    n = A.shape[-1]
    out = np.zeros(A.shape[:-2] + (n + 1, n + 1))
    out[..., 1:, 1:] = A
    return out


def _tr(A):
    return np.einsum("...ii->...", A)


class FlowSeries:
    """Time series produced by :func:`integrate_flow`; derived arrays are cached."""

    def __init__(self, spec, t, Y, K, dt):
        self.spec = spec
        self.d = d = spec.dim
        self.n = n = d - 1
        self.dt = dt
        self.t = t
        o = 2 * d + d * d
        N = len(t)
        self.pos = Y[:, :d]
        self.X = Y[:, d:2 * d]
        self.E = Y[:, 2 * d:o].reshape(N, d, d)
        self.M = Y[:, o:o + n * n].reshape(N, n, n)
        self.T = Y[:, o + n * n:o + 2 * n * n].reshape(N, n, n)
        self.Tdot = Y[:, o + 2 * n * n:].reshape(N, n, n)
        self.K = K

    def __len__(self):
        return len(self.t)

    @cached_property
    def theta(self):
        return _tr(self.M)

    @cached_property
    def sigma(self):
        S = 0.5 * (self.M + self.M.transpose(0, 2, 1))
        return S - (self.theta / self.n)[:, None, None] * np.eye(self.n)

    @cached_property
    def omega(self):
        return 0.5 * (self.M - self.M.transpose(0, 2, 1))

    @cached_property
    def sigma_sq(self):
        return self.sigma @ self.sigma

    @cached_property
    def sigma2(self):
        return _tr(self.sigma_sq)

    @cached_property
    def tr_sigma3(self):
        return np.einsum("nij,nji->n", self.sigma_sq, self.sigma)

    @cached_property
    def tr_sigma4(self):
        return np.einsum("nij,nji->n", self.sigma_sq, self.sigma_sq)

    @cached_property
    def omega2(self):
        return np.einsum("nij,nij->n", self.omega, self.omega)

    @cached_property
    def r2(self):
        return _tr(self.K)

    @cached_property
    def W(self):
        return self.K - (self.r2 / self.n)[:, None, None] * np.eye(self.n)

    @cached_property
    def W_prime(self):
        return np.gradient(self.W, self.dt, axis=0, edge_order=2)

    @cached_property
    def sigma_w(self):
        return np.einsum("nij,nij->n", self.sigma, self.W)

    @cached_property
    def det_M(self):
        return np.linalg.det(self.M)

    @cached_property
    def f(self):
        n = self.n
        return (2.0 / n) * self.theta[:, None, None] * self.sigma + self.sigma_sq \
            - (self.sigma2 / n)[:, None, None] * np.eye(n)

    @cached_property
    def norm_error(self):
        """``|g(X, X) - 1|`` along the flow."""
        out = np.empty(len(self))
        jet = self.spec.jet
        for i in range(len(self)):
            g = jet(self.pos[i], self.spec.param_array)[0] if jet is not None else \
                self.spec.components(self.pos[i])
            out[i] = abs(self.X[i] @ g @ self.X[i] - 1.0)
        return out

    def state(self, i: int) -> FlowState:
        return FlowState(float(self.t[i]), self.pos[i], TangentVector(self.X[i], self.pos[i]),
                         _embed(self.T[i]), _embed(self.M[i]), self.E[i])

    def decomposition(self, i: int) -> Decomposition:
        return Decomposition(float(self.theta[i]), _embed(self.sigma[i]), _embed(self.omega[i]),
                             _embed(self.f[i]))

    def window(self, t_lo=None, t_hi=None):
        lo = -np.inf if t_lo is None else t_lo - 1e-9
        hi = np.inf if t_hi is None else t_hi + 1e-9
        return (self.t >= lo) & (self.t <= hi)


def initial_state(spec: MetricSpec, X0, t0: float):
    p = spec.base_point
    X0 = np.asarray(X0, dtype=float).reshape(-1)
    g, dg, d2g = jet_at(spec, p)
    _check_unit(g, X0)
    d = spec.dim
    E = orthonormal_frame(g, X0)
    kap = kernels.kappa_np(g, dg, d2g, X0)[1]
    K = kernels.frame_kappa_np(g, kap, E)
    n = d - 1
    M = np.eye(n) / t0 + (t0 / 3.0) * K
    T = t0 * np.eye(n)
    return np.concatenate([p, X0, E.ravel(), M.ravel(), T.ravel(), (M @ T).ravel()])


def integrate_flow(spec: MetricSpec, X0, t0: float = DEFAULT_T0, t_end: float = 20.0,
                   dt: float = DEFAULT_DT, step_ratio: float = STEP_RATIO) -> FlowSeries:
    """RK4 on the fixed grid ``t0 + k dt``; early steps are subdivided while ``dt |theta|`` is large.

    Raises :class:`CausticEncountered` (with the partial series attached as
    ``.series``) when ``|theta|`` exceeds ``1e8``, which happens at a focal
    point.
    """
    if not t0 > 0 or not dt > 0:
        raise ValueError("t0 and dt must be positive")
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    y0 = initial_state(spec, X0, t0)
    n_steps = int(round((t_end - t0) / dt))
    if spec.kind >= 0:
        Y, Ks, n_done, status = kernels.integrate_loop(
            spec.kind, spec.param_array, y0, spec.dim, t0, dt, n_steps, step_ratio, THETA_CAP)
    else:
        Y, Ks, n_done, status = kernels.integrate_loop_callable(
            python_jet(spec), spec.param_array, y0, spec.dim, t0, dt, n_steps, step_ratio, THETA_CAP)
    t = t0 + dt * np.arange(n_done + 1)
    series = FlowSeries(spec, t, Y, Ks, dt)
    if status != 0:
        err = CausticEncountered(float(t[-1]))
        err.series = series
        raise err
    return series


def integrate_many(spec: MetricSpec, directions, workers: Optional[int] = None, **kw):
    """Integrate several directions concurrently; results keep the input order."""
    workers = max_threads() if workers is None else workers
    dirs = [np.asarray(X, dtype=float) for X in directions]
    if workers <= 1 or len(dirs) <= 1:
        return [integrate_flow(spec, X, **kw) for X in dirs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda X: integrate_flow(spec, X, **kw), dirs))


# ------------------------------------------------------------------ residuals


def _centered(series: FlowSeries, arr):
    if len(series) < 3:
        raise SeriesTooShort("need at least three samples for centered differences")
    return (arr[2:] - arr[:-2]) / (2.0 * series.dt)


def residual_series(series: FlowSeries):
    """Pointwise residuals of the expansion and shear equations at interior grid points.

    Returns ``(t, r1, r2)``; ``r2`` is the largest entry of the matrix residual.
    """
    s = series
    n = s.n
    dtheta = _centered(s, s.theta)
    dsigma = _centered(s, s.sigma)
    sl = slice(1, -1)
    r1 = dtheta + s.theta[sl] ** 2 / n + s.sigma2[sl] - s.omega2[sl] - s.r2[sl]
    R2 = (dsigma + (2.0 / n) * s.theta[sl, None, None] * s.sigma[sl] + s.sigma_sq[sl]
          - (s.sigma2[sl] / n)[:, None, None] * np.eye(n) - s.W[sl])
    return s.t[sl], r1, np.max(np.abs(R2), axis=(1, 2))


def raychaudhuri_residuals(series: FlowSeries, t_min: float = RESIDUAL_T_MIN):
    """Max residuals of both evolution equations over interior times ``t >= t_min``.

    Centered differences make the residual O(dt^2 * third derivative); the
    early-time window is excluded because those derivatives grow like 1/t^4.
    """
    t, r1, r2 = residual_series(series)
    m = t >= t_min
    if not np.any(m):
        raise SeriesTooShort(f"no interior samples with t >= {t_min}")
    return float(np.max(np.abs(r1[m]))), float(np.max(r2[m]))


def sigma2_evolution_residual(series: FlowSeries, t_min: float = RESIDUAL_T_MIN) -> float:
    s = series
    n = s.n
    d_s2 = _centered(s, s.sigma2)
    sl = slice(1, -1)
    res = 0.5 * d_s2 + (2.0 / n) * s.theta[sl] * s.sigma2[sl] + s.tr_sigma3[sl] - s.sigma_w[sl]
    m = s.t[sl] >= t_min
    if not np.any(m):
        raise SeriesTooShort(f"no interior samples with t >= {t_min}")
    return float(np.max(np.abs(res[m])))


# ------------------------------------------------------------------ averages


@dataclass
class AverageReport:
    t_burn: float
    t_end: float
    mean_theta: float
    mean_theta2: float
    mean_sigma2: float
    identity_residual: float
    raychaudhuri1_residual_max: float
    raychaudhuri2_residual_max: float
    det_M_min: float
    identity_lhs: float = float("nan")
    identity_rhs: float = float("nan")
    theta2_identity_residual: float = float("nan")
    mean_r2: float = float("nan")
    mean_w2: float = float("nan")
    mean_wprime2: float = float("nan")
    late_theta: float = float("nan")

    def to_json(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def _mean(t, y):
    return float(np.trapezoid(y, t) / (t[-1] - t[0])) if hasattr(np, "trapezoid") else \
        float(np.trapz(y, t) / (t[-1] - t[0]))


def late_time_rate(series: FlowSeries, t_lo: Optional[float] = None, t_hi: Optional[float] = None,
                   order: int = 2) -> float:
    """Extrapolated ``lim theta(t)`` from a least-squares fit ``a + b/t + c/t^2`` on the tail.

    The default tail is the second half of the series. A plain window mean
    carries an O(log(t)/t) bias from the ``1/t`` part of ``theta``; the fit
    removes it.
    """
    t_hi = series.t[-1] if t_hi is None else t_hi
    t_lo = 0.5 * t_hi if t_lo is None else t_lo
    m = series.window(t_lo, t_hi)
    t = series.t[m]
    if len(t) < order + 2:
        raise SeriesTooShort("tail too short for the late-time fit")
    A = np.column_stack([t ** -k for k in range(order + 1)])
    coef, *_ = np.linalg.lstsq(A, series.theta[m], rcond=None)
    return float(coef[0])


def averaged_identity_residual(series: FlowSeries, t_burn: Optional[float] = None,
                               t_end: Optional[float] = None, r2_max: Optional[float] = None,
                               min_window: float = 20.0) -> AverageReport:
    """Window averages and the residuals of the two exactly averaged identities.

    Both identities hold only up to boundary terms divided by the window
    length, so the residuals decay as the window grows.
    """
    s = series
    n = s.n
    if r2_max is None:
        r2_max = DirectionField(s.spec).r2_extrema()[0][0]
    r_max = math.sqrt(max(r2_max, 1e-300))
    t_burn = 5.0 / r_max if t_burn is None else t_burn
    t_end = s.t[-1] if t_end is None else t_end
    if t_end - t_burn < min_window / r_max - 1e-9:
        raise WindowTooShort(f"window {t_end - t_burn:.4g} shorter than {min_window}/R_max")
    m = s.window(t_burn, t_end)
    t = s.t[m]
    th, s2, s3, s4, r2 = s.theta[m], s.sigma2[m], s.tr_sigma3[m], s.tr_sigma4[m], s.r2[m]
    W = s.W[m]
    Wp = s.W_prime[m]
    sig = s.sigma[m]
    w2 = np.einsum("nij,nij->n", W, W)
    wps = np.einsum("nij,nij->n", Wp, sig)
    lhs = (n * _mean(t, s4) + 4 * _mean(t, th * s3) + 5 * _mean(t, th ** 2 * s2) / n
           - _mean(t, s2 * r2))
    rhs = n * (_mean(t, wps) + _mean(t, w2))
    scale = abs(rhs) if abs(rhs) > 1e-12 else 1.0
    mean_theta2 = _mean(t, th ** 2)
    mean_r2 = _mean(t, r2)
    mean_s2 = _mean(t, s2)
    id2 = abs(mean_theta2 / n - mean_r2 + mean_s2) / max(mean_r2, 1e-12)
    ray1, ray2 = raychaudhuri_residuals(s, t_min=max(t_burn, RESIDUAL_T_MIN))
    return AverageReport(
        t_burn=float(t[0]), t_end=float(t[-1]), mean_theta=_mean(t, th), mean_theta2=mean_theta2,
        mean_sigma2=mean_s2, identity_residual=abs(lhs - rhs) / scale,
        raychaudhuri1_residual_max=ray1, raychaudhuri2_residual_max=ray2,
        det_M_min=float(np.min(s.det_M[m])), identity_lhs=lhs, identity_rhs=rhs,
        theta2_identity_residual=id2, mean_r2=mean_r2, mean_w2=_mean(t, w2),
        mean_wprime2=_mean(t, np.einsum("nij,nij->n", Wp, Wp)),
        late_theta=late_time_rate(s, t_hi=float(t[-1])),
    )


def positivity_monitor(series: FlowSeries, t_min: float = 0.1) -> float:
    """Smallest eigenvalue of the symmetric transverse expansion matrix for ``t >= t_min``."""
    m = series.window(t_min, None)
    S = 0.5 * (series.M[m] + series.M[m].transpose(0, 2, 1))
    return float(np.min(np.linalg.eigvalsh(S)[:, 0]))


# ------------------------------------------------------------- shear algebra


def shear_trace_margins(sigma, theta: float = 0.0):
    """Relative slack ``(rhs - lhs) / scale`` of the three trace inequalities.

    Order: ``Tr s^2 <= (d-2) theta^2/(d-1)``, the cubic bound, the quartic bound.
    """
    s = np.asarray(sigma, dtype=float)
    n = s.shape[0]
    d = n + 1
    ev = np.linalg.eigvalsh(0.5 * (s + s.T))
    t2 = float(np.sum(ev ** 2))
    t3 = float(np.sum(ev ** 3))
    t4 = float(np.sum(ev ** 4))
    # (lhs, rhs, natural scale); the scale keeps d = 3, where the cubic rhs is 0, well posed
    triples = [
        (t2, (d - 2) * theta ** 2 / (d - 1), theta ** 2),
        (t3 ** 2, (d - 3) ** 2 * t2 ** 3 / ((d - 1) * (d - 2)), t2 ** 3),
        (t4, ((d - 2) ** 3 + 1) * t2 ** 2 / ((d - 1) ** 2 * (d - 2)), t2 ** 2),
    ]
    return [(r - l) / max(abs(r), abs(l), sc, 1e-300) if (r or l) else 0.0 for l, r, sc in triples]


def shear_trace_bounds_check(sigma, theta: float, positive_M: bool, tol: float = 1e-12) -> list:
    """Whether each trace inequality holds; the first is vacuously true unless ``positive_M``."""
    if np.asarray(sigma).shape[0] < 2:
        raise ValueError("need a transverse dimension of at least 2")
    m = shear_trace_margins(sigma, theta)
    return [(not positive_M) or m[0] >= -tol, m[1] >= -tol, m[2] >= -tol]


# ------------------------------------------------------------------ export

CSV_COLUMNS = ("t", "theta", "sigma2", "tr_sigma3", "tr_sigma4", "det_M", "residual1", "residual2")


def series_rows(series: FlowSeries, every: int = 1):
    _, r1, r2 = residual_series(series)
    r1 = np.concatenate([[np.nan], r1, [np.nan]])
    r2 = np.concatenate([[np.nan], r2, [np.nan]])
    cols = (series.t, series.theta, series.sigma2, series.tr_sigma3, series.tr_sigma4,
            series.det_M, r1, r2)
    for i in range(0, len(series), every):
        yield [float(c[i]) for c in cols]


def write_csv(series: FlowSeries, path, every: int = 1):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in series_rows(series, every):
            w.writerow([repr(x) for x in row])
