"""Volume-growth rate bounds.

All rates are squared late-time expansions ``<theta>^2`` unless the name says
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .curvature import DirectionScan, optimize_on_sphere, scan_directions, sectional_spectrum
from .errors import BadWeights, DegenerateFlat, NegativeKappa, NegativeTime
from .metric import MetricSpec, TangentVector


def sn(k: float, t: float) -> float:
    if t < 0:
        raise NegativeTime(f"t = {t} < 0")
    if k > 0:
        rk = math.sqrt(k)
        return math.sin(rk * t) / rk if t <= math.pi / rk else 0.0
    if k < 0:
        rk = math.sqrt(-k)
        return math.sinh(rk * t) / rk
    return float(t)


def sphere_area(d: int) -> float:
    """Area of the unit (d-1)-sphere."""
    return 2.0 * math.pi ** (d / 2) / special.gamma(d / 2)


def _bg_integrand(d, ricci_min):
    k = ricci_min / (d - 1)
    return lambda tau: sn(k, tau) ** (d - 1)


def bg_volume(d: int, ricci_min: float, t: float) -> float:
    """Volume of the comparison-model ball of radius ``t``."""
    if t < 0:
        raise NegativeTime(f"t = {t} < 0")
    if t == 0:
        return 0.0
    k = ricci_min / (d - 1)
    upper = min(t, math.pi / math.sqrt(k)) if k > 0 else t
    val, _ = integrate.quad(_bg_integrand(d, ricci_min), 0.0, upper, epsabs=0.0,
                            epsrel=1e-12, limit=400)
    return sphere_area(d) * val


def bg_log_slope(d: int, ricci_min: float, t: float) -> float:
    """``d/dt log BG(t)``, evaluated as a ratio that stays finite for large ``t``."""
    k = ricci_min / (d - 1)
    s_t = sn(k, t)
    if s_t == 0.0:
        return 0.0
    ratio, _ = integrate.quad(lambda tau: (sn(k, tau) / s_t) ** (d - 1), 0.0, t,
                              epsabs=0.0, epsrel=1e-12, limit=400)
    return 1.0 / ratio


def bg_rate2(d: int, r2_max: float) -> float:
    return (d - 1) * r2_max + 0.0  # no -0.0 for flat space


# ------------------------------------------------------------- shear bound


def subtracted_term(w2, wp2, D):
    """``((sqrt(4 D w2 + wp2) - sqrt(wp2)) / (2 D))^2``, the shear lower bound squared."""
    w2 = np.maximum(np.asarray(w2, dtype=float), 0.0)
    # rationalized form avoids cancellation when wp2 >> D w2
    q = 2.0 * w2 / (np.sqrt(4.0 * D * w2 + wp2) + math.sqrt(wp2) + 1e-300)
    return q * q


def rate_integrand(r2, w2, wp2, D):
    return np.asarray(r2) - subtracted_term(w2, wp2, D)


def _bound_max(scan: DirectionScan, per_direction, d, D):
    P = scan.wprime2_max
    F = scan.direction_field
    if per_direction is None:
        def f(u):
            return (d - 1) * rate_integrand(F.r2(u), F.w2(u), P, D)

        def grad(u):
            w2 = np.maximum(F.w2(u), 0.0)
            root = np.sqrt(4.0 * D * w2 + P)
            q = 2.0 * w2 / (root + math.sqrt(P) + 1e-300)
            dq = np.where(root > 1e-150, 1.0 / np.maximum(root, 1e-150), 0.0)
            return (d - 1) * (F.grad_r2(u) - (2.0 * q * dq)[:, None] * F.grad_w2(u))
    else:
        def f(u):
            X = F.to_coords(np.atleast_2d(u))
            r2, w2 = per_direction(X)
            return (d - 1) * rate_integrand(r2, w2, P, D)
        grad = None
    u, val, ties = optimize_on_sphere(f, scan.grid, grad, maximize=True, tol=scan.refine_tol)
    return float(val), TangentVector(F.to_coords(u), F.p), ties


def _check_flat(scan, per_direction, d):
    if scan.r2_max > 0:
        return False
    F = scan.direction_field
    r2 = F.r2(scan.grid) if per_direction is None else per_direction(F.to_coords(scan.grid))[0]
    if np.max(np.abs(r2)) > 1e-12:
        raise DegenerateFlat("r2_max is zero but some direction has nonzero R^2")
    return True


def new_rate2(scan: DirectionScan, per_direction: Optional[Callable] = None,
              d: Optional[int] = None) -> tuple[float, TangentVector]:
    """Shear-corrected late-time bound on ``<theta>^2`` and its maximizing direction.

    ``per_direction`` maps an ``(N, d)`` batch of coordinate directions to
    ``(R2, TrW2)`` arrays; by default the scan's own direction field is used.
    """
    d = scan.direction_field.d if d is None else d
    if _check_flat(scan, per_direction, d):
        return 0.0, scan.argmax_r2
    val, X, _ = _bound_max(scan, per_direction, d, d * scan.r2_max)
    return val, X


def refined_rate2(scan: DirectionScan, per_direction: Optional[Callable] = None,
                  d: Optional[int] = None) -> float:
    d = scan.direction_field.d if d is None else d
    if _check_flat(scan, per_direction, d):
        return 0.0
    D = d * scan.r2_max - max(scan.r2_min, 0.0) / (d - 1)
    return _bound_max(scan, per_direction, d, D)[0]


def symmetric_space_rate(spectrum: Sequence[float]) -> float:
    s = np.asarray(spectrum, dtype=float)
    if np.any(s < -1e-10):
        raise NegativeKappa(f"negative tidal eigenvalue {s.min():.3g}")
    # roundoff-level entries would otherwise contribute sqrt(1e-16) = 1e-8
    floor = 1e-12 * max(1.0, float(np.max(np.abs(s), initial=0.0)))
    s = np.where(np.abs(s) <= floor, 0.0, s)
    return float(np.sum(np.sqrt(np.clip(s, 0.0, None))))


def perfect_precession_rate(spectrum: Sequence[float]) -> float:
    s = np.asarray(spectrum, dtype=float)
    return math.sqrt(max(len(s) * float(np.sum(s)), 0.0))


def strategy_functional(segments, d: int, r2_max: float) -> float:
    """Right-hand side of the time-averaged bound on ``<theta>^2/(d-1)`` for a
    mixture of directions.

    ``segments`` holds ``(weight, R2, TrW2, TrW'2)`` tuples; averages are the
    weighted means.
    """
    seg = np.asarray(segments, dtype=float).reshape(-1, 4)
    w = seg[:, 0]
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise BadWeights("weights must be nonnegative and sum to 1")
    r2, w2, wp2 = (w @ seg[:, 1:]).tolist()
    return float(rate_integrand(r2, w2, wp2, d * r2_max))


# ------------------------------------------------------------------ report


@dataclass
class BoundReport:
    d: int
    bg_rate2: float
    new_rate2: float
    refined_rate2: float
    symmetric_rate: float
    argmax_direction: TangentVector
    r2_max: float
    r2_min: float
    w2_min: float
    wprime2_max: float
    bg_volume: Callable[[float], float] = field(repr=False, default=None)
    scan: DirectionScan = field(repr=False, default=None)

    def to_json(self):
        return {
            "d": self.d,
            "bg_rate2": self.bg_rate2,
            "new_rate2": self.new_rate2,
            "refined_rate2": self.refined_rate2,
            "symmetric_rate": self.symmetric_rate,
            "argmax_direction": [float(x) for x in self.argmax_direction.comps],
            "r2_max": self.r2_max,
            "r2_min": self.r2_min,
            "w2_min": self.w2_min,
            "wprime2_max": self.wprime2_max,
        }


def bound_report(spec: MetricSpec, n: Optional[int] = None, scan: Optional[DirectionScan] = None,
                 refine_tol: float = 1e-12) -> BoundReport:
    scan = scan_directions(spec, n, refine_tol) if scan is None else scan
    d = spec.dim
    new, X = new_rate2(scan)
    refined = refined_rate2(scan)
    spec_vals = sectional_spectrum(spec, spec.base_point, X.comps)
    ricci_min = -scan.r2_max
    try:
        sym = symmetric_space_rate(spec_vals)
    except NegativeKappa:
        sym = float("nan")
    return BoundReport(
        d=d, bg_rate2=bg_rate2(d, scan.r2_max), new_rate2=new, refined_rate2=refined,
        symmetric_rate=sym,
        argmax_direction=X, r2_max=scan.r2_max, r2_min=scan.r2_min, w2_min=scan.w2_min,
        wprime2_max=scan.wprime2_max,
        bg_volume=lambda t: bg_volume(d, ricci_min, t), scan=scan,
    )
