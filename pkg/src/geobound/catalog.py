"""Built-in homogeneous metrics with closed-form reference values.

Charts
------
``flat``         Euclidean R^d.
``hd``           hyperbolic space, horospherical chart ``dz^2 + e^{2z} |dx|^2``.
``hd-polar``     hyperbolic space, geodesic polar chart ``dt^2 + sinh^2 t dOmega^2``.
``h2n``          (H^2)^n as a product of horospherical planes ``dz_k^2 + e^{2 z_k} dy_k^2``.
``h2xh2``        ``h2n`` with n = 2.
``h2xh2-polar``  ``dtau_1^2 + sinh^2 tau_1 dphi_1^2 + dtau_2^2 + sinh^2 tau_2 dphi_2^2``.
``squashed-h3``  ``e^{2cz} dx^2 + e^{2z} dy^2 + dz^2`` with c >= 1.

The horospherical charts are global, so long geodesic flows use them. The polar
charts are singular at the origin and only serve the coordinate golden values.
All curvatures are normalized so that the hyperbolic factors have sectional
curvature -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadParams, UnknownMetric, UnknownQuantity
from .jets import FLAT, H2N, H2N_POLAR, HD_POLAR, HORO, SQUASHED, get_jet
from .metric import MetricSpec, normalize

# ---------------------------------------------------------------- oracles


def _xcoth(x):
    return 1.0 if x == 0 else x / math.tanh(x)


def _h2xh2_parts(t, psi):
    t1, t2 = t * math.cos(psi), t * math.sin(psi)
    return t1, t2, _xcoth(t1), _xcoth(t2)


def h2xh2_theta(t, psi=math.pi / 4):
    _, _, a, b = _h2xh2_parts(t, psi)
    return (1.0 + a + b) / t


def h2xh2_sigma2(t, psi=math.pi / 4):
    _, _, a, b = _h2xh2_parts(t, psi)
    return 2.0 / (3.0 * t * t) * (a * a - a * b - a + b * b - b + 1.0)


def h2xh2_tr_sigma3(t, psi=math.pi / 4):
    _, _, a, b = _h2xh2_parts(t, psi)
    return (a - 2 * b + 1) * (b - 2 * a + 1) * (2 - a - b) / (9.0 * t ** 3)


def h2xh2_sigma_w(t, psi=math.pi / 4):
    t1, t2, a, b = _h2xh2_parts(t, psi)
    return (t1 * t1 * a + t2 * t2 * b) / t ** 3 - h2xh2_theta(t, psi) / 3.0


def h2xh2_w2(psi):
    return 1.0 / 6.0 + 0.5 * math.cos(2 * psi) ** 2


def squashed_r2(c, psi, phi):
    cp2, sp2 = math.cos(psi) ** 2, math.sin(psi) ** 2
    cf2, sf2 = math.cos(phi) ** 2, math.sin(phi) ** 2
    return c * (1 + c) * cp2 * cf2 + (1 + c) * cp2 * sf2 + (1 + c * c) * sp2


def squashed_w2(c, psi, phi):
    cp2 = math.cos(psi) ** 2
    cf2, sf2 = math.cos(phi) ** 2, math.sin(phi) ** 2
    return 0.5 * (c - 1) ** 2 * ((c + 1) ** 2 - 2 * (c + 1) * cp2 * (c * sf2 + cf2)
                                 + cp2 ** 2 * (cf2 - c * sf2) ** 2)


def squashed_wprime2(c, psi, phi):
    cp2 = math.cos(psi) ** 2
    cf2, sf2 = math.cos(phi) ** 2, math.sin(phi) ** 2
    return 2 * (c - 1) ** 2 * c * c * cp2 ** 2 * (1 - (sf2 - cf2) ** 2 * cp2)


def squashed_new_rate2(c):
    return 2.0 * (c * (1 + c) - (c - 1) ** 2 * (math.sqrt(3 * c * c + 3 * c + 1) - 1) ** 2
                  / (18 * (c + 1) ** 2))


def squashed_improvement(c):
    """Fractional reduction of the late-time exponent relative to the classical bound."""
    if math.isinf(c):
        return 1.0 - math.sqrt(5.0 / 6.0)
    return 1.0 - math.sqrt(squashed_new_rate2(c) / (2.0 * c * (1 + c)))


# ------------------------------------------------------------------ entries


@dataclass
class CatalogEntry:
    name: str
    spec: MetricSpec
    flags: dict
    oracles: dict = field(default_factory=dict)
    directions: dict = field(default_factory=dict)
    angle_map: Callable | None = None
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.spec.dim

    def direction(self, what) -> np.ndarray:
        """Unit tangent at the base point from a name, ``e<i>``, angles, or components."""
        g = self.spec.components(self.spec.base_point)
        if isinstance(what, str):
            key = what.strip()
            if key in self.directions:
                return normalize(g, self.directions[key])
            if key.startswith("e") and key[1:].isdigit():
                X = np.zeros(self.dim)
                X[int(key[1:])] = 1.0
                return normalize(g, X)
            if "=" in key:
                if self.angle_map is None:
                    raise BadParams(f"{self.name} has no angle parametrization")
                angles = {k.strip(): float(v) for k, v in (s.split("=") for s in key.split(","))}
                return normalize(g, self.angle_map(**angles))
            comps = [float(s) for s in key.split(",")]
        else:
            comps = list(what)
        X = np.asarray(comps, dtype=float)
        if X.shape != (self.dim,):
            raise BadParams(f"direction needs {self.dim} components")
        return normalize(g, X)

    def to_json(self):
        return {"name": self.name, "dim": self.dim, "params": self.params, "flags": self.flags,
                "base_point": list(map(float, self.spec.base_point)),
                "directions": sorted(self.directions), "oracles": sorted(self.oracles)}


def _int_param(params, key, default, lo):
    v = params.get(key, default)
    try:
        fv = float(v)
    except (TypeError, ValueError):
        raise BadParams(f"{key} must be a number") from None
    if not math.isfinite(fv) or fv != int(fv) or fv < lo:
        raise BadParams(f"{key} must be an integer >= {lo}")
    return int(fv)


def _flags(nonpos, einstein, symmetric):
    return {"nonpositive_sectional": nonpos, "einstein": einstein, "symmetric_space": symmetric}


def _make_flat(params):
    d = _int_param(params, "d", 3, 2)
    spec = MetricSpec.from_jet(d, get_jet(FLAT), kind=FLAT, params={"d": d}, name="flat")
    oracles = {"r2": lambda **_: 0.0, "theta": lambda t, **_: (d - 1) / t,
               "sigma2": lambda **_: 0.0, "bg_rate2": lambda: 0.0, "new_rate2": lambda: 0.0}
    return CatalogEntry("flat", spec, _flags(True, True, True), oracles, params={"d": d})


def _hd_oracles(d):
    return {
        "theta": lambda t, **_: (d - 1) / math.tanh(t),
        "sigma2": lambda **_: 0.0,
        "r2": lambda **_: float(d - 1),
        "w2": lambda **_: 0.0,
        "wprime2": lambda **_: 0.0,
        "bg_rate2": lambda: float((d - 1) ** 2),
        "new_rate2": lambda: float((d - 1) ** 2),
        "refined_rate2": lambda: float((d - 1) ** 2),
        "spectrum": lambda **_: [1.0] * (d - 1),
    }


def _make_hd(params):
    d = _int_param(params, "d", 3, 2)
    spec = MetricSpec.from_jet(d, get_jet(HORO), kind=HORO, params={"d": d}, name="hd")
    return CatalogEntry("hd", spec, _flags(True, True, True), _hd_oracles(d), params={"d": d})


def _make_hd_polar(params):
    d = _int_param(params, "d", 3, 2)
    base = np.full(d, math.pi / 2)
    base[0] = 1.0
    spec = MetricSpec.from_jet(d, get_jet(HD_POLAR), kind=HD_POLAR, params={"d": d},
                               base_point=base, name="hd-polar")
    return CatalogEntry("hd-polar", spec, _flags(True, True, True), _hd_oracles(d),
                        directions={"radial": np.eye(d)[0]}, params={"d": d})


def _h2n_oracles(n):
    d = 2 * n
    w2min = 1.0 / n - 1.0 / (2 * n - 1)
    D = d - 1.0 / (d - 1)
    o = {
        "r2": lambda **_: 1.0,
        "wprime2": lambda **_: 0.0,
        "w2_diag": lambda: w2min,
        "bg_rate2": lambda: float(d - 1),
        "new_rate2": lambda: (d - 1) * (1.0 - w2min / d),
        "refined_rate2": lambda: (d - 1) * (1.0 - w2min / D),
        "actual_rate": lambda: math.sqrt(n),
        "actual_rate2": lambda: float(n),
        "bg_exponent": lambda: math.sqrt(2 * n - 1),
        "theta_diag": lambda t: math.sqrt(n) * (1.0 / math.tanh(t / math.sqrt(n))) + (n - 1) / t,
    }
    if n == 2:
        o.update({
            "theta": lambda t, psi=math.pi / 4: h2xh2_theta(t, psi),
            "sigma2": lambda t, psi=math.pi / 4: h2xh2_sigma2(t, psi),
            "tr_sigma3": lambda t, psi=math.pi / 4: h2xh2_tr_sigma3(t, psi),
            "sigma_w": lambda t, psi=math.pi / 4: h2xh2_sigma_w(t, psi),
            "w2": lambda psi=math.pi / 4: h2xh2_w2(psi),
            "spectrum": lambda psi=math.pi / 4: sorted([math.cos(psi) ** 2, math.sin(psi) ** 2, 0.0],
                                                      reverse=True),
        })
    return o


def _make_h2n(params, name="h2n", n=None):
    if n is None:
        n = _int_param(params, "n", 2, 1)
    d = 2 * n
    spec = MetricSpec.from_jet(d, get_jet(H2N), kind=H2N, params={"n": n}, name=name)
    diag = np.zeros(d)
    diag[0::2] = 1.0
    directions = {"diag": diag, "plane": np.eye(d)[0]}

    def angle_map(psi, _d=d):
        X = np.zeros(_d)
        X[0], X[2] = math.cos(psi), math.sin(psi)
        return X

    return CatalogEntry(name, spec, _flags(True, True, True), _h2n_oracles(n), directions,
                        angle_map if n == 2 else None, params={"n": n})


def _make_h2xh2(params):
    return _make_h2n(params, name="h2xh2", n=2)


def _make_h2xh2_polar(params):
    spec = MetricSpec.from_jet(4, get_jet(H2N_POLAR), kind=H2N_POLAR,
                               base_point=np.array([1.0, 0.0, 1.0, 0.0]), name="h2xh2-polar")
    entry = _make_h2n(params, name="h2xh2-polar", n=2)
    entry.spec = spec
    return entry


def _make_squashed(params):
    c = params.get("c", 2.0)
    try:
        c = float(c)
    except (TypeError, ValueError):
        raise BadParams("c must be a number") from None
    if not math.isfinite(c) or c < 1.0:
        raise BadParams("squashed-h3 needs finite c >= 1")
    spec = MetricSpec.from_jet(3, get_jet(SQUASHED), kind=SQUASHED, params={"c": c}, param_array=np.array([c]),
                               name="squashed-h3")
    unsquashed = c == 1.0
    oracles = {
        "r2": lambda psi=0.0, phi=0.0: squashed_r2(c, psi, phi),
        "w2": lambda psi=0.0, phi=0.0: squashed_w2(c, psi, phi),
        "wprime2": lambda psi=0.0, phi=0.0: squashed_wprime2(c, psi, phi),
        "r2_max": lambda: c * (1 + c),
        "r2_min": lambda: 1 + c,
        "w2_x": lambda: 0.5 * c * c * (c - 1) ** 2,
        "wprime2_max": lambda: 2 * (c - 1) ** 2 * c * c,
        "bg_rate2": lambda: 2 * c * (1 + c),
        "new_rate2": lambda c=c: squashed_new_rate2(c),
        "rate_improvement_fraction": lambda c=c: squashed_improvement(c),
    }

    def angle_map(psi=0.0, phi=0.0):
        return np.array([math.cos(psi) * math.cos(phi), math.cos(psi) * math.sin(phi), math.sin(psi)])

    directions = {"x": np.eye(3)[0], "y": np.eye(3)[1], "z": np.eye(3)[2],
                  "diag-xy": np.array([1.0, 1.0, 0.0])}
    return CatalogEntry("squashed-h3", spec, _flags(True, unsquashed, unsquashed), oracles,
                        directions, angle_map, params={"c": c})


_REGISTRY = {
    "flat": _make_flat,
    "hd": _make_hd,
    "hd-polar": _make_hd_polar,
    "h2n": _make_h2n,
    "h2xh2": _make_h2xh2,
    "h2xh2-polar": _make_h2xh2_polar,
    "squashed-h3": _make_squashed,
}


def names() -> list[str]:
    return sorted(_REGISTRY)


def get(name: str, params: dict | None = None, **kw) -> CatalogEntry:
    """Look up a catalog metric; ``params`` and keyword arguments are merged."""
    if name not in _REGISTRY:
        raise UnknownMetric(f"unknown metric {name!r}; known: {', '.join(names())}")
    merged = dict(params or {})
    merged.update(kw)
    return _REGISTRY[name](merged)


def oracle_eval(entry: CatalogEntry, quantity: str, args: dict | None = None) -> float:
    if quantity not in entry.oracles:
        raise UnknownQuantity(f"{entry.name} has no oracle for {quantity!r}")
    return entry.oracles[quantity](**(args or {}))


def list_metrics() -> list[dict]:
    return [get(n).to_json() for n in names()]
