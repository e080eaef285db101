"""Analytic metric jets ``(g, dg, d2g)`` for the catalog charts.

Each jet has the signature ``jet(p, params)``. ``jet_by_kind`` switches on an
integer chart id so compiled integrators never need function arguments,
which keeps them cacheable.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import jit

FLAT, HORO, H2N, H2N_POLAR, HD_POLAR, SQUASHED = range(6)



def _flat_jet(p, prm):
    d = p.shape[0]
    return np.eye(d), np.zeros((d, d, d)), np.zeros((d, d, d, d))


def _horo_jet(p, prm):
    d = p.shape[0]
    g = np.eye(d)
    dg = np.zeros((d, d, d))
    d2g = np.zeros((d, d, d, d))
    e2 = math.exp(2.0 * p[0])
    for i in range(1, d):
        g[i, i] = e2
        dg[0, i, i] = 2.0 * e2
        d2g[0, 0, i, i] = 4.0 * e2
    return g, dg, d2g


def _h2n_jet(p, prm):
    d = p.shape[0]
    g = np.eye(d)
    dg = np.zeros((d, d, d))
    d2g = np.zeros((d, d, d, d))
    for k in range(d // 2):
        z = 2 * k
        y = z + 1
        e2 = math.exp(2.0 * p[z])
        g[y, y] = e2
        dg[z, y, y] = 2.0 * e2
        d2g[z, z, y, y] = 4.0 * e2
    return g, dg, d2g


def _h2n_polar_jet(p, prm):
    d = p.shape[0]
    g = np.eye(d)
    dg = np.zeros((d, d, d))
    d2g = np.zeros((d, d, d, d))
    for k in range(d // 2):
        r = 2 * k
        a = r + 1
        s = math.sinh(p[r])
        g[a, a] = s * s
        dg[r, a, a] = math.sinh(2.0 * p[r])
        d2g[r, r, a, a] = 2.0 * math.cosh(2.0 * p[r])
    return g, dg, d2g


def _hd_polar_jet(p, prm):
    d = p.shape[0]
    g = np.eye(d)
    dg = np.zeros((d, d, d))
    d2g = np.zeros((d, d, d, d))
    t = p[0]
    sh = math.sinh(t)
    coth = math.cosh(t) / sh
    ctt = 2.0 * math.cosh(2.0 * t) / (sh * sh)
    for k in range(1, d):
        f = sh * sh
        for j in range(1, k):
            sj = math.sin(p[j])
            f *= sj * sj
        g[k, k] = f
        dg[0, k, k] = 2.0 * coth * f
        d2g[0, 0, k, k] = ctt * f
        for j in range(1, k):
            cj = math.cos(p[j]) / math.sin(p[j])
            dg[j, k, k] = 2.0 * cj * f
            d2g[0, j, k, k] = 4.0 * coth * cj * f
            d2g[j, 0, k, k] = 4.0 * coth * cj * f
            sj = math.sin(p[j])
            d2g[j, j, k, k] = 2.0 * math.cos(2.0 * p[j]) / (sj * sj) * f
            for i in range(1, k):
                if i != j:
                    ci = math.cos(p[i]) / math.sin(p[i])
                    d2g[i, j, k, k] = 4.0 * ci * cj * f
    return g, dg, d2g


def _squashed_jet(p, prm):
    c = prm[0]
    g = np.eye(3)
    dg = np.zeros((3, 3, 3))
    d2g = np.zeros((3, 3, 3, 3))
    z = p[2]
    ex = math.exp(2.0 * c * z)
    ey = math.exp(2.0 * z)
    g[0, 0] = ex
    g[1, 1] = ey
    dg[2, 0, 0] = 2.0 * c * ex
    dg[2, 1, 1] = 2.0 * ey
    d2g[2, 2, 0, 0] = 4.0 * c * c * ex
    d2g[2, 2, 1, 1] = 4.0 * ey
    return g, dg, d2g


_flat_jet = jit(_flat_jet)
_horo_jet = jit(_horo_jet)
_h2n_jet = jit(_h2n_jet)
_h2n_polar_jet = jit(_h2n_polar_jet)
_hd_polar_jet = jit(_hd_polar_jet)
_squashed_jet = jit(_squashed_jet)

_BY_KIND = (_flat_jet, _horo_jet, _h2n_jet, _h2n_polar_jet, _hd_polar_jet, _squashed_jet)


@jit
def jet_by_kind(kind, p, prm):
    if kind == HORO:
        return _horo_jet(p, prm)
    if kind == H2N:
        return _h2n_jet(p, prm)
    if kind == H2N_POLAR:
        return _h2n_polar_jet(p, prm)
    if kind == HD_POLAR:
        return _hd_polar_jet(p, prm)
    if kind == SQUASHED:
        return _squashed_jet(p, prm)
    return _flat_jet(p, prm)


def get_jet(kind):
    return _BY_KIND[kind]
