"""Hot numeric kernels.

Every kernel exists twice: a loop form (``*_loops``) that numba compiles, and a
numpy form (``*_np``) built on ``einsum``. The module-level names without a
suffix point at whichever form is active (see :mod:`geobound._accel`).

Index conventions: ``gam[a, b, c] = Gamma^a_bc``, ``riem[a, b, c, d] = R^a_bcd``
with ``R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db -
Gamma^a_de Gamma^e_cb``, and ``kap[a, d] = R^a_bcd X^b X^c``.
"""

from __future__ import annotations

import math
import types

import numpy as np

from ._accel import USE_NUMBA, jit
from .jets import jet_by_kind

# ---------------------------------------------------------------- numpy forms


def christoffel_np(g, dg):
    ginv = np.linalg.inv(g)
    low = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
    return np.einsum("ak,kbc->abc", ginv, low), ginv, low


def _dgamma_np(g, dg, d2g):
    gam, ginv, low = christoffel_np(g, dg)
    dginv = -np.einsum("ap,epq,qk->eak", ginv, dg, ginv)
    # dlow[e, k, b, c] = d_e Gamma_kbc
    dlow = 0.5 * (d2g.transpose(0, 2, 1, 3) + d2g.transpose(0, 2, 3, 1) - d2g)
    dgam = np.einsum("eak,kbc->eabc", dginv, low) + np.einsum("ak,ekbc->eabc", ginv, dlow)
    return gam, ginv, dgam


def riemann_np(g, dg, d2g):
    gam, _, dgam = _dgamma_np(g, dg, d2g)
    # dgam[e, a, b, c] = d_e Gamma^a_bc
    riem = dgam.transpose(1, 3, 0, 2) - dgam.transpose(1, 3, 2, 0)
    riem += np.einsum("ace,edb->abcd", gam, gam) - np.einsum("ade,ecb->abcd", gam, gam)
    return riem


def kappa_np(g, dg, d2g, X):
    """``(gam, kap)`` with ``kap[a, d] = R^a_bcd X^b X^c``."""
    gam, ginv, low = christoffel_np(g, dg)
    dginv = -np.einsum("ap,epq,qk->eak", ginv, dg, ginv)
    lowX = low @ X
    dlowX = 0.5 * (np.einsum("ebkc,c->ekb", d2g, X) + np.einsum("eckb,c->ekb", d2g, X)
                   - np.einsum("ekbc,c->ekb", d2g, X))
    # Q[e, a, d] = d_e Gamma^a_db X^b
    Q = np.einsum("eak,kd->ead", dginv, lowX) + np.einsum("ak,ekd->ead", ginv, dlowX)
    GX = gam @ X
    GXX = GX @ X
    kap = np.einsum("c,cad->ad", X, Q) - np.einsum("c,dac->ad", X, Q)
    kap += GX @ GX - np.einsum("ade,e->ad", gam, GXX)
    return gam, kap


def frame_kappa_np(g, kap, E):
    """Transverse block ``K_ij = e_i . g . kap . e_j`` for frame columns 1..d-1."""
    Et = E[:, 1:]
    K = Et.T @ (g @ kap) @ Et
    return 0.5 * (K + K.T)


# ----------------------------------------------------------------- loop forms


@jit
def christoffel_loops(g, dg):
    d = g.shape[0]
    ginv = np.linalg.inv(g)
    low = np.empty((d, d, d))
    for k in range(d):
        for b in range(d):
            for c in range(d):
                low[k, b, c] = 0.5 * (dg[b, k, c] + dg[c, k, b] - dg[k, b, c])
    gam = np.zeros((d, d, d))
    for a in range(d):
        for k in range(d):
            gak = ginv[a, k]
            if gak == 0.0:
                continue
            for b in range(d):
                for c in range(d):
                    gam[a, b, c] += gak * low[k, b, c]
    return gam, ginv, low


@jit
def _dginv_loops(ginv, dg):
    d = ginv.shape[0]
    tmp = np.zeros((d, d, d))
    for e in range(d):
        for a in range(d):
            for q in range(d):
                s = 0.0
                for p in range(d):
                    s += ginv[a, p] * dg[e, p, q]
                tmp[e, a, q] = s
    out = np.zeros((d, d, d))
    for e in range(d):
        for a in range(d):
            for k in range(d):
                s = 0.0
                for q in range(d):
                    s += tmp[e, a, q] * ginv[q, k]
                out[e, a, k] = -s
    return out


@jit
def riemann_loops(g, dg, d2g):
    d = g.shape[0]
    gam, ginv, low = christoffel_loops(g, dg)
    dginv = _dginv_loops(ginv, dg)
    dgam = np.zeros((d, d, d, d))
    for e in range(d):
        for k in range(d):
            for b in range(d):
                for c in range(d):
                    dl = 0.5 * (d2g[e, b, k, c] + d2g[e, c, k, b] - d2g[e, k, b, c])
                    lw = low[k, b, c]
                    for a in range(d):
                        dgam[e, a, b, c] += dginv[e, a, k] * lw + ginv[a, k] * dl
    riem = np.empty((d, d, d, d))
    for a in range(d):
        for b in range(d):
            for c in range(d):
                for dd in range(d):
                    s = dgam[c, a, dd, b] - dgam[dd, a, c, b]
                    for e in range(d):
                        s += gam[a, c, e] * gam[e, dd, b] - gam[a, dd, e] * gam[e, c, b]
                    riem[a, b, c, dd] = s
    return riem


@jit
def kappa_loops(g, dg, d2g, X):
    d = g.shape[0]
    gam, ginv, low = christoffel_loops(g, dg)
    dginv = _dginv_loops(ginv, dg)
    lowX = np.zeros((d, d))
    for k in range(d):
        for b in range(d):
            s = 0.0
            for c in range(d):
                s += low[k, b, c] * X[c]
            lowX[k, b] = s
    dlowX = np.zeros((d, d, d))
    for e in range(d):
        for k in range(d):
            for b in range(d):
                s = 0.0
                for c in range(d):
                    s += (d2g[e, b, k, c] + d2g[e, c, k, b] - d2g[e, k, b, c]) * X[c]
                dlowX[e, k, b] = 0.5 * s
    Q = np.zeros((d, d, d))
    for e in range(d):
        for a in range(d):
            for dd in range(d):
                s = 0.0
                for k in range(d):
                    s += dginv[e, a, k] * lowX[k, dd] + ginv[a, k] * dlowX[e, k, dd]
                Q[e, a, dd] = s
    GX = np.zeros((d, d))
    for a in range(d):
        for e in range(d):
            s = 0.0
            for c in range(d):
                s += gam[a, c, e] * X[c]
            GX[a, e] = s
    GXX = np.zeros(d)
    for e in range(d):
        s = 0.0
        for b in range(d):
            s += GX[e, b] * X[b]
        GXX[e] = s
    kap = np.zeros((d, d))
    for a in range(d):
        for dd in range(d):
            s = 0.0
            for c in range(d):
                s += X[c] * (Q[c, a, dd] - Q[dd, a, c])
            for e in range(d):
                s += GX[a, e] * GX[e, dd] - gam[a, dd, e] * GXX[e]
            kap[a, dd] = s
    return gam, kap


@jit
def frame_kappa_loops(g, kap, E):
    d = g.shape[0]
    n = d - 1
    gk = np.zeros((d, d))
    for a in range(d):
        for dd in range(d):
            s = 0.0
            for p in range(d):
                s += g[a, p] * kap[p, dd]
            gk[a, dd] = s
    K = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for a in range(d):
                ea = E[a, i + 1]
                if ea == 0.0:
                    continue
                for dd in range(d):
                    s += ea * gk[a, dd] * E[dd, j + 1]
            K[i, j] = s
    for i in range(n):
        for j in range(i + 1, n):
            m = 0.5 * (K[i, j] + K[j, i])
            K[i, j] = m
            K[j, i] = m
    return K


# ------------------------------------------------------------- active forms

if USE_NUMBA:
    christoffel = christoffel_loops
    riemann = riemann_loops
    kappa = kappa_loops
    frame_kappa = frame_kappa_loops
else:
    christoffel = christoffel_np
    riemann = riemann_np
    kappa = kappa_np
    frame_kappa = frame_kappa_np


# -------------------------------------------------------------- flow stepper
#
# State vector layout (d = dimension, n = d - 1):
#   x[d] | v[d] | E[d*d] (frame columns, E[:, 0] = v) | M[n*n] | T[n*n] | Tdot[n*n]


def state_size(d):
    n = d - 1
    return 2 * d + d * d + 3 * n * n


def _flow_rhs_body(g, dg, d2g, y, d):
    n = d - 1
    v = y[d:2 * d]
    E = y[2 * d:2 * d + d * d].reshape((d, d))
    o = 2 * d + d * d
    M = y[o:o + n * n].reshape((n, n))
    T = y[o + n * n:o + 2 * n * n].reshape((n, n))
    Td = y[o + 2 * n * n:o + 3 * n * n].reshape((n, n))

    gam, kap = kappa(g, dg, d2g, v)
    K = frame_kappa(g, kap, E)

    dy = np.empty_like(y)
    dy[0:d] = v
    # dv^a = -Gamma^a_bc v^b v^c ; dE^a_i = -Gamma^a_bc v^b E^c_i
    Gv = np.zeros((d, d))
    for a in range(d):
        for c in range(d):
            s = 0.0
            for b in range(d):
                s += gam[a, b, c] * v[b]
            Gv[a, c] = s
    dE = -(Gv @ E)
    dy[d:2 * d] = -(Gv @ v)
    dy[2 * d:2 * d + d * d] = dE.reshape(d * d)
    dy[o:o + n * n] = (K - M @ M).reshape(n * n)
    dy[o + n * n:o + 2 * n * n] = Td.reshape(n * n)
    dy[o + 2 * n * n:o + 3 * n * n] = (K @ T).reshape(n * n)
    return dy, K


def flow_rhs(src, params, y, d):
    """Time derivative of the packed flow state and the frame tidal block.

    ``src`` is a catalog chart id here; the pure-Python twin below takes a
    jet callable instead.
    """
    g, dg, d2g = jet_by_kind(src, y[0:d], params)
    return _flow_rhs_body(g, dg, d2g, y, d)


def flow_rhs_callable(src, params, y, d):
    g, dg, d2g = src(y[0:d], params)
    return _flow_rhs_body(g, dg, d2g, y, d)


def integrate_loop(src, params, y0, d, t0, dt, n_steps, step_ratio, theta_cap):
    """Fixed-grid RK4 with substeps while ``dt * |theta|`` is large.

    Returns ``(Y, Ks, n_done, status)``; ``status`` is 0 on success, 1 when
    ``|theta|`` exceeded the cap. A focal point is a pole of M; the substep
    rule shrinks steps in proportion to the distance to the pole, so theta
    always reaches the cap there.
    """
    n = d - 1
    o = 2 * d + d * d
    size = y0.shape[0]
    Y = np.empty((n_steps + 1, size))
    Ks = np.empty((n_steps + 1, n, n))
    Y[0] = y0
    y = y0.copy()
    status = 0
    n_done = n_steps
    for k in range(n_steps):
        theta = 0.0
        for i in range(n):
            theta += y[o + i * n + i]
        nsub = 1
        if step_ratio > 0.0:
            nsub = max(1, int(math.ceil(dt * abs(theta) / step_ratio)))
        h = dt / nsub
        for s in range(nsub):
            k1, K1 = flow_rhs(src, params, y, d)
            if s == 0:
                Ks[k] = K1
            k2, _ = flow_rhs(src, params, y + 0.5 * h * k1, d)
            k3, _ = flow_rhs(src, params, y + 0.5 * h * k2, d)
            k4, _ = flow_rhs(src, params, y + h * k3, d)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        Y[k + 1] = y
        theta = 0.0
        for i in range(n):
            theta += y[o + i * n + i]
        if not (abs(theta) <= theta_cap):
            status = 1
            n_done = k + 1
            break
    _, Klast = flow_rhs(src, params, Y[n_done], d)
    Ks[n_done] = Klast
    return Y[:n_done + 1], Ks[:n_done + 1], n_done, status


# Same loop, bound to a Python jet callable instead of a chart id. Used for
# metrics that are not in the catalog.
integrate_loop_callable = types.FunctionType(
    integrate_loop.__code__,
    {**globals(), "flow_rhs": flow_rhs_callable},
    "integrate_loop_callable",
)


def rk4_transport(jet, params, x, v, E, h):
    """One RK4 step of the geodesic + parallel-frame equations over ``h``."""

    def rhs(x_, v_, E_):
        g, dg, _ = jet(x_, params)
        gam = christoffel(g, dg)[0]
        Gv = np.einsum("abc,b->ac", gam, v_)
        return v_, -(Gv @ v_), -(Gv @ E_)

    a1 = rhs(x, v, E)
    a2 = rhs(x + 0.5 * h * a1[0], v + 0.5 * h * a1[1], E + 0.5 * h * a1[2])
    a3 = rhs(x + 0.5 * h * a2[0], v + 0.5 * h * a2[1], E + 0.5 * h * a2[2])
    a4 = rhs(x + h * a3[0], v + h * a3[1], E + h * a3[2])
    return tuple(s0 + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
                 for s0, b1, b2, b3, b4 in zip((x, v, E), a1, a2, a3, a4))



_flow_rhs_body = jit(_flow_rhs_body)
flow_rhs = jit(flow_rhs)
integrate_loop = jit(integrate_loop)
