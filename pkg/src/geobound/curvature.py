"""Christoffel symbols, Riemann and Ricci tensors, tidal tensors, direction scans.

Sign conventions: ``kappa_ad = R_abcd X^b X^c`` is minus the matrix of
sectional curvatures of planes containing X, so it is positive semidefinite on
spaces of nonpositive curvature. ``R2(X) = -Ric(X, X) = Tr_h kappa`` and
``W = kappa - Tr_h(kappa)/(d-1) * h`` with ``h = g - X X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import NonUnitDirection, SingularMetric
from .metric import (MetricSpec, TangentVector, inv_sqrt, jet_at, metric_at, metric_derivs,
                     python_jet, sphere_array)

UNIT_TOL = 1e-8
TIE_TOL = 1e-9


@dataclass
class CurvatureData:
    gamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    at: np.ndarray


@dataclass
class TidalData:
    kappa: np.ndarray
    w: np.ndarray
    w_prime: np.ndarray
    h: np.ndarray
    direction: TangentVector
    r2: float
    w2: float
    wprime2: float


def _check_conditioning(g):
    c = np.linalg.cond(g)
    if not np.isfinite(c) or c > 1e12:
        raise SingularMetric(f"metric condition number {c:.3g} exceeds 1e12")


def christoffel(spec: MetricSpec, p) -> np.ndarray:
    g = metric_at(spec, p)
    _check_conditioning(g)
    return kernels.christoffel_np(g, metric_derivs(spec, p))[0]


def riemann_ricci(spec: MetricSpec, p) -> CurvatureData:
    p = np.asarray(p, dtype=float)
    g, dg, d2g = jet_at(spec, p)
    _check_conditioning(g)
    gam = kernels.christoffel_np(g, dg)[0]
    riem = kernels.riemann_np(g, dg, d2g)
    ricci = np.einsum("abad->bd", riem)
    return CurvatureData(gam, riem, 0.5 * (ricci + ricci.T), p)


def _as_vec(X) -> np.ndarray:
    return np.asarray(X, dtype=float).reshape(-1)


def _check_unit(g, X):
    nrm = float(X @ g @ X)
    if abs(nrm - 1.0) > UNIT_TOL:
        raise NonUnitDirection(f"g(X, X) = {nrm:.12g}, expected 1")


def orthonormal_frame(g, X) -> np.ndarray:
    """Columns form a g-orthonormal basis with first column X."""
    d = len(X)
    E = np.empty((d, d))
    E[:, 0] = X / np.sqrt(X @ g @ X)
    # complete with the coordinate axes least aligned with X
    order = np.argsort(np.abs(g @ X))
    k = 1
    for idx in order:
        if k == d:
            break
        v = np.zeros(d)
        v[idx] = 1.0
        for j in range(k):
            v -= (E[:, j] @ g @ v) * E[:, j]
        nv = np.sqrt(v @ g @ v)
        if nv < 1e-8:
            continue
        E[:, k] = v / nv
        k += 1
    return E


def _lowered_w(g, dg, d2g, X):
    """``(kappa_low, W_low, h, R2)`` at a point for direction X (coordinate components)."""
    d = len(X)
    kap = kernels.kappa_np(g, dg, d2g, X)[1]
    kl = g @ kap
    kl = 0.5 * (kl + kl.T)
    r2 = float(np.trace(kap))
    Xl = g @ X
    h = g - np.outer(Xl, Xl)
    return kl, kl - r2 / (d - 1) * h, h, r2


def _trace2(A, ginv):
    return float(np.einsum("ab,bc,cd,da->", A, ginv, A, ginv))


def tidal_derivative(spec: MetricSpec, p, X, eps: float = 1e-4) -> np.ndarray:
    """``X^c nabla_c W_ab`` by parallel-transporting a frame ``+-eps`` along the geodesic."""
    p = np.asarray(p, dtype=float)
    X = _as_vec(X)
    g = metric_at(spec, p)
    _check_unit(g, X)
    jet = python_jet(spec)
    E = orthonormal_frame(g, X)
    frames = []
    for h in (eps, -eps):
        x, v, Eh = kernels.rk4_transport(jet, spec.param_array, p, X, E, h)
        gq, dgq, d2gq = jet_at(spec, x)
        W = _lowered_w(gq, dgq, d2gq, v)[1]
        frames.append(Eh.T @ W @ Eh)
    dF = (frames[0] - frames[1]) / (2 * eps)
    dF = 0.5 * (dF + dF.T)
    gE = g @ E
    return gE @ dF @ gE.T


def tidal(spec: MetricSpec, p, X, with_derivative: bool = True) -> TidalData:
    p = np.asarray(p, dtype=float)
    X = _as_vec(X)
    g, dg, d2g = jet_at(spec, p)
    _check_unit(g, X)
    ginv = np.linalg.inv(g)
    kl, W, h, r2 = _lowered_w(g, dg, d2g, X)
    if with_derivative:
        Wp = tidal_derivative(spec, p, X)
    else:
        Wp = np.zeros_like(W)
    return TidalData(kl, W, Wp, h, TangentVector(X, p), r2, _trace2(W, ginv), _trace2(Wp, ginv))


def sectional_spectrum(spec: MetricSpec, p, X) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    X = _as_vec(X)
    g, dg, d2g = jet_at(spec, p)
    _check_unit(g, X)
    kl = _lowered_w(g, dg, d2g, X)[0]
    E = orthonormal_frame(g, X)[:, 1:]
    K = E.T @ kl @ E
    return np.sort(np.linalg.eigvalsh(0.5 * (K + K.T)))[::-1]


# --------------------------------------------------------------- direction field


def _lowered_riemann(spec, p):
    g, dg, d2g = jet_at(spec, p)
    return np.einsum("af,fbcd->abcd", g, kernels.riemann_np(g, dg, d2g))


class DirectionField:
    """Tidal scalars at the base point as polynomials in a Euclidean unit vector ``u``.

    Tensors are stored in an orthonormal basis ``L`` (``L.T g L = I``), so the
    coordinate direction is ``X = L u``. Riemann and its covariant derivative
    are evaluated once; every scalar and its sphere gradient is then a cheap
    contraction, vectorized over a batch of directions.
    """

    def __init__(self, spec: MetricSpec, p=None, fd_eps: Optional[float] = None):
        p = spec.base_point if p is None else np.asarray(p, dtype=float)
        self.spec = spec
        self.p = p
        g, dg, _ = jet_at(spec, p)
        _check_conditioning(g)
        d = spec.dim
        self.d = d
        self.g = g
        self.L = inv_sqrt(g)
        gam = kernels.christoffel_np(g, dg)[0]
        Rl = _lowered_riemann(spec, p)
        if fd_eps is None:
            # the metric varies on the length scale 1/|Gamma|
            scale = max(1.0, float(np.max(np.abs(gam))))
            fd_eps = (1e-3 if spec.jet is not None else 1e-2) / scale
        eps = fd_eps
        dR = np.empty((d,) + Rl.shape)
        for k in range(d):
            e = np.zeros(d)
            e[k] = eps
            r = [_lowered_riemann(spec, p + s * e) for s in (2, 1, -1, -2)]
            dR[k] = (-r[0] + 8 * r[1] - 8 * r[2] + r[3]) / (12 * eps)
        nR = (dR
              - np.einsum("fea,fbcd->eabcd", gam, Rl)
              - np.einsum("feb,afcd->eabcd", gam, Rl)
              - np.einsum("fec,abfd->eabcd", gam, Rl)
              - np.einsum("fed,abcf->eabcd", gam, Rl))
        L = self.L
        self.R = np.einsum("abcd,ai,bj,ck,dl->ijkl", Rl, L, L, L, L)
        self.DR = np.einsum("eabcd,em,ai,bj,ck,dl->mijkl", nR, L, L, L, L, L)
        self.ricci = np.einsum("ijil->jl", self.R)

    # coordinate <-> orthonormal directions
    def to_coords(self, u):
        return np.asarray(u) @ self.L.T

    def to_unit(self, X):
        u = np.linalg.solve(self.L, _as_vec(X))
        return u / np.linalg.norm(u)

    def _batch(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return u / np.linalg.norm(u, axis=1, keepdims=True)

    def kappa(self, u):
        u = self._batch(u)
        return np.einsum("ibcj,nb,nc->nij", self.R, u, u)

    def kappa_prime(self, u):
        u = self._batch(u)
        return np.einsum("eibcj,ne,nb,nc->nij", self.DR, u, u, u)

    def r2(self, u):
        return np.einsum("nii->n", self.kappa(u))

    def _trw2(self, A):
        tr = np.einsum("nii->n", A)
        return np.einsum("nij,nij->n", A, A) - tr ** 2 / (self.d - 1)

    def w2(self, u):
        return self._trw2(self.kappa(u))

    def wprime2(self, u):
        return self._trw2(self.kappa_prime(u))

    def values(self, u):
        return self.r2(u), self.w2(u), self.wprime2(u)

    # sphere gradients (tangential part of the Euclidean gradient)
    def _project(self, u, G):
        return G - np.sum(G * u, axis=1, keepdims=True) * u

    def grad_r2(self, u):
        u = self._batch(u)
        return self._project(u, -2.0 * u @ self.ricci)

    def grad_w2(self, u):
        u = self._batch(u)
        K = self.kappa(u)
        tr = np.einsum("nii->n", K)
        A = K - (tr / (self.d - 1))[:, None, None] * np.eye(self.d)
        # dK_ij/du_m = R_imcj u_c + R_ibmj u_b
        G = 2.0 * (np.einsum("nij,imcj,nc->nm", A, self.R, u) + np.einsum("nij,ibmj,nb->nm", A, self.R, u))
        return self._project(u, G)

    def grad_wprime2(self, u):
        u = self._batch(u)
        K = self.kappa_prime(u)
        tr = np.einsum("nii->n", K)
        A = K - (tr / (self.d - 1))[:, None, None] * np.eye(self.d)
        D = self.DR
        G = 2.0 * (np.einsum("nij,mibcj,nb,nc->nm", A, D, u, u)
                   + np.einsum("nij,eimcj,ne,nc->nm", A, D, u, u)
                   + np.einsum("nij,eibmj,ne,nb->nm", A, D, u, u))
        return self._project(u, G)

    def r2_extrema(self):
        """Exact extrema of ``R2 = -Ric(u, u)`` from the eigenvectors of ``-Ric``."""
        w, V = np.linalg.eigh(-self.ricci)
        return (float(w[-1]), V[:, -1]), (float(w[0]), V[:, 0])


# ---------------------------------------------------------------- sphere search


def _numeric_grad(f, u, h=1e-6):
    u = np.atleast_2d(u)
    G = np.zeros_like(u)
    for m in range(u.shape[1]):
        e = np.zeros(u.shape[1])
        e[m] = h
        G[:, m] = (f(u + e) - f(u - e)) / (2 * h)
    return G - np.sum(G * u, axis=1, keepdims=True) * u


def sphere_ascent(f: Callable, u0, grad: Optional[Callable] = None, tol: float = 1e-12,
                  max_iter: int = 200, maximize: bool = True):
    """Projected gradient ascent on the unit sphere with Armijo backtracking.

    ``f`` and ``grad`` take a batch of unit vectors. Returns ``(u, value, grad_norm)``;
    stops once a step moves ``u`` by less than ``tol`` or the gradient vanishes.
    """
    sgn = 1.0 if maximize else -1.0

    def F(v):
        return sgn * np.asarray(f(v / np.linalg.norm(v, axis=-1, keepdims=True)))

    def dF(v):
        if grad is not None:
            return sgn * grad(v)
        return sgn * _numeric_grad(lambda w: np.asarray(f(w / np.linalg.norm(w, axis=-1, keepdims=True))), v)

    u = np.asarray(u0, dtype=float)
    u = u / np.linalg.norm(u)
    val = float(F(u[None])[0])
    step = 1.0
    gn = 0.0
    for _ in range(max_iter):
        G = dF(u[None])[0]
        gn = float(np.linalg.norm(G))
        if gn < 1e-14:
            break
        step = min(step * 4.0, 1.0 / max(gn, 1e-300))
        improved = False
        while step * gn > 1e-16:
            cand = u + step * G
            cand /= np.linalg.norm(cand)
            cv = float(F(cand[None])[0])
            if cv >= val + 1e-4 * step * gn * gn:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        moved = float(np.linalg.norm(cand - u))
        u, val = cand, cv
        if moved < tol:
            break
    G = dF(u[None])[0]
    return u, sgn * val, float(np.linalg.norm(G))


def _seeds(values, k, maximize):
    order = np.argsort(-values if maximize else values, kind="stable")
    return order[:k]


def optimize_on_sphere(f, grid, grad=None, maximize=True, n_seeds=8, tol=1e-12, max_iter=200):
    """Grid search then refinement from the best ``n_seeds`` grid points.

    Returns ``(u_best, value, ties)`` where ``ties`` lists refined optima within
    ``TIE_TOL`` of the best, in grid order.
    """
    vals = np.asarray(f(grid))
    cands = []
    for i in _seeds(vals, n_seeds, maximize):
        u, v, _ = sphere_ascent(f, grid[i], grad, tol=tol, max_iter=max_iter, maximize=maximize)
        cands.append((i, u, v))
    best = max(cands, key=lambda c: c[2]) if maximize else min(cands, key=lambda c: c[2])
    ties = [c[1] for c in sorted(cands, key=lambda c: c[0]) if abs(c[2] - best[2]) <= TIE_TOL]
    # lowest grid index among tied candidates
    first = min((c for c in cands if abs(c[2] - best[2]) <= TIE_TOL), key=lambda c: c[0])
    return first[1], float(best[2]), ties


@dataclass
class DirectionScan:
    r2_max: float
    r2_min: float
    w2_min: float
    w2_at_argmax_r2: float
    wprime2_max: float
    argmax_r2: TangentVector
    argmin_r2: TangentVector
    argmin_w2: TangentVector
    argmax_wprime2: TangentVector
    n: int
    refine_tol: float
    direction_field: DirectionField = field(repr=False)
    grid: np.ndarray = field(repr=False, default=None)
    ties: dict = field(default_factory=dict, repr=False)

    def to_json(self):
        return {
            "r2_max": self.r2_max, "r2_min": self.r2_min, "w2_min": self.w2_min,
            "w2_at_argmax_r2": self.w2_at_argmax_r2, "wprime2_max": self.wprime2_max,
            "argmax_r2": self.argmax_r2.comps.tolist(), "argmin_w2": self.argmin_w2.comps.tolist(),
            "argmax_wprime2": self.argmax_wprime2.comps.tolist(), "n": self.n,
            "refine_tol": self.refine_tol,
        }


def unit_grid(d: int, n: int) -> np.ndarray:
    return sphere_array(np.eye(d), n)


def scan_directions(spec: MetricSpec, n: Optional[int] = None, refine_tol: float = 1e-12,
                    dfield: Optional[DirectionField] = None) -> DirectionScan:
    d = spec.dim
    n = 64 * d * d if n is None else int(n)
    if n < 4 * d * d:
        raise ValueError(f"scan needs n >= 4 d^2 = {4 * d * d}")
    F = dfield if dfield is not None else DirectionField(spec)
    grid = unit_grid(d, n)
    (r2max, umax), (r2min, umin) = F.r2_extrema()
    if abs(r2max - r2min) <= TIE_TOL:
        # isotropic Ricci: every direction is extremal, report the first grid point
        umax = umin = grid[0]
    w2_u, w2_min, w2_ties = optimize_on_sphere(F.w2, grid, F.grad_w2, maximize=False, tol=refine_tol)
    wp_u, wp_max, wp_ties = optimize_on_sphere(F.wprime2, grid, F.grad_wprime2, maximize=True,
                                               tol=refine_tol)
    w2_min = max(w2_min, 0.0)
    wp_max = max(wp_max, 0.0)
    tv = lambda u: TangentVector(F.to_coords(u), F.p)
    return DirectionScan(
        r2_max=r2max, r2_min=r2min,
        w2_min=w2_min, w2_at_argmax_r2=float(F.w2(umax)[0]), wprime2_max=wp_max,
        argmax_r2=tv(umax), argmin_r2=tv(umin), argmin_w2=tv(w2_u), argmax_wprime2=tv(wp_u),
        n=n, refine_tol=refine_tol, direction_field=F, grid=grid,
        ties={"w2_min": [tv(u) for u in w2_ties], "wprime2_max": [tv(u) for u in wp_ties]},
    )
