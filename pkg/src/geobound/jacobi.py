"""Scalar Jacobi equations ``j'' = kappa(t) j`` with ``j(0) = 0, j'(0) = 1``.

Solutions that reach zero stay at zero afterwards. Solvers are vectorized over
a batch of schedules so randomized lemma checks run as one array computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

BISECT_TOL = 1e-10


@dataclass
class KappaSchedule:
    fn: Callable
    label: str = ""
    breakpoints: tuple = ()

    def __call__(self, t):
        return self.fn(t)


def constant(k: float) -> KappaSchedule:
    k = float(k)
    return KappaSchedule(lambda t, _k=k: np.full(np.shape(t), _k) if np.ndim(t) else _k,
                         label=f"const({k:g})")


def average_pair(k1: KappaSchedule, k2: KappaSchedule) -> KappaSchedule:
    return KappaSchedule(lambda t: 0.5 * (k1(t) + k2(t)), label=f"avg({k1.label},{k2.label})",
                         breakpoints=tuple(sorted(set(k1.breakpoints) | set(k2.breakpoints))))


class FourierBatch:
    """``B`` random smooth schedules ``c0 + sum_k a_k cos(w_k t) + b_k sin(w_k t)``."""

    def __init__(self, rng: np.random.Generator, size: int, n_terms: int = 3,
                 offset=(-1.0, 3.0), amp: float = 1.0, period: float = 3.0):
        self.c0 = rng.uniform(*offset, size=size)
        self.a = rng.uniform(-amp, amp, size=(size, n_terms))
        self.b = rng.uniform(-amp, amp, size=(size, n_terms))
        self.w = 2 * np.pi * np.arange(1, n_terms + 1) / period

    def __len__(self):
        return len(self.c0)

    def __call__(self, t):
        wt = self.w * t
        return self.c0 + self.a @ np.cos(wt) + self.b @ np.sin(wt)

    def schedule(self, i: int) -> KappaSchedule:
        c0, a, b, w = self.c0[i], self.a[i], self.b[i], self.w
        return KappaSchedule(lambda t: c0 + np.cos(np.multiply.outer(t, w)) @ a
                             + np.sin(np.multiply.outer(t, w)) @ b, label=f"fourier[{i}]")


@dataclass
class JacobiSolution:
    t: np.ndarray
    j: np.ndarray
    jp: np.ndarray
    stuck_at: Optional[float] = None
    label: str = ""


def _rk4(f, t, h, j, jp):
    k1j, k1p = jp, f(t) * j
    k2j, k2p = jp + 0.5 * h * k1p, f(t + 0.5 * h) * (j + 0.5 * h * k1j)
    k3j, k3p = jp + 0.5 * h * k2p, f(t + 0.5 * h) * (j + 0.5 * h * k2j)
    k4j, k4p = jp + h * k3p, f(t + h) * (j + h * k3j)
    return (j + h / 6 * (k1j + 2 * k2j + 2 * k3j + k4j),
            jp + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p))


def _locate_zero(f, t, h, j, jp, idx):
    """Time of the zero of component ``idx`` inside the step ``[t, t + h]``, by bisection."""
    def fi(s):
        return np.atleast_1d(f(s))[idx]

    lo, hi = 0.0, h
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        jm, _ = _rk4(fi, t, mid, j, jp)
        if jm > 0:
            lo = mid
        else:
            hi = mid
    return t + hi


def march(grid: np.ndarray, pick: Callable[[int], Callable], size: int, record: bool = True,
          on_step: Optional[Callable] = None):
    """RK4 over ``grid`` for ``size`` equations at once with the stick-at-zero rule.

    ``pick(k)`` returns the coefficient function (``t -> (size,)``) used on
    step ``k``. Returns ``(J, JP, stuck)``; ``J``/``JP`` are ``(len(grid), size)``
    when ``record`` else final values only, and ``stuck`` holds stick times
    (``nan`` if never).
    """
    j = np.zeros(size)
    jp = np.ones(size)
    stuck = np.full(size, np.nan)
    if record:
        J = np.empty((len(grid), size))
        JP = np.empty((len(grid), size))
        J[0], JP[0] = j, jp
    for k in range(len(grid) - 1):
        t, h = grid[k], grid[k + 1] - grid[k]
        f = pick(k)
        jn, jpn = _rk4(f, t, h, j, jp)
        hit = (j > 0) & (jn <= 0)
        if np.any(hit):
            for i in np.flatnonzero(hit):
                stuck[i] = _locate_zero(f, t, h, j[i], jp[i], i)
            jn = np.where(hit, 0.0, jn)
            jpn = np.where(hit, 0.0, jpn)
        j, jp = jn, jpn
        if record:
            J[k + 1], JP[k + 1] = j, jp
        if on_step is not None:
            on_step(grid[k + 1], j, jp)
    if record:
        return J, JP, stuck
    return j, jp, stuck


def _grid(t_end, dt):
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    n = max(1, int(math.ceil(t_end / dt - 1e-9)))
    return np.linspace(0.0, t_end, n + 1)


def solve_jacobi(kappa: KappaSchedule, t_end: float, dt: float = 1e-3) -> JacobiSolution:
    grid = _grid(t_end, dt)
    J, JP, stuck = march(grid, lambda k: (lambda t: np.atleast_1d(kappa(t))), 1)
    s = float(stuck[0])
    return JacobiSolution(grid, J[:, 0], JP[:, 0], None if math.isnan(s) else s, kappa.label)


# -------------------------------------------------------------- lemma checks


@dataclass
class LemmaResult:
    ratio_ok: bool
    product_ok: bool
    min_margin: float
    ratio_margin: float
    product_margin: float
    events: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.ratio_ok, self.product_ok, self.min_margin))


def _rel(a, b):
    return (a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)


def lemma_margins_batch(k1, k2, t_end: float, dt: float = 1e-3, tol: float = 1e-10):
    """Running minimum of the relative lemma margins for a batch of schedule pairs.

    ``k1`` and ``k2`` map ``t`` to ``(B,)`` arrays. The ratio inequality is
    only tested while all three solutions are positive; after anything sticks,
    only ``j_av^2 >= j1 j2`` is tested. Returns ``(ratio_min, product_min, events)``
    where ``events`` lists ``(trial, t)`` for ``j_av`` sticking while ``j1 j2 > 0``.
    """
    B = len(np.atleast_1d(k1(0.0)))
    grid = _grid(t_end, dt)

    def f(t):
        a, b = k1(t), k2(t)
        return np.concatenate([a, b, 0.5 * (a + b)])

    ratio_min = np.full(B, np.inf)
    prod_min = np.full(B, np.inf)
    events = []
    flagged = np.zeros(B, dtype=bool)

    def on_step(t, j, jp):
        j1, j2, ja = j[:B], j[B:2 * B], j[2 * B:]
        p1, p2, pa = jp[:B], jp[B:2 * B], jp[2 * B:]
        pos = (j1 > 0) & (j2 > 0) & (ja > 0)
        if np.any(pos):
            lhs = 2 * pa[pos] / ja[pos]
            rhs = p1[pos] / j1[pos] + p2[pos] / j2[pos]
            scale = np.abs(lhs) + np.abs(p1[pos] / j1[pos]) + np.abs(p2[pos] / j2[pos])
            ratio_min[pos] = np.minimum(ratio_min[pos], (lhs - rhs) / np.maximum(scale, 1e-300))
        prod_min[:] = np.minimum(prod_min, _rel(ja * ja, j1 * j2))
        bad = (ja <= 0) & (j1 * j2 > 0) & ~flagged
        for i in np.flatnonzero(bad):
            events.append((int(i), float(t)))
        flagged[bad] = True

    march(grid, lambda k: f, 3 * B, record=False, on_step=on_step)
    ratio_min[np.isinf(ratio_min)] = 0.0
    return ratio_min, prod_min, events


def multiplicative_lemma_check(k1: KappaSchedule, k2: KappaSchedule, t_end: float,
                               dt: float = 1e-3, tol: float = 1e-10) -> LemmaResult:
    rm, pm, ev = lemma_margins_batch(lambda t: np.atleast_1d(k1(t)), lambda t: np.atleast_1d(k2(t)),
                                     t_end, dt)
    r, p = float(rm[0]), float(pm[0])
    return LemmaResult(r >= -tol, p >= -tol, min(r, p), r, p, ev)


def taylor_gap(k1: KappaSchedule, k2: KappaSchedule, t_max: float = 1e-2, dt: float = 1e-5):
    """``(t, 2 j_av'/j_av - j1'/j1 - j2'/j2)`` on a fine grid up to ``t_max``."""
    grid = _grid(t_max, dt)

    def f(t):
        a, b = np.atleast_1d(k1(t))[0], np.atleast_1d(k2(t))[0]
        return np.array([a, b, 0.5 * (a + b)])

    J, JP, _ = march(grid, lambda k: f, 3)
    t = grid[1:]
    r = JP[1:] / J[1:]
    return t, 2 * r[:, 2] - r[:, 0] - r[:, 1]


def taylor_coefficient(k1: KappaSchedule, k2: KappaSchedule, t_lo: float = 1e-3,
                       t_hi: float = 1e-2) -> tuple[float, float]:
    """Fitted ``t^3`` coefficient of the ratio gap and its predicted value."""
    t, gap = taylor_gap(k1, k2, t_hi)
    m = t >= t_lo - 1e-15
    A = np.column_stack([t[m] ** 3, t[m] ** 4])
    coef, *_ = np.linalg.lstsq(A, gap[m], rcond=None)
    a, b = float(np.atleast_1d(k1(0.0))[0]), float(np.atleast_1d(k2(0.0))[0])
    av = 0.5 * (a + b)
    return float(coef[0]), (a * a + b * b - 2 * av * av) / 45.0


def multi_average_check(ks: Sequence[KappaSchedule], t_end: float, dt: float = 1e-3,
                        seed: int = 0, max_rounds: int = 60, tol: float = 1e-10):
    """Repeatedly replace a random pair by its average and track ``prod_i j_i(t_end)``.

    Returns ``(monotone, products)``. Schedules are kept as weight vectors over
    the originals so repeated averaging never nests closures.
    """
    if len(ks) < 3:
        raise ValueError("need at least three schedules")
    rng = np.random.default_rng(seed)
    m = len(ks)
    A = np.eye(m)
    grid = _grid(t_end, dt)

    def product(A):
        def f(t):
            base = np.array([float(np.atleast_1d(k(t))[0]) for k in ks])
            return A @ base
        j, _, _ = march(grid, lambda k: f, m, record=False)
        return float(np.prod(j))

    prods = [product(A)]
    for _ in range(max_rounds):
        if np.max(np.abs(A - A.mean(axis=0))) < 1e-9:
            break
        i, k = rng.choice(m, size=2, replace=False)
        row = 0.5 * (A[i] + A[k])
        A[i] = row
        A[k] = row
        prods.append(product(A))
    diffs = np.diff(prods)
    scale = np.maximum(np.abs(np.array(prods[1:])), 1e-300)
    return bool(np.all(diffs / scale >= -tol)), prods


# ------------------------------------------------------------------ shuffling


def shuffle_evolve(k1: KappaSchedule, k2: KappaSchedule, delta: float, t_end: float,
                   dt_max: float = 1e-3) -> JacobiSolution:
    """Alternate ``k1`` (odd intervals) and ``k2`` (even intervals) of width ``delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    n_int = int(math.ceil(t_end / delta - 1e-9))
    sub = max(1, int(math.ceil(delta / dt_max - 1e-9)))
    edges = np.minimum(np.arange(n_int + 1) * delta, t_end)
    grid = np.unique(np.concatenate([np.linspace(edges[i], edges[i + 1], sub + 1)
                                     for i in range(n_int)]))
    mids = 0.5 * (grid[:-1] + grid[1:])
    which = (np.floor(mids / delta + 1e-12).astype(int) % 2)
    f1 = lambda t: np.atleast_1d(k1(t))
    f2 = lambda t: np.atleast_1d(k2(t))
    J, JP, stuck = march(grid, lambda k: f1 if which[k] == 0 else f2, 1)
    s = float(stuck[0])
    return JacobiSolution(grid, J[:, 0], JP[:, 0], None if math.isnan(s) else s,
                          f"shuffle({k1.label},{k2.label},{delta:g})")


def shuffle_convergence(k1: KappaSchedule, k2: KappaSchedule, deltas: Sequence[float],
                        t_end: float, dt: float = 1e-3):
    """Errors ``|j_shuffled(t_end) - j_av(t_end)|`` and the log-log slope against ``delta``."""
    ref = solve_jacobi(average_pair(k1, k2), t_end, dt).j[-1]
    errs = np.array([abs(shuffle_evolve(k1, k2, dl, t_end, dt).j[-1] - ref) for dl in deltas])
    pos = errs > 0
    slope = float(np.polyfit(np.log(np.asarray(deltas)[pos]), np.log(errs[pos]), 1)[0]) \
        if pos.sum() >= 2 else float("nan")
    return errs, slope, float(ref)
