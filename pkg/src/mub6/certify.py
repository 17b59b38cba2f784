"""Subdivision filters for the orthogonal / unbiased conditions.

A bin vector ``(j1..j5)`` is tested by halving every bin repeatedly.  At
generation ``g`` each box has half-width ``h = 1/(2 n 2**g)``; replacing each
of the five phases by its box midpoint moves each term by at most
``2*pi*h``, so a box can only contain a solution if its midpoint residual is
at most ``5*pi/(n 2**g)``.  A vector survives when a chain of such viable
boxes reaches the requested depth.

The residual is ``|1 + sum exp(2 pi i r_k)|`` (orthogonal) or that modulus
minus sqrt(6) in absolute value (unbiased).  Both are 1-Lipschitz in the
sum, so viability of a box implies viability of all its ancestors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterator

import numba
import numpy as np

from .core import NBINS, SQRT6, DiscParams, DiscVec, FeasKind

# absorbs double rounding in the midpoint sums
BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class IntervalBox:
    lows: tuple[float, ...]
    halfwidth: float
    generation: int

    @classmethod
    def root(cls, bins: DiscVec, n: int) -> "IntervalBox":
        return cls(tuple(b / n for b in bins.bins), 1.0 / (2 * n), 0)

    @property
    def midpoints(self) -> np.ndarray:
        return np.asarray(self.lows) + self.halfwidth

    def children(self) -> Iterator["IntervalBox"]:
        h = self.halfwidth / 2
        # left halves first
        for sides in product((0, 1), repeat=NBINS):
            lows = tuple(lo + self.halfwidth * s for lo, s in zip(self.lows, sides))
            yield IntervalBox(lows, h, self.generation + 1)


@dataclass(frozen=True)
class DescentVerdict:
    survives: bool
    rejected_at_generation: int | None = None


def generation_bound(generation: int, n: int) -> float:
    return 5 * math.pi / (2**generation * n)


def residual(phases: np.ndarray, kind: FeasKind) -> float:
    s = 1 + np.exp(2j * math.pi * np.asarray(phases, dtype=np.float64)).sum()
    mag = abs(s)
    return mag if kind is FeasKind.ORTHOGONAL else abs(mag - SQRT6)


def midpoint_bound_ok(box: IntervalBox, kind: FeasKind, n: int) -> bool:
    return residual(box.midpoints, kind) <= generation_bound(box.generation, n) + BOUND_SLACK


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, inline="always")
def _res(re, im, kind):
    mag = math.sqrt(re * re + im * im)
    if kind == 0:
        return mag
    return abs(mag - SQRT6)


@numba.njit(cache=True)
def _descend(bins, n, depth, kind, slack):
    """Return (survives, rejected_at_generation or -1)."""
    re = np.empty((depth + 1, NBINS))
    im = np.empty((depth + 1, NBINS))
    sr = 1.0
    si = 0.0
    for k in range(NBINS):
        t = 2.0 * math.pi * (bins[k] + 0.5) / n
        re[0, k] = math.cos(t)
        im[0, k] = math.sin(t)
        sr += re[0, k]
        si += im[0, k]
    if _res(sr, si, kind) > 5.0 * math.pi / n + slack:
        return False, 0
    # rotation by the child half-width, per generation
    rc = np.empty(depth + 1)
    rs = np.empty(depth + 1)
    bound = np.empty(depth + 1)
    for g in range(1, depth + 1):
        h = 1.0 / (2.0 * n * (1 << g))
        rc[g] = math.cos(2.0 * math.pi * h)
        rs[g] = math.sin(2.0 * math.pi * h)
        bound[g] = 5.0 * math.pi / (n * (1 << g)) + slack
    nxt = np.zeros(depth + 2, np.int64)
    deepest = 0
    g = 1
    while g >= 1:
        c = nxt[g]
        if c >= 32:
            g -= 1
            continue
        nxt[g] = c + 1
        sr = 1.0
        si = 0.0
        for k in range(NBINS):
            pr = re[g - 1, k]
            pi_ = im[g - 1, k]
            if (c >> k) & 1:
                # right half: rotate forward
                a = pr * rc[g] - pi_ * rs[g]
                b = pi_ * rc[g] + pr * rs[g]
            else:
                a = pr * rc[g] + pi_ * rs[g]
                b = pi_ * rc[g] - pr * rs[g]
            re[g, k] = a
            im[g, k] = b
            sr += a
            si += b
        if _res(sr, si, kind) <= bound[g]:
            if g > deepest:
                deepest = g
            if g == depth:
                return True, -1
            g += 1
            nxt[g] = 0
    return False, deepest + 1


@numba.njit(cache=True)
def _descend_batch(cands, n, depth, kind, slack):
    m = cands.shape[0]
    ok = np.zeros(m, np.bool_)
    gen = np.full(m, -1, np.int64)
    for i in range(m):
        s, r = _descend(cands[i], n, depth, kind, slack)
        ok[i] = s
        gen[i] = r
    return ok, gen


@numba.njit(cache=True)
def _mon_scan(n, depth, kind, slack, j1_lo, j1_hi):
    """Surviving non-decreasing tuples with first bin in [j1_lo, j1_hi), in lex order."""
    cap = 1024
    out = np.empty((cap, NBINS), np.int64)
    cnt = 0
    v = np.empty(NBINS, np.int64)
    for a in range(j1_lo, j1_hi):
        for b in range(a, n):
            for c in range(b, n):
                for d in range(c, n):
                    for e in range(d, n):
                        v[0] = a
                        v[1] = b
                        v[2] = c
                        v[3] = d
                        v[4] = e
                        s, _ = _descend(v, n, depth, kind, slack)
                        if s:
                            if cnt == cap:
                                cap *= 2
                                grown = np.empty((cap, NBINS), np.int64)
                                grown[:cnt] = out[:cnt]
                                out = grown
                            out[cnt] = v
                            cnt += 1
    return out[:cnt].copy()


def descend(bins: DiscVec, kind: FeasKind, params: DiscParams) -> DescentVerdict:
    bins.check(params.n)
    ok, gen = _descend(np.asarray(bins.bins, np.int64), params.n, params.depth, int(kind), BOUND_SLACK)
    return DescentVerdict(bool(ok), None if ok else int(gen))


def descend_many(cands: np.ndarray, kind: FeasKind, params: DiscParams) -> tuple[np.ndarray, np.ndarray]:
    """Survival mask and rejection generation (-1 for survivors) of an ``(m, 5)`` array."""
    cands = np.ascontiguousarray(cands, dtype=np.int64).reshape(-1, NBINS)
    return _descend_batch(cands, params.n, params.depth, int(kind), BOUND_SLACK)


def scan_monotone(kind: FeasKind, params: DiscParams, j1_lo: int = 0, j1_hi: int | None = None) -> np.ndarray:
    hi = params.n if j1_hi is None else j1_hi
    return _mon_scan(params.n, params.depth, int(kind), BOUND_SLACK, j1_lo, hi)


def oracle_feasible(bins: DiscVec, kind: FeasKind, n: int, refinement_depth: int = 20):
    """Tri-state ground truth for one bin vector from the independent oracle."""
    from .oracle import bins_feasibility

    return bins_feasibility(bins, kind, n, refinement_depth)
