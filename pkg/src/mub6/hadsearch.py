"""Stage 1: canonical discretized Hadamard candidates (PREHAD) and their pruning.

The enumeration fills the 5x5 core as row 1, column 1, row 2, column 2, ...
Every row (column) is drawn from ORT_N, which is sorted, so the candidates
sharing the prefix already fixed by earlier columns (rows) form one
contiguous key range.  The kernel keeps its whole backtracking state in small
arrays so a run can stop when its output buffer fills and later resume; the
same state is what checkpoints persist.

Matrix stream layout (little-endian)::

    b"MUB6MAT1" | kind u8 | n u16 | depth u8 | shard u32 | total u32 | count u64
    | count * 25 * u16   (core rows 2..6, row-major)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numba
import numpy as np

from .core import NBINS, DiscMat, DiscParams, DiscVec, FeasKind
from .oracle import Feasibility, bins_feasibility, box_feasibility, polish_hadamard
from .sets import SetKind, VectorSet, member

NSTAGES = 2 * NBINS  # r2, c2, r3, c3, ..., r6, c6
STATE_LEN = 2 + 2 * NSTAGES  # [stage, row0 index] + pos[10] + end[10]

MAT_MAGIC = b"MUB6MAT1"
MAT_HEADER = struct.Struct("<8sBHBIIQ")
MAT_RECORD = NBINS * NBINS * 2
KIND_PREHAD = 0
KIND_HAD = 1


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class PruneConfig:
    refine_depth: int = 1
    bound_slack: float = 1e-12

    def __post_init__(self) -> None:
        if self.refine_depth < 1:
            raise ConfigurationError("refine_depth must be >= 1")


# ---------------------------------------------------------------------------
# enumeration kernel


@numba.njit(cache=True, inline="always")
def _lower_bound(keys, key):
    lo = 0
    hi = keys.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


@numba.njit(cache=True)
def _open_stage(s, m, n, ort_keys, pos, end, pins):
    """Set the candidate index range for stage ``s`` from the filled entries of ``m``.

    ``pins[s] >= 0`` restricts the stage to that single key.
    """
    pw = np.empty(NBINS + 1, np.int64)
    pw[0] = 1
    for i in range(1, NBINS + 1):
        pw[i] = pw[i - 1] * n
    if s % 2 == 1:
        c = (s - 1) // 2
        plen = c + 1
        prefix = 0
        for i in range(plen):
            prefix = prefix * n + m[i, c]
        lo_key = prefix * pw[NBINS - plen]
        hi_key = (prefix + 1) * pw[NBINS - plen]
        if c == 0:
            # second column >= second row
            floor_key = 0
            for i in range(NBINS):
                floor_key = floor_key * n + m[0, i]
        else:
            floor_key = 0
            for i in range(NBINS):
                floor_key = floor_key * n + m[i, c - 1]
            floor_key += 1
    else:
        r = s // 2
        plen = r
        prefix = 0
        for i in range(plen):
            prefix = prefix * n + m[r, i]
        lo_key = prefix * pw[NBINS - plen]
        hi_key = (prefix + 1) * pw[NBINS - plen]
        floor_key = 0
        for i in range(NBINS):
            floor_key = floor_key * n + m[r - 1, i]
        floor_key += 1
    if floor_key > lo_key:
        lo_key = floor_key
    if pins[s] >= 0:
        if pins[s] > lo_key:
            lo_key = pins[s]
        if pins[s] + 1 < hi_key:
            hi_key = pins[s] + 1
    if lo_key >= hi_key:
        pos[s] = 0
        end[s] = 0
    else:
        pos[s] = _lower_bound(ort_keys, lo_key)
        end[s] = _lower_bound(ort_keys, hi_key)


@numba.njit(cache=True)
def _accept(s, idx, m, n, ort_bins, eps_keys, eps_bm):
    """Test ORT vector ``idx`` at stage ``s``; on success write its free entries into ``m``."""
    if s % 2 == 1:
        c = (s - 1) // 2
        if c == 0:
            for i in range(1, NBINS):
                if ort_bins[idx, i] < ort_bins[idx, i - 1]:
                    return False
        for j in range(c):
            k = 0
            for i in range(NBINS):
                d = ort_bins[idx, i] - m[i, j]
                if d < 0:
                    d += n
                k = k * n + d
            if not member(eps_keys, eps_bm, k):
                return False
        for i in range(c + 1, NBINS):
            m[i, c] = ort_bins[idx, i]
    else:
        r = s // 2
        for j in range(r):
            k = 0
            for i in range(NBINS):
                d = ort_bins[idx, i] - m[j, i]
                if d < 0:
                    d += n
                k = k * n + d
            if not member(eps_keys, eps_bm, k):
                return False
        for i in range(r, NBINS):
            m[r, i] = ort_bins[idx, i]
    return True


@numba.njit(cache=True)
def _enum_kernel(m, state, base, n, ort_keys, ort_bins, eps_keys, eps_bm, pins, out, emit, max_nodes):
    """Advance the search below stage ``base``; returns (emitted, finished, nodes).

    ``state`` = [stage, second-row index, pos[10], end[10]]; stage 0 means exhausted.
    """
    pos = state[2 : 2 + NSTAGES]
    end = state[2 + NSTAGES : 2 + 2 * NSTAGES]
    s = state[0]
    cnt = 0
    nodes = 0
    cap = out.shape[0]
    while s >= base:
        if pos[s] >= end[s]:
            s -= 1
            continue
        if nodes >= max_nodes:
            state[0] = s
            return cnt, False, nodes
        idx = pos[s]
        pos[s] += 1
        nodes += 1
        if not _accept(s, idx, m, n, ort_bins, eps_keys, eps_bm):
            continue
        if s == NSTAGES - 1:
            if emit:
                for i in range(NBINS):
                    for j in range(NBINS):
                        out[cnt, i, j] = m[i, j]
            cnt += 1
            if emit and cnt == cap:
                state[0] = s
                return cnt, False, nodes
        else:
            s += 1
            _open_stage(s, m, n, ort_keys, pos, end, pins)
    state[0] = 0
    return cnt, True, nodes


@numba.njit(cache=True)
def _estimate_kernel(row, n, ort_keys, ort_bins, eps_keys, eps_bm, pins, probes, prefix, seed):
    """Knuth-style subtree size estimates below one second row.

    Each probe picks uniformly among the valid choices of stages 1..prefix,
    multiplies the branching factors and counts the remaining subtree
    exactly.  Returns per-probe estimates and total nodes spent.
    """
    np.random.seed(seed)
    est = np.zeros(probes, np.float64)
    state = np.zeros(STATE_LEN, np.int64)
    pos = state[2 : 2 + NSTAGES]
    end = state[2 + NSTAGES : 2 + 2 * NSTAGES]
    m = np.zeros((NBINS, NBINS), np.int64)
    dummy = np.empty((1, NBINS, NBINS), np.uint16)
    valid = np.empty(ort_keys.size, np.int64)
    nodes = 0
    for p in range(probes):
        m[:] = 0
        for i in range(NBINS):
            m[0, i] = row[i]
        weight = 1.0
        for s in range(1, prefix + 1):
            _open_stage(s, m, n, ort_keys, pos, end, pins)
            k = 0
            for idx in range(pos[s], end[s]):
                nodes += 1
                if _accept(s, idx, m, n, ort_bins, eps_keys, eps_bm):
                    valid[k] = idx
                    k += 1
            if k == 0:
                weight = 0.0
                break
            weight *= k
            _accept(s, valid[np.random.randint(k)], m, n, ort_bins, eps_keys, eps_bm)
        if weight == 0.0:
            continue
        if prefix == NSTAGES - 1:
            est[p] = weight
            continue
        state[0] = prefix + 1
        _open_stage(prefix + 1, m, n, ort_keys, pos, end, pins)
        cnt, _, nn = _enum_kernel(
            m, state, prefix + 1, n, ort_keys, ort_bins, eps_keys, eps_bm, pins, dummy, False, 1 << 62
        )
        nodes += nn
        est[p] = weight * cnt
    return est, nodes


def _check_sets(params: DiscParams, *sets: VectorSet) -> None:
    for s in sets:
        if (s.n, s.depth) != (params.n, params.depth):
            raise ConfigurationError(f"{s!r} does not match {params}")


def shard_rows(ort_mon: VectorSet, shard: tuple[int, int] | None) -> np.ndarray:
    """Indices into ORT_mon handled by a shard (index = i mod total)."""
    if shard is None:
        return np.arange(len(ort_mon))
    i, total = shard
    if total < 1 or not 0 <= i < total:
        raise ConfigurationError(f"bad shard {i}/{total}")
    return np.arange(i, len(ort_mon), total)


class PrehadSearch:
    """Resumable enumeration of PREHAD_N restricted to a shard.

    ``position`` is the index (within the shard) of the second-row choice
    being explored and ``state`` the kernel state inside it.
    """

    def __init__(
        self,
        params: DiscParams,
        ort: VectorSet,
        ort_mon: VectorSet,
        ort_eps: VectorSet,
        shard: tuple[int, int] | None = None,
    ):
        if (ort.kind, ort_mon.kind, ort_eps.kind) != (SetKind.ORT, SetKind.ORT_MON, SetKind.ORT_EPS):
            raise ConfigurationError("expected ORT, ORT_MON and ORT_EPS sets")
        _check_sets(params, ort, ort_mon, ort_eps)
        self.params = params
        self.shard = shard
        self.ort_keys = ort.keys
        self.ort_bins = np.ascontiguousarray(ort.bins, dtype=np.int64)
        self.eps_keys = ort_eps.keys
        self.eps_bm = ort_eps.bitmap()
        self.mon_keys = ort_mon.keys
        self.mon_bins = np.ascontiguousarray(ort_mon.bins, dtype=np.int64)
        self.rows = shard_rows(ort_mon, shard)
        self.position = 0
        self.m = np.zeros((NBINS, NBINS), np.int64)
        self.state = np.zeros(STATE_LEN, np.int64)
        self.pins = np.full(NSTAGES, -1, np.int64)
        self.nodes = 0
        self.emitted = 0
        # per kernel call; the batch loop re-enters until the buffer fills
        self.node_budget = 1 << 24

    def _start_row(self) -> None:
        self.m[:] = 0
        self.m[0, :] = self.mon_bins[self.rows[self.position]]
        self.state[:] = 0
        self.state[0] = 1
        self.state[1] = self.rows[self.position]
        pos = self.state[2 : 2 + NSTAGES]
        end = self.state[2 + NSTAGES :]
        _open_stage(1, self.m, self.params.n, self.ort_keys, pos, end, self.pins)

    def _run(self, out: np.ndarray, emit: bool, max_nodes: int) -> tuple[int, bool, int]:
        k, done, nodes = _enum_kernel(
            self.m, self.state, 1, self.params.n, self.ort_keys, self.ort_bins,
            self.eps_keys, self.eps_bm, self.pins, out, emit, max_nodes,
        )
        return int(k), bool(done), int(nodes)

    @property
    def finished(self) -> bool:
        return self.position >= len(self.rows)

    def next_batch(self, cap: int = 4096) -> np.ndarray:
        """Up to ``cap`` further matrices as a ``(k, 5, 5)`` array (empty when finished)."""
        out = np.empty((cap, NBINS, NBINS), np.uint16)
        got = 0
        while got < cap and not self.finished:
            if self.state[0] == 0:
                self._start_row()
            k, done, nodes = self._run(out[got:], True, self.node_budget)
            got += k
            self.nodes += nodes
            if done:
                self.position += 1
                self.state[0] = 0
        self.emitted += got
        return out[:got]

    def count_row(self, index_in_shard: int, max_nodes: int = 1 << 62) -> tuple[int, int, bool]:
        """(matrices, nodes, complete) below one second-row choice, without emitting."""
        saved = (self.position, self.m.copy(), self.state.copy())
        self.position = index_in_shard
        self._start_row()
        k, done, nodes = self._run(np.empty((1, NBINS, NBINS), np.uint16), False, max_nodes)
        self.position, self.m, self.state = saved
        return k, nodes, done

    def estimate_row(
        self,
        index_in_shard: int,
        probes: int = 64,
        prefix: int = 3,
        seed: int = 0,
        pinned: DiscMat | None = None,
        pin_stages: int = 0,
    ) -> tuple[float, float, int]:
        """Unbiased estimate of the matrices below one second-row choice.

        Returns (mean, standard error, nodes).  ``prefix`` stages are sampled
        and the rest counted exactly, so ``prefix=0`` is the exact count.
        With ``pinned`` the first ``pin_stages`` stages are fixed to that
        matrix's vectors, as in :meth:`targeted`.
        """
        if not 0 <= prefix < NSTAGES:
            raise ValueError(f"prefix must be in [0, {NSTAGES - 1}]")
        row = self.mon_bins[self.rows[index_in_shard]]
        pins = self._pins_for(pinned, pin_stages)
        if prefix == 0:
            saved = self.pins
            self.pins = pins
            try:
                k, nodes, _ = self.count_row(index_in_shard)
            finally:
                self.pins = saved
            return float(k), 0.0, nodes
        est, nodes = _estimate_kernel(
            row, self.params.n, self.ort_keys, self.ort_bins, self.eps_keys, self.eps_bm,
            pins, probes, prefix, seed,
        )
        se = float(est.std(ddof=1) / math.sqrt(probes)) if probes > 1 else math.inf
        return float(est.mean()), se, int(nodes)

    def targeted(self, candidate: DiscMat, pin_stages: int = 2) -> np.ndarray:
        """Enumerate the part of the candidate's subtree left free after pinning.

        The second row and the first ``pin_stages`` fill stages are fixed to
        the candidate's vectors; everything below is enumerated by the
        ordinary kernel.  Raises ValueError if the second row is not in this
        shard.
        """
        key = candidate.rows[1].key(self.params.n)
        i = int(np.searchsorted(self.mon_keys, key))
        if i >= len(self.mon_keys) or int(self.mon_keys[i]) != key:
            return np.empty((0, NBINS, NBINS), np.uint16)
        where = np.flatnonzero(self.rows == i)
        if where.size == 0:
            raise ValueError(f"second row {candidate.rows[1]} belongs to another shard")
        saved = (self.position, self.m.copy(), self.state.copy(), self.pins)
        self.pins = self._pins_for(candidate, pin_stages)
        self.position = int(where[0])
        self._start_row()
        chunks = []
        while True:
            out = np.empty((4096, NBINS, NBINS), np.uint16)
            k, done, _ = self._run(out, True, 1 << 62)
            chunks.append(out[:k])
            if done:
                break
        self.position, self.m, self.state, self.pins = saved
        return np.concatenate(chunks)

    def _pins_for(self, candidate: DiscMat | None, pin_stages: int) -> np.ndarray:
        pins = np.full(NSTAGES, -1, np.int64)
        if candidate is None:
            return pins
        if not 0 <= pin_stages < NSTAGES:
            raise ValueError(f"pin_stages must be in [0, {NSTAGES - 1}]")
        core = candidate.core
        for st in range(1, pin_stages + 1):
            vec = core[:, (st - 1) // 2] if st % 2 == 1 else core[st // 2, :]
            pins[st] = DiscVec(tuple(vec)).key(self.params.n)
        return pins

    def snapshot(self) -> dict:
        return {
            "position": int(self.position),
            "m": self.m.tolist(),
            "state": self.state.tolist(),
            "emitted": int(self.emitted),
            "nodes": int(self.nodes),
        }

    def restore(self, snap: dict) -> None:
        self.position = int(snap["position"])
        self.m = np.array(snap["m"], np.int64)
        self.state = np.array(snap["state"], np.int64)
        self.emitted = int(snap["emitted"])
        self.nodes = int(snap["nodes"])

    def __iter__(self) -> Iterator[DiscMat]:
        while True:
            batch = self.next_batch()
            if batch.shape[0] == 0:
                return
            for core in batch:
                yield DiscMat.from_core(core)


def enumerate_prehad(
    params: DiscParams,
    ort: VectorSet,
    ort_mon: VectorSet,
    ort_eps: VectorSet,
    shard: tuple[int, int] | None = None,
) -> Iterator[DiscMat]:
    return iter(PrehadSearch(params, ort, ort_mon, ort_eps, shard))


def is_emitted(candidate: DiscMat, search: PrehadSearch, pin_stages: int = 2) -> bool:
    """Whether the candidate's shard enumeration emits it (checked by shard targeting)."""
    found = search.targeted(candidate, pin_stages)
    return bool(np.any(np.all(found.reshape(-1, NBINS * NBINS) == candidate.core.reshape(-1), axis=1)))


@dataclass(frozen=True)
class Extrapolation:
    shards: int
    total_shards: int
    sample_sum: float
    estimate: float
    std_error: float
    nodes: int


def extrapolate_prehad(
    params: DiscParams,
    ort: VectorSet,
    ort_mon: VectorSet,
    ort_eps: VectorSet,
    shards: int = 100,
    probes: int = 64,
    prefix: int = 3,
    seed: int = 0,
) -> Extrapolation:
    """Estimate |PREHAD_N| from randomly chosen one-row shards.

    Each sampled shard's size is estimated independently; the mean over
    the sample is scaled by the number of shards.
    """
    total = len(ort_mon)
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(total, size=min(shards, total), replace=False))
    search = PrehadSearch(params, ort, ort_mon, ort_eps)
    means = np.empty(picks.size)
    var = 0.0
    nodes = 0
    for j, i in enumerate(picks):
        mu, se, nn = search.estimate_row(int(i), probes, prefix, seed=int(rng.integers(1 << 31)))
        means[j] = mu
        var += se * se
        nodes += nn
    est = total * float(means.mean())
    # shard sampling variance plus within-shard probe variance
    between = means.var(ddof=1) / picks.size if picks.size > 1 else 0.0
    within = var / picks.size**2
    se = total * math.sqrt(between * (1 - picks.size / total) + within)
    return Extrapolation(int(picks.size), total, float(means.sum()), est, se, nodes)


def shard_of(candidate: DiscMat, ort_mon: VectorSet, total: int) -> int:
    """The shard index (mod ``total``) whose enumeration would contain ``candidate``."""
    i = int(np.searchsorted(ort_mon.keys, candidate.rows[1].key(ort_mon.n)))
    if i >= len(ort_mon) or int(ort_mon.keys[i]) != candidate.rows[1].key(ort_mon.n):
        raise ValueError(f"second row {candidate.rows[1]} is not in ORT_mon")
    return i % total


# ---------------------------------------------------------------------------
# refined pruning toward HAD_N


@numba.njit(cache=True)
def _prune_kernel(core, n, refine, slack, max_nodes):
    """True if some assignment of sub-bins passes all refined pair bounds.

    Returns (retained, nodes); retained is also True when max_nodes is hit.
    """
    sub = 1 << refine
    h = 1.0 / (2.0 * n * sub)
    e1 = 2.0 * math.pi * h  # one inexact factor
    e2 = 2.0 * e1  # two inexact factors
    tre = np.empty((NBINS, NBINS, sub))
    tim = np.empty((NBINS, NBINS, sub))
    for r in range(NBINS):
        for c in range(NBINS):
            for s in range(sub):
                t = 2.0 * math.pi * (core[r, c] + (s + 0.5) / sub) / n
                tre[r, c, s] = math.cos(t)
                tim[r, c, s] = math.sin(t)
    total = sub**NBINS
    choice = np.full(NBINS, -1, np.int64)
    rre = np.empty((NBINS, NBINS))
    rim = np.empty((NBINS, NBINS))
    # partial column sums per level: against the exact column, and per column pair
    c0re = np.empty((NBINS + 1, NBINS))
    c0im = np.empty((NBINS + 1, NBINS))
    cpre = np.empty((NBINS + 1, NBINS, NBINS))
    cpim = np.empty((NBINS + 1, NBINS, NBINS))
    for c in range(NBINS):
        c0re[0, c] = 1.0
        c0im[0, c] = 0.0
        for d in range(NBINS):
            cpre[0, c, d] = 1.0
            cpim[0, c, d] = 0.0
    nodes = 0
    r = 0
    while r >= 0:
        choice[r] += 1
        if choice[r] >= total:
            choice[r] = -1
            r -= 1
            continue
        nodes += 1
        if nodes > max_nodes:
            return True, nodes
        x = choice[r]
        sr = 1.0
        si = 0.0
        for c in range(NBINS):
            s = x % sub
            x //= sub
            rre[r, c] = tre[r, c, s]
            rim[r, c] = tim[r, c, s]
            sr += rre[r, c]
            si += rim[r, c]
        if math.sqrt(sr * sr + si * si) > NBINS * e1 + slack:
            continue
        ok = True
        for q in range(r):
            pr = 1.0
            pi_ = 0.0
            for c in range(NBINS):
                # row_r * conj(row_q)
                pr += rre[r, c] * rre[q, c] + rim[r, c] * rim[q, c]
                pi_ += rim[r, c] * rre[q, c] - rre[r, c] * rim[q, c]
            if math.sqrt(pr * pr + pi_ * pi_) > NBINS * e2 + slack:
                ok = False
                break
        if not ok:
            continue
        remaining = NBINS - 1 - r
        filled = r + 1
        for c in range(NBINS):
            c0re[r + 1, c] = c0re[r, c] + rre[r, c]
            c0im[r + 1, c] = c0im[r, c] + rim[r, c]
            if math.sqrt(c0re[r + 1, c] ** 2 + c0im[r + 1, c] ** 2) > remaining + filled * e1 + slack:
                ok = False
                break
        if not ok:
            continue
        for c in range(NBINS):
            for d in range(c + 1, NBINS):
                a_re = rre[r, c] * rre[r, d] + rim[r, c] * rim[r, d]
                a_im = rim[r, c] * rre[r, d] - rre[r, c] * rim[r, d]
                cpre[r + 1, c, d] = cpre[r, c, d] + a_re
                cpim[r + 1, c, d] = cpim[r, c, d] + a_im
                if math.sqrt(cpre[r + 1, c, d] ** 2 + cpim[r + 1, c, d] ** 2) > remaining + filled * e2 + slack:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        if r == NBINS - 1:
            return True, nodes
        r += 1
    return False, nodes


def prune_to_had(candidate: DiscMat, config: PruneConfig, params: DiscParams, max_nodes: int = 1 << 40) -> bool:
    """False when no refined sub-bin assignment meets the stricter pair bounds."""
    ok, _ = _prune_kernel(candidate.core, params.n, config.refine_depth, config.bound_slack, max_nodes)
    return bool(ok)


def prune_batch(cores: np.ndarray, config: PruneConfig, params: DiscParams, max_nodes: int = 1 << 40) -> np.ndarray:
    """Retention mask; a candidate whose search hits ``max_nodes`` is retained."""
    keep = np.empty(cores.shape[0], bool)
    for i, c in enumerate(cores):
        keep[i] = _prune_kernel(c.astype(np.int64), params.n, config.refine_depth, config.bound_slack, max_nodes)[0]
    return keep


def verify_had_membership(candidate: DiscMat, params: DiscParams, refinement_depth: int = 20) -> Feasibility:
    """Deep, slow check of whether a complex Hadamard matrix has entries in these bins."""
    n = params.n
    vecs = list(candidate.rows[1:]) + list(candidate.columns[1:])
    for v in vecs:
        if bins_feasibility(v, FeasKind.ORTHOGONAL, n, refinement_depth) is Feasibility.INFEASIBLE:
            return Feasibility.INFEASIBLE
    core = candidate.core
    for mat in (core, core.T):
        full = np.vstack([np.zeros(NBINS, np.int64), mat])
        for i in range(1, NBINS + 1):
            for j in range(i + 1, NBINS + 1):
                # phase differences of two inexact entries range over two adjacent bins
                centers = ((full[j] - full[i]) % n) / n
                verdict, _ = box_feasibility(centers, 1.0 / n, FeasKind.ORTHOGONAL, refinement_depth)
                if verdict is Feasibility.INFEASIBLE:
                    return Feasibility.INFEASIBLE
    if polish_hadamard(core, n) is not None:
        return Feasibility.FEASIBLE
    for depth in (1, 2):
        ok, nodes = _prune_kernel(core, n, depth, 1e-12, 1 << 26)
        if not ok:
            return Feasibility.INFEASIBLE
    return Feasibility.UNRESOLVED


# ---------------------------------------------------------------------------
# matrix stream files


@dataclass(frozen=True)
class StreamHeader:
    kind: int
    n: int
    depth: int
    shard: int
    total: int
    count: int

    def pack(self) -> bytes:
        return MAT_HEADER.pack(MAT_MAGIC, self.kind, self.n, self.depth, self.shard, self.total, self.count)


def read_stream_header(data: bytes) -> StreamHeader:
    from .sets import SetFormatError

    if len(data) < MAT_HEADER.size:
        raise SetFormatError("file shorter than matrix header", len(data))
    magic, kind, n, depth, shard, total, count = MAT_HEADER.unpack_from(data)
    if magic != MAT_MAGIC:
        raise SetFormatError("bad magic", 0)
    if kind not in (KIND_PREHAD, KIND_HAD):
        raise SetFormatError(f"unknown matrix kind {kind}", 8)
    return StreamHeader(kind, n, depth, shard, total, count)


def read_matrix_stream(path: Path) -> tuple[StreamHeader, np.ndarray]:
    from .sets import SetFormatError

    data = Path(path).read_bytes()
    head = read_stream_header(data)
    expected = MAT_HEADER.size + MAT_RECORD * head.count
    if len(data) != expected:
        raise SetFormatError(f"size {len(data)} does not match count {head.count}", min(len(data), expected))
    body = np.frombuffer(data, dtype="<u2", offset=MAT_HEADER.size).reshape(head.count, NBINS, NBINS)
    return head, body.astype(np.int64)


class MatrixStreamWriter:
    """Appends matrices; the header count is patched on close."""

    def __init__(self, path: Path, header: StreamHeader, resume_count: int | None = None):
        self.path = Path(path)
        self.header = header
        if resume_count is None:
            self.fh: BinaryIO = open(self.path, "wb")
            self.fh.write(header.pack())
            self.count = 0
        else:
            self.fh = open(self.path, "r+b")
            self.fh.truncate(MAT_HEADER.size + MAT_RECORD * resume_count)
            self.fh.seek(0, 2)
            self.count = resume_count

    def write(self, cores: np.ndarray) -> None:
        if cores.size:
            self.fh.write(np.ascontiguousarray(cores, dtype="<u2").tobytes())
            self.count += cores.shape[0]

    def flush(self) -> None:
        self.fh.flush()

    def close(self) -> None:
        h = self.header
        self.fh.seek(0)
        self.fh.write(StreamHeader(h.kind, h.n, h.depth, h.shard, h.total, self.count).pack())
        self.fh.close()
