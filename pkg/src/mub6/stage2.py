"""Stage 2: try to complete a candidate A to a quartet (Id, A, B, C).

Rows of B and C come from UB_A.  Inside UB_A two relations matter: rows
of one basis must differ by a member of ORT_eps, and a row of B and a row
of C must differ by a member of UB_eps.  Both eps sets are closed under
negation mod n, so each relation is a symmetric graph on UB_A and is
stored as a bitset adjacency matrix.  B and C are then 6-cliques of the
ORT graph that are completely joined in the UB graph.

Rows of B (and C) are taken in increasing index order, which removes the
row-permutation symmetry without changing whether a completion exists.
While B is being built, the set of rows still usable for C is the
intersection of the UB neighbourhoods of the rows placed so far; once
fewer than six remain no completion of that partial B can succeed.

Certificate layout (little-endian)::

    b"MUB6CRT1" | n u16 | depth u8
    per record: 25 * u16 (A core) | verdict u8 | ub_a_size u64 | b_attempts u64
                | max_c_rows u64 | elapsed_ms u64
                | [extension only] 30 * u16 (B rows) | 30 * u16 (C rows)
"""

from __future__ import annotations

import enum
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numba
import numpy as np

from .core import DIM, NBINS, DiscBasis, DiscMat, DiscParams
from .sets import SetFormatError, SetKind, VectorSet, member, ub_of_a

CRT_MAGIC = b"MUB6CRT1"
CRT_HEADER = struct.Struct("<8sHB")
CRT_FIXED = struct.Struct("<25HBQQQQ")
WITNESS = struct.Struct("<60H")

DEFAULT_BUDGET_S = 60.0
# kernel calls between wall-clock checks
CHUNK_NODES = 1 << 20


class Verdict(enum.IntEnum):
    CONTRADICTION = 0
    EXTENSION_FOUND = 1
    UNRESOLVED = 2


class IntegrityError(ValueError):
    """A stored certificate does not re-verify."""


@dataclass(frozen=True)
class ContradictionCertificate:
    a: DiscMat
    n: int
    depth: int
    ub_a_size: int
    b_attempts: int
    max_c_rows: int
    elapsed_ms: int
    verdict: Verdict
    b: DiscBasis | None = None
    c: DiscBasis | None = None

    def __post_init__(self) -> None:
        has = self.b is not None and self.c is not None
        if has != (self.verdict is Verdict.EXTENSION_FOUND):
            raise ValueError("a witness is attached exactly when an extension was found")


@dataclass
class Stage2Sets:
    """The three sets stage 2 consumes, checked for a common (n, depth)."""

    ub: VectorSet
    ub_eps: VectorSet
    ort_eps: VectorSet
    params: DiscParams = field(init=False)

    def __post_init__(self) -> None:
        kinds = (self.ub.kind, self.ub_eps.kind, self.ort_eps.kind)
        if kinds != (SetKind.UB, SetKind.UB_EPS, SetKind.ORT_EPS):
            raise ValueError(f"expected UB, UB_EPS, ORT_EPS sets, got {kinds}")
        pars = {(s.n, s.depth) for s in (self.ub, self.ub_eps, self.ort_eps)}
        if len(pars) != 1:
            raise ValueError(f"sets built at different parameters: {sorted(pars)}")
        n, depth = pars.pop()
        self.params = DiscParams(n, depth)

    @classmethod
    def from_bundle(cls, bundle) -> "Stage2Sets":
        return cls(bundle.ub, bundle.ub_eps, bundle.ort_eps)


# ---------------------------------------------------------------------------
# bitset kernels


@numba.njit(cache=True)
def _adjacency(bins, n, keys, bm):
    """Bitset rows: bit j of row i set when bins[j] - bins[i] mod n is a member.

    The member sets used here are closed under negation, so the matrix is
    symmetric; rows are filled one at a time to keep writes sequential.
    """
    u = bins.shape[0]
    w = (u + 63) >> 6
    adj = np.zeros((u, w), np.uint64)
    table = np.empty((NBINS, n), np.int64)
    for i in range(u):
        wt = 1
        for c in range(NBINS - 1, -1, -1):
            for x in range(n):
                d = x - np.int64(bins[i, c])
                if d < 0:
                    d += n
                table[c, x] = d * wt
            wt *= n
        for word in range(w):
            acc = np.uint64(0)
            hi = min(u, (word + 1) << 6)
            for j in range(word << 6, hi):
                k = (table[0, bins[j, 0]] + table[1, bins[j, 1]] + table[2, bins[j, 2]]
                     + table[3, bins[j, 3]] + table[4, bins[j, 4]])
                if j != i and member(keys, bm, k):
                    acc |= np.uint64(1) << np.uint64(j & 63)
            adj[i, word] = acc
    return adj


@numba.njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@numba.njit(cache=True)
def _count(bits):
    t = 0
    for i in range(bits.size):
        t += _popcount(bits[i])
    return t


@numba.njit(cache=True)
def _next_bit(bits, start):
    """Smallest set bit index >= start, or -1."""
    w = bits.size
    word = start >> 6
    if word >= w:
        return -1
    x = bits[word] & (~np.uint64(0) << np.uint64(start & 63))
    while True:
        if x != 0:
            # lowest set bit
            low = x & (~x + np.uint64(1))
            b = 0
            while low > np.uint64(1):
                low >>= np.uint64(1)
                b += 1
            return (word << 6) + b
        word += 1
        if word >= w:
            return -1
        x = bits[word]


@numba.njit(cache=True)
def _clique6(cand, adj, chosen, limit):
    """Find 6 mutually adjacent bits of ``cand`` in increasing order.

    Returns (found, deepest level reached, nodes); ``chosen`` receives the rows.
    """
    w = cand.size
    stack = np.zeros((DIM + 1, w), np.uint64)
    stack[0, :] = cand
    nxt = np.zeros(DIM + 1, np.int64)
    level = 0
    deepest = 0
    nodes = 0
    while level >= 0:
        if _count(stack[level]) < DIM - level:
            level -= 1
            continue
        i = _next_bit(stack[level], nxt[level])
        if i < 0:
            level -= 1
            continue
        nxt[level] = i + 1
        nodes += 1
        chosen[level] = i
        if level + 1 > deepest:
            deepest = level + 1
        if level == DIM - 1:
            return True, deepest, nodes
        if nodes >= limit:
            return False, deepest, -nodes
        for k in range(w):
            stack[level + 1, k] = stack[level, k] & adj[i, k]
        # only later indices
        for k in range((i >> 6) + 1):
            if k < (i >> 6):
                stack[level + 1, k] = 0
            else:
                stack[level + 1, k] &= ~np.uint64(0) << np.uint64(i & 63)
        stack[level + 1, i >> 6] &= ~(np.uint64(1) << np.uint64(i & 63))
        level += 1
        nxt[level] = 0
    return False, deepest, nodes


@numba.njit(cache=True)
def _b_search(adj_o, adj_u, state, bstack, cstack, brows, crows, counters, max_nodes, cut):
    """Resumable search over B with the C test at every complete B.

    ``state`` = [level, nxt[0..5]], level -1 when exhausted.
    ``counters`` = [b_attempts, max_c_rows, nodes].
    Returns 0 exhausted, 1 extension found, 2 budget reached.
    """
    w = adj_o.shape[1]
    level = state[0]
    nodes = 0
    while level >= 0:
        if nodes >= max_nodes:
            state[0] = level
            counters[2] += nodes
            return 2
        if _count(bstack[level]) < DIM - level:
            level -= 1
            continue
        i = _next_bit(bstack[level], state[1 + level])
        if i < 0:
            level -= 1
            continue
        state[1 + level] = i + 1
        nodes += 1
        brows[level] = i
        for k in range(w):
            cstack[level + 1, k] = cstack[level, k] & adj_u[i, k]
        if cut and _count(cstack[level + 1]) < DIM:
            continue
        if level == DIM - 1:
            counters[0] += 1
            found, deepest, cn = _clique6(cstack[DIM], adj_o, crows, 1 << 62)
            nodes += abs(cn)
            if deepest > counters[1]:
                counters[1] = deepest
            if found:
                state[0] = level
                counters[2] += nodes
                return 1
            continue
        for k in range(w):
            bstack[level + 1, k] = bstack[level, k] & adj_o[i, k]
        for k in range((i >> 6) + 1):
            if k < (i >> 6):
                bstack[level + 1, k] = 0
            else:
                bstack[level + 1, k] &= ~np.uint64(0) << np.uint64(i & 63)
        bstack[level + 1, i >> 6] &= ~(np.uint64(1) << np.uint64(i & 63))
        level += 1
        state[1 + level] = 0
    state[0] = -1
    counters[2] += nodes
    return 0


def _full_bits(u: int) -> np.ndarray:
    w = (u + 63) >> 6
    bits = np.full(w, np.uint64(0xFFFFFFFFFFFFFFFF), np.uint64)
    if u & 63:
        bits[-1] = np.uint64((1 << (u & 63)) - 1)
    if u == 0:
        bits = np.zeros(1, np.uint64)
    return bits


def _bits_of(indices: np.ndarray, u: int) -> np.ndarray:
    bits = np.zeros(max((u + 63) >> 6, 1), np.uint64)
    for i in indices:
        bits[i >> 6] |= np.uint64(1) << np.uint64(i & 63)
    return bits


# ---------------------------------------------------------------------------
# public operations


class _Graphs:
    """UB_A in a chosen order together with its two adjacency matrices."""

    def __init__(self, ub_a: VectorSet, ort_eps: VectorSet, ub_eps: VectorSet | None, reverse: bool = False):
        bins = np.ascontiguousarray(ub_a.bins, dtype=np.int64)
        if reverse:
            bins = np.ascontiguousarray(bins[::-1])
        self.bins = bins
        self.u = bins.shape[0]
        n = ub_a.n
        self.adj_o = _adjacency(bins, n, ort_eps.keys, ort_eps.bitmap())
        self.adj_u = None if ub_eps is None else _adjacency(bins, n, ub_eps.keys, ub_eps.bitmap())


def build_b(ub_a: VectorSet, ort_eps: VectorSet, limit: int | None = None) -> Iterator[DiscBasis]:
    """Six rows of UB_A, increasing, with every pairwise difference in ORT_eps."""
    if ub_a.n != ort_eps.n:
        raise ValueError("sets built at different n")
    g = _Graphs(ub_a, ort_eps, None)
    emitted = 0
    for rows in _all_cliques(_full_bits(g.u), g.adj_o, g.u, DIM):
        yield DiscBasis.from_array(g.bins[rows])
        emitted += 1
        if limit is not None and emitted >= limit:
            return


def _above(i: int, u: int) -> np.ndarray:
    bits = _full_bits(u)
    for k in range((i >> 6) + 1):
        if k < (i >> 6):
            bits[k] = 0
        else:
            bits[k] &= np.uint64(0xFFFFFFFFFFFFFFFF) << np.uint64(i & 63)
    bits[i >> 6] &= ~(np.uint64(1) << np.uint64(i & 63))
    return bits


def _all_cliques(cand: np.ndarray, adj: np.ndarray, u: int, size: int) -> Iterator[list[int]]:
    if size == 0:
        yield []
        return
    i = _next_bit(cand, 0)
    while i >= 0:
        sub = cand & adj[i] & _above(i, u)
        if _count(sub) >= size - 1:
            for rest in _all_cliques(sub, adj, u, size - 1):
                yield [i] + rest
        i = _next_bit(cand, i + 1)


def build_c(ub_ab: VectorSet, ort_eps: VectorSet) -> DiscBasis | None:
    """First six rows of UB_AB (increasing) with pairwise differences in ORT_eps."""
    if len(ub_ab) < DIM:
        return None
    g = _Graphs(ub_ab, ort_eps, None)
    chosen = np.zeros(DIM, np.int64)
    found, _, _ = _clique6(_full_bits(g.u), g.adj_o, chosen, 1 << 62)
    return DiscBasis.from_array(g.bins[chosen]) if found else None


def _sorted_basis(rows: np.ndarray) -> DiscBasis:
    order = np.lexsort(rows.T[::-1])
    return DiscBasis.from_array(rows[order])


def process_a(
    a: DiscMat,
    sets: Stage2Sets,
    budget_s: float = DEFAULT_BUDGET_S,
    reverse: bool = False,
    cut: bool = True,
    record_elapsed: bool = True,
) -> ContradictionCertificate:
    """Decide whether ``a`` extends to a discretized quartet.

    ``reverse`` explores UB_A in decreasing order; ``cut`` enables the
    early stop on partial B whose C pool is already too small.
    """
    t0 = time.perf_counter()
    params = sets.params
    ub_a = ub_of_a(a, sets.ub, sets.ub_eps)
    g = _Graphs(ub_a, sets.ort_eps, sets.ub_eps, reverse)
    u = g.u
    w = max((u + 63) >> 6, 1)
    state = np.zeros(1 + DIM, np.int64)
    bstack = np.zeros((DIM + 1, w), np.uint64)
    cstack = np.zeros((DIM + 1, w), np.uint64)
    bstack[0] = _full_bits(u)
    cstack[0] = _full_bits(u)
    brows = np.zeros(DIM, np.int64)
    crows = np.zeros(DIM, np.int64)
    counters = np.zeros(3, np.int64)
    status = 0 if u < DIM else 2
    while status == 2:
        if time.perf_counter() - t0 > budget_s:
            break
        status = _b_search(g.adj_o, g.adj_u, state, bstack, cstack, brows, crows, counters, CHUNK_NODES, cut)
    elapsed = int(round((time.perf_counter() - t0) * 1000)) if record_elapsed else 0
    verdict = {0: Verdict.CONTRADICTION, 1: Verdict.EXTENSION_FOUND, 2: Verdict.UNRESOLVED}[status]
    b = c = None
    if verdict is Verdict.EXTENSION_FOUND:
        b = _sorted_basis(g.bins[brows])
        c = _sorted_basis(g.bins[crows])
    return ContradictionCertificate(
        a=a, n=params.n, depth=params.depth, ub_a_size=u,
        b_attempts=int(counters[0]), max_c_rows=int(counters[1]),
        elapsed_ms=elapsed, verdict=verdict, b=b, c=c,
    )


def find_certificate_fault(cert: ContradictionCertificate, sets: Stage2Sets) -> str | None:
    """Name the first condition a stored extension witness violates, or None."""
    n = sets.params.n
    if (cert.n, cert.depth) != (sets.params.n, sets.params.depth):
        return f"certificate parameters (n={cert.n}, depth={cert.depth}) differ from sets {sets.params}"
    arows = cert.a.core
    for name, basis in (("B", cert.b), ("C", cert.c)):
        rows = basis.array
        for i, r in enumerate(rows):
            if r.max() >= n:
                return f"{name} row {i + 1} has a bin >= n"
            if not sets.ub.contains_keys(np.array([_key(r, n)]))[0]:
                return f"{name} row {i + 1} {basis.rows[i]} is not in UB"
            for j, ar in enumerate(arows):
                if not _diff_in(r, ar, n, sets.ub_eps):
                    return f"{name} row {i + 1} and A row {j + 2} are not unbiased (difference not in UB_eps)"
        for i in range(DIM):
            for j in range(i + 1, DIM):
                if not _diff_in(rows[j], rows[i], n, sets.ort_eps):
                    return f"{name} rows {i + 1} and {j + 1} are not orthogonal (difference not in ORT_eps)"
    for i, br in enumerate(cert.b.array):
        for j, cr in enumerate(cert.c.array):
            if not _diff_in(cr, br, n, sets.ub_eps):
                return f"B row {i + 1} and C row {j + 1} are not unbiased (difference not in UB_eps)"
    return None


def _key(row: np.ndarray, n: int) -> int:
    k = 0
    for b in row:
        k = k * n + int(b)
    return k


def _diff_in(x: np.ndarray, y: np.ndarray, n: int, s: VectorSet) -> bool:
    d = (np.asarray(x, np.int64) - np.asarray(y, np.int64)) % n
    return bool(s.contains_keys(np.array([_key(d, n)]))[0])


def recheck_certificate(
    cert: ContradictionCertificate, sets: Stage2Sets, budget_s: float = DEFAULT_BUDGET_S
) -> bool:
    """Re-verify a certificate independently of the search that produced it.

    Extension witnesses are checked condition by condition with plain
    sorted-key lookups.  Contradictions are re-derived with UB_A explored in
    the opposite order and without the pool-size cut.  Raises
    IntegrityError naming the failure.
    """
    if cert.verdict is Verdict.EXTENSION_FOUND:
        fault = find_certificate_fault(cert, sets)
        if fault is not None:
            raise IntegrityError(fault)
        return True
    if cert.verdict is Verdict.UNRESOLVED:
        raise IntegrityError("unresolved certificates carry no verdict to recheck")
    again = process_a(cert.a, sets, budget_s, reverse=True, cut=False)
    if again.ub_a_size != cert.ub_a_size:
        raise IntegrityError(f"UB_A size {again.ub_a_size} differs from recorded {cert.ub_a_size}")
    if again.verdict is not Verdict.CONTRADICTION:
        raise IntegrityError(f"re-run in reverse order gave {again.verdict.name.lower()}")
    return True


# ---------------------------------------------------------------------------
# certificate files


def cert_to_bytes(cert: ContradictionCertificate) -> bytes:
    core = cert.a.core.reshape(-1).tolist()
    out = CRT_FIXED.pack(*core, int(cert.verdict), cert.ub_a_size, cert.b_attempts, cert.max_c_rows, cert.elapsed_ms)
    if cert.verdict is Verdict.EXTENSION_FOUND:
        out += WITNESS.pack(*cert.b.array.reshape(-1).tolist(), *cert.c.array.reshape(-1).tolist())
    return out


def certs_to_bytes(params: DiscParams, certs: list[ContradictionCertificate]) -> bytes:
    return CRT_HEADER.pack(CRT_MAGIC, params.n, params.depth) + b"".join(cert_to_bytes(c) for c in certs)


def certs_from_bytes(data: bytes) -> tuple[DiscParams, list[ContradictionCertificate]]:
    if len(data) < CRT_HEADER.size:
        raise SetFormatError("file shorter than certificate header", len(data))
    magic, n, depth = CRT_HEADER.unpack_from(data)
    if magic != CRT_MAGIC:
        raise SetFormatError("bad magic", 0)
    try:
        params = DiscParams(n, depth)
    except ValueError as exc:
        raise SetFormatError(str(exc), 8) from None
    certs = []
    off = CRT_HEADER.size
    while off < len(data):
        if off + CRT_FIXED.size > len(data):
            raise SetFormatError("truncated certificate record", off)
        vals = CRT_FIXED.unpack_from(data, off)
        core = np.array(vals[:25], np.int64).reshape(NBINS, NBINS)
        if core.max() >= n:
            raise SetFormatError("A bin out of range", off)
        try:
            verdict = Verdict(vals[25])
        except ValueError:
            raise SetFormatError(f"unknown verdict byte {vals[25]}", off + 50) from None
        rec = off
        off += CRT_FIXED.size
        b = c = None
        if verdict is Verdict.EXTENSION_FOUND:
            if off + WITNESS.size > len(data):
                raise SetFormatError("truncated witness", off)
            wv = np.array(WITNESS.unpack_from(data, off), np.int64)
            if wv.max() >= n:
                raise SetFormatError("witness bin out of range", off)
            b = DiscBasis.from_array(wv[:30])
            c = DiscBasis.from_array(wv[30:])
            off += WITNESS.size
        try:
            a = DiscMat.from_core(core)
        except ValueError as exc:
            raise SetFormatError(str(exc), rec) from None
        certs.append(ContradictionCertificate(a, n, depth, vals[26], vals[27], vals[28], vals[29], verdict, b, c))
    return params, certs


def record_offsets(certs: list[ContradictionCertificate]) -> list[int]:
    """Byte offset of each record in the file produced by :func:`certs_to_bytes`."""
    offs = []
    off = CRT_HEADER.size
    for c in certs:
        offs.append(off)
        off += CRT_FIXED.size + (WITNESS.size if c.verdict is Verdict.EXTENSION_FOUND else 0)
    return offs


def write_certificates(path: Path, params: DiscParams, certs: list[ContradictionCertificate]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(certs_to_bytes(params, certs))
    tmp.replace(path)


def read_certificates(path: Path) -> tuple[DiscParams, list[ContradictionCertificate]]:
    return certs_from_bytes(Path(path).read_bytes())


__all__ = [
    "ContradictionCertificate",
    "IntegrityError",
    "Stage2Sets",
    "Verdict",
    "build_b",
    "build_c",
    "find_certificate_fault",
    "process_a",
    "read_certificates",
    "recheck_certificate",
    "write_certificates",
]
