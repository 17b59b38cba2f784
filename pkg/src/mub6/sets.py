"""Vector sets ORT/UB (monotone, full, eps) and the per-matrix sets UB_A, UB_AB.

A :class:`VectorSet` is an immutable sorted array of radix-n keys.  Membership
is a binary search; hot loops may use the packed bitmap returned by
:meth:`VectorSet.bitmap` instead, which answers the same question.

File layout (little-endian, no padding)::

    b"MUB6SET1" | kind u8 | n u16 | depth u8 | count u64 | count * 5 * u16
"""

from __future__ import annotations

import enum
import hashlib
import struct
from concurrent.futures import ProcessPoolExecutor
from itertools import permutations
from pathlib import Path
from typing import Iterator

import numba
import numpy as np

from .certify import scan_monotone
from .core import NBINS, DiscBasis, DiscMat, DiscParams, DiscVec, FeasKind, decode, encode

MAGIC = b"MUB6SET1"
HEADER = struct.Struct("<8sBHBQ")
RECORD_BYTES = 2 * NBINS
# above this many keys (n**5) sets fall back to sort-based expansion
BITMAP_MAX_BITS = 1 << 32


class SetFormatError(ValueError):
    """A set file is malformed; ``offset`` points at the offending byte."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class SetKind(enum.IntEnum):
    ORT_MON = 0
    ORT = 1
    ORT_EPS = 2
    UB_MON = 3
    UB = 4
    UB_EPS = 5
    UB_OF_A = 6
    UB_OF_AB = 7

    @property
    def stem(self) -> str:
        return self.name.lower()

    @property
    def feas(self) -> FeasKind:
        return FeasKind.ORTHOGONAL if self <= SetKind.ORT_EPS else FeasKind.UNBIASED

    @classmethod
    def family(cls, feas: FeasKind) -> tuple["SetKind", "SetKind", "SetKind"]:
        """(mon, full, eps) kinds for a condition."""
        if feas is FeasKind.ORTHOGONAL:
            return cls.ORT_MON, cls.ORT, cls.ORT_EPS
        return cls.UB_MON, cls.UB, cls.UB_EPS


# ---------------------------------------------------------------------------
# compiled helpers


@numba.njit(cache=True)
def _bitmap_from_keys(keys, nbits):
    bm = np.zeros((nbits + 63) // 64, np.uint64)
    for k in keys:
        bm[k >> 6] |= np.uint64(1) << np.uint64(k & 63)
    return bm


@numba.njit(cache=True)
def _keys_from_bitmap(bm):
    total = 0
    for w in bm:
        x = w
        while x:
            x &= x - np.uint64(1)
            total += 1
    out = np.empty(total, np.int64)
    j = 0
    for i in range(bm.size):
        x = bm[i]
        b = 0
        while x:
            if x & np.uint64(1):
                out[j] = i * 64 + b
                j += 1
            x >>= np.uint64(1)
            b += 1
    return out


@numba.njit(cache=True, inline="always")
def member(keys, bm, key):
    """Membership of ``key`` using the bitmap when present, else binary search."""
    if bm.size > 0:
        return (bm[key >> 6] >> np.uint64(key & 63)) & np.uint64(1) == np.uint64(1)
    lo = 0
    hi = keys.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo < keys.size and keys[lo] == key


@numba.njit(cache=True)
def _eps_into_bitmap(bins, n, nbits):
    bm = np.zeros((nbits + 63) // 64, np.uint64)
    for i in range(bins.shape[0]):
        for eps in range(32):
            k = 0
            for c in range(NBINS):
                v = np.int64(bins[i, c]) + ((eps >> (NBINS - 1 - c)) & 1)
                if v == n:
                    v = 0
                k = k * n + v
            bm[k >> 6] |= np.uint64(1) << np.uint64(k & 63)
    return bm


@numba.njit(cache=True)
def _perms_into_bitmap(bins, perms, n, nbits):
    bm = np.zeros((nbits + 63) // 64, np.uint64)
    for i in range(bins.shape[0]):
        for p in range(perms.shape[0]):
            k = 0
            for c in range(NBINS):
                k = k * n + np.int64(bins[i, perms[p, c]])
            bm[k >> 6] |= np.uint64(1) << np.uint64(k & 63)
    return bm


@numba.njit(cache=True)
def diff_filter(cands, rows, n, keys, bm):
    """Mask of candidates whose difference mod n to every row is a member."""
    m = cands.shape[0]
    out = np.zeros(m, np.bool_)
    for i in range(m):
        ok = True
        for r in range(rows.shape[0]):
            k = 0
            for c in range(NBINS):
                d = np.int64(cands[i, c]) - np.int64(rows[r, c])
                if d < 0:
                    d += n
                k = k * n + d
            if not member(keys, bm, k):
                ok = False
                break
        out[i] = ok
    return out


_EMPTY_BM = np.zeros(0, np.uint64)
_PERMS = np.array(list(permutations(range(NBINS))), dtype=np.int64)
_EPS = np.array([[(e >> (NBINS - 1 - c)) & 1 for c in range(NBINS)] for e in range(32)], dtype=np.int64)


class VectorSet:
    """Sorted, deduplicated discretized vectors of one kind at fixed (n, depth)."""

    __slots__ = ("kind", "n", "depth", "keys", "_bins", "_bitmap")

    def __init__(self, kind: SetKind, n: int, depth: int, keys: np.ndarray):
        self.kind = SetKind(kind)
        self.n = int(n)
        self.depth = int(depth)
        keys = np.ascontiguousarray(keys, dtype=np.int64)
        if keys.size > 1 and not np.all(keys[1:] > keys[:-1]):
            raise ValueError("keys must be strictly increasing")
        keys.setflags(write=False)
        self.keys = keys
        self._bins = None
        self._bitmap = None

    @classmethod
    def from_bins(cls, kind: SetKind, n: int, depth: int, bins: np.ndarray) -> "VectorSet":
        return cls(kind, n, depth, np.unique(encode(bins, n)))

    @property
    def params(self) -> DiscParams:
        return DiscParams(self.n, self.depth)

    @property
    def bins(self) -> np.ndarray:
        """``(len, 5)`` uint16 array in set order."""
        if self._bins is None:
            b = decode(self.keys, self.n).astype(np.uint16)
            b.setflags(write=False)
            self._bins = b
        return self._bins

    def bitmap(self) -> np.ndarray:
        """Packed membership bitmap over all n**5 keys, or an empty array if too large."""
        if self._bitmap is None:
            nbits = self.n**NBINS
            self._bitmap = _bitmap_from_keys(self.keys, nbits) if nbits <= BITMAP_MAX_BITS else _EMPTY_BM
        return self._bitmap

    def __len__(self) -> int:
        return int(self.keys.size)

    def __iter__(self) -> Iterator[DiscVec]:
        for row in self.bins.tolist():
            yield DiscVec(tuple(row))

    def contains(self, v: DiscVec) -> bool:
        v.check(self.n)
        k = v.key(self.n)
        i = int(np.searchsorted(self.keys, k))
        return i < self.keys.size and int(self.keys[i]) == k

    __contains__ = contains

    def contains_keys(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        idx = np.searchsorted(self.keys, keys)
        idx_c = np.minimum(idx, max(self.keys.size - 1, 0))
        return (idx < self.keys.size) & (self.keys[idx_c] == keys) if self.keys.size else np.zeros(keys.shape, bool)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorSet):
            return NotImplemented
        return (self.kind, self.n, self.depth) == (other.kind, other.n, other.depth) and np.array_equal(
            self.keys, other.keys
        )

    def __repr__(self) -> str:
        return f"VectorSet({self.kind.name}, n={self.n}, depth={self.depth}, size={len(self)})"

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        head = HEADER.pack(MAGIC, int(self.kind), self.n, self.depth, len(self))
        return head + self.bins.astype("<u2").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, check_order: bool = True) -> "VectorSet":
        kind, n, depth, count = parse_header(data)
        body = np.frombuffer(data, dtype="<u2", offset=HEADER.size).reshape(count, NBINS).astype(np.int64)
        bad = np.flatnonzero((body >= n).any(axis=1))
        if bad.size:
            raise SetFormatError(f"record {bad[0]} has a bin >= n", HEADER.size + RECORD_BYTES * int(bad[0]))
        keys = encode(body, n)
        if check_order and count > 1:
            bad = np.flatnonzero(keys[1:] <= keys[:-1])
            if bad.size:
                i = int(bad[0]) + 1
                raise SetFormatError(f"record {i} is not above its predecessor", HEADER.size + RECORD_BYTES * i)
        return cls(kind, n, depth, keys)

    def write(self, path: Path, digest: bool = False) -> Path:
        path = Path(path)
        data = self.to_bytes()
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        tmp.replace(path)
        if digest:
            Path(str(path) + ".sha256").write_text(f"{hashlib.sha256(data).hexdigest()}  {path.name}\n")
        return path

    @classmethod
    def read(cls, path: Path) -> "VectorSet":
        return cls.from_bytes(Path(path).read_bytes())


def parse_header(data: bytes) -> tuple[SetKind, int, int, int]:
    if len(data) < HEADER.size:
        raise SetFormatError("file shorter than header", len(data))
    magic, kind, n, depth, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SetFormatError("bad magic", 0)
    if kind > max(SetKind):
        raise SetFormatError(f"unknown kind code {kind}", 8)
    expected = HEADER.size + RECORD_BYTES * count
    if len(data) != expected:
        raise SetFormatError(f"size {len(data)} does not match count {count} (expected {expected})", min(len(data), expected))
    return SetKind(kind), n, depth, count


def set_filename(kind: SetKind, params: DiscParams) -> str:
    return f"{kind.stem}_n{params.n}_d{params.depth}.mub6set"


# ---------------------------------------------------------------------------
# construction


def _scan_range(args):
    kind, n, depth, lo, hi = args
    return scan_monotone(FeasKind(kind), DiscParams(n, depth), lo, hi)


def gen_mon(kind: FeasKind, params: DiscParams, workers: int = 1) -> VectorSet:
    """Non-decreasing bin tuples that survive the descent filter."""
    n = params.n
    if workers <= 1:
        bins = scan_monotone(kind, params)
    else:
        # interleaved first-bin chunks balance the triangular workload; the
        # merge below restores lexicographic order regardless of scheduling
        jobs = [(int(kind), n, params.depth, j, j + 1) for j in range(n)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_scan_range, jobs))
        bins = np.concatenate(parts) if parts else np.zeros((0, NBINS), np.int64)
    mon_kind = SetKind.family(kind)[0]
    return VectorSet(mon_kind, n, params.depth, encode(bins, n))


def expand_permutations(mon_set: VectorSet) -> VectorSet:
    if mon_set.kind not in (SetKind.ORT_MON, SetKind.UB_MON):
        raise ValueError(f"expected a monotone set, got {mon_set.kind.name}")
    full_kind = SetKind.family(mon_set.kind.feas)[1]
    n = mon_set.n
    bins = mon_set.bins
    if n**NBINS <= BITMAP_MAX_BITS:
        keys = _keys_from_bitmap(_perms_into_bitmap(bins, _PERMS, n, n**NBINS))
    else:
        w = np.array([n**4, n**3, n**2, n, 1], dtype=np.int64)
        b = bins.astype(np.int64)
        keys = np.unique(np.concatenate([b[:, p] @ w for p in _PERMS])) if len(b) else np.zeros(0, np.int64)
    return VectorSet(full_kind, n, mon_set.depth, keys)


def expand_eps(full_set: VectorSet) -> VectorSet:
    """All ``base + eps (mod n)`` with ``eps`` in {0,1}^5 and ``base`` in the full set."""
    if full_set.kind not in (SetKind.ORT, SetKind.UB):
        raise ValueError(f"expected ORT or UB, got {full_set.kind.name}")
    eps_kind = SetKind.family(full_set.kind.feas)[2]
    n = full_set.n
    if n**NBINS <= BITMAP_MAX_BITS:
        keys = _keys_from_bitmap(_eps_into_bitmap(full_set.bins, n, n**NBINS))
    else:
        w = np.array([n**4, n**3, n**2, n, 1], dtype=np.int64)
        b = full_set.bins.astype(np.int64)
        keys = np.zeros(0, np.int64)
        for e in _EPS:
            keys = np.union1d(keys, ((b + e) % n) @ w)
    return VectorSet(eps_kind, n, full_set.depth, keys)


def contains(s: VectorSet, v: DiscVec) -> bool:
    return s.contains(v)


def ub_of_a(a: DiscMat, ub_full: VectorSet, ub_eps: VectorSet) -> VectorSet:
    """Members of UB_N whose difference to each of the rows 2..6 of ``a`` lies in UB_eps."""
    _check_pair(ub_full, SetKind.UB, ub_eps)
    rows = a.core
    a.check(ub_full.n)
    mask = diff_filter(ub_full.bins, rows, ub_full.n, ub_eps.keys, ub_eps.bitmap())
    return VectorSet(SetKind.UB_OF_A, ub_full.n, ub_full.depth, ub_full.keys[mask])


def ub_of_ab(b: DiscBasis | np.ndarray, ub_a: VectorSet, ub_eps: VectorSet) -> VectorSet:
    """Members of UB_A unbiased (in the discretized sense) to all six rows of ``b``."""
    _check_pair(ub_a, SetKind.UB_OF_A, ub_eps)
    rows = b.array if isinstance(b, DiscBasis) else np.asarray(b, dtype=np.int64).reshape(-1, NBINS)
    mask = diff_filter(ub_a.bins, rows, ub_a.n, ub_eps.keys, ub_eps.bitmap())
    return VectorSet(SetKind.UB_OF_AB, ub_a.n, ub_a.depth, ub_a.keys[mask])


def _check_pair(s: VectorSet, kind: SetKind, eps: VectorSet) -> None:
    if s.kind is not kind:
        raise ValueError(f"expected {kind.name}, got {s.kind.name}")
    if eps.kind is not SetKind.UB_EPS:
        raise ValueError(f"expected UB_EPS, got {eps.kind.name}")
    if (s.n, s.depth) != (eps.n, eps.depth):
        raise ValueError("sets built at different (n, depth)")


class SetBundle:
    """The six generated sets at one (n, depth), loaded or built on demand."""

    def __init__(self, params: DiscParams, directory: Path | None = None, workers: int = 1, build: bool = True):
        self.params = params
        self.directory = Path(directory) if directory is not None else None
        self.workers = workers
        self.build = build
        self._cache: dict[SetKind, VectorSet] = {}

    def path(self, kind: SetKind) -> Path:
        if self.directory is None:
            raise ValueError("bundle has no directory")
        return self.directory / set_filename(kind, self.params)

    def get(self, kind: SetKind) -> VectorSet:
        if kind in self._cache:
            return self._cache[kind]
        s = None
        if self.directory is not None and self.path(kind).exists():
            s = VectorSet.read(self.path(kind))
            if (s.kind, s.n, s.depth) != (kind, self.params.n, self.params.depth):
                raise SetFormatError(f"{self.path(kind)} header does not match {kind.name} {self.params}", 8)
        if s is None:
            if not self.build:
                raise FileNotFoundError(f"missing set file {self.path(kind)}")
            s = self._build(kind)
            if self.directory is not None:
                self.directory.mkdir(parents=True, exist_ok=True)
                s.write(self.path(kind))
        self._cache[kind] = s
        return s

    def _build(self, kind: SetKind) -> VectorSet:
        mon, full, eps = SetKind.family(kind.feas)
        if kind is mon:
            return gen_mon(kind.feas, self.params, self.workers)
        if kind is full:
            return expand_permutations(self.get(mon))
        if kind is eps:
            return expand_eps(self.get(full))
        raise ValueError(f"{kind.name} is per-matrix and cannot be built standalone")

    @property
    def ort_mon(self) -> VectorSet:
        return self.get(SetKind.ORT_MON)

    @property
    def ort(self) -> VectorSet:
        return self.get(SetKind.ORT)

    @property
    def ort_eps(self) -> VectorSet:
        return self.get(SetKind.ORT_EPS)

    @property
    def ub_mon(self) -> VectorSet:
        return self.get(SetKind.UB_MON)

    @property
    def ub(self) -> VectorSet:
        return self.get(SetKind.UB)

    @property
    def ub_eps(self) -> VectorSet:
        return self.get(SetKind.UB_EPS)
