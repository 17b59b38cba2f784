"""Discretized phases, vectors and matrices in dimension 6.

A unimodular entry ``exp(2*pi*i*rho)`` is represented by the bin index ``j``
with ``rho`` in ``[j/N, (j+1)/N)``.  A row vector is ``(0, j1, ..., j5)``
where the leading 0 stands for the exact entry 1; only the five bins are
stored.

Vectors are also handled in bulk as ``(m, 5)`` integer arrays and as
radix-``n`` integer keys.  The key of ``(j1, ..., j5)`` is
``j1*n**4 + j2*n**3 + ... + j5``, so key order is lexicographic order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DIM = 6
NBINS = 5
MAX_N = 65535
# largest n for which n**5 fits in a signed 64-bit key
MAX_KEYED_N = 6208

SQRT6 = math.sqrt(6.0)


class FeasKind(enum.IntEnum):
    """Which condition a vector must meet against the all-ones vector."""

    ORTHOGONAL = 0
    UNBIASED = 1

    @property
    def target(self) -> float:
        return 0.0 if self is FeasKind.ORTHOGONAL else SQRT6

    @classmethod
    def parse(cls, text: str) -> "FeasKind":
        key = text.strip().lower()
        if key in ("ort", "orth", "orthogonal"):
            return cls.ORTHOGONAL
        if key in ("ub", "unbiased"):
            return cls.UNBIASED
        raise ValueError(f"unknown kind {text!r}; expected 'ort' or 'ub'")


@dataclass(frozen=True)
class DiscParams:
    n: int
    depth: int = 8

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if self.n > MAX_KEYED_N:
            raise ValueError(f"n must be <= {MAX_KEYED_N}, got {self.n}")
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise ValueError(f"depth must be an integer >= 1, got {self.depth!r}")


@dataclass(frozen=True, order=True)
class DiscVec:
    """Five bin indices; the exact leading coordinate is implicit."""

    bins: tuple[int, ...]

    def __post_init__(self) -> None:
        bins = tuple(int(b) for b in self.bins)
        if len(bins) != NBINS:
            raise ValueError(f"DiscVec needs {NBINS} bins, got {len(bins)}")
        if min(bins) < 0 or max(bins) > MAX_N:
            raise ValueError(f"bins out of range: {bins}")
        object.__setattr__(self, "bins", bins)

    @classmethod
    def parse(cls, text: str) -> "DiscVec":
        """Parse ``"0,0,8,0,8,8"`` (six-tuple form) or ``"0,8,0,8,8"``."""
        parts = [p for p in text.strip().strip("()").split(",") if p.strip()]
        vals = [int(p) for p in parts]
        if len(vals) == DIM:
            if vals[0] != 0:
                raise ValueError("six-tuple form must start with the exact 0")
            vals = vals[1:]
        return cls(tuple(vals))

    def check(self, n: int) -> None:
        if max(self.bins) >= n:
            raise ValueError(f"{self} has a bin >= n={n}")

    def key(self, n: int) -> int:
        k = 0
        for b in self.bins:
            k = k * n + b
        return k

    def __str__(self) -> str:
        return "(0," + ",".join(str(b) for b in self.bins) + ")"

    def __iter__(self):
        return iter(self.bins)


ZERO_VEC = DiscVec((0, 0, 0, 0, 0))


@dataclass(frozen=True)
class DiscMat:
    """A 6x6 discretized matrix; row 0 and column 0 are exact ones."""

    rows: tuple[DiscVec, ...]

    def __post_init__(self) -> None:
        rows = tuple(r if isinstance(r, DiscVec) else DiscVec(tuple(r)) for r in self.rows)
        if len(rows) != DIM:
            raise ValueError(f"DiscMat needs {DIM} rows, got {len(rows)}")
        if rows[0] != ZERO_VEC:
            raise ValueError("row 0 must be all zeros (the exact all-ones row)")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_core(cls, core: Sequence[Sequence[int]] | np.ndarray) -> "DiscMat":
        arr = np.asarray(core, dtype=np.int64).reshape(NBINS, NBINS)
        return cls((ZERO_VEC,) + tuple(DiscVec(tuple(r)) for r in arr.tolist()))

    @classmethod
    def from_full(cls, full: np.ndarray) -> "DiscMat":
        arr = np.asarray(full, dtype=np.int64)
        if arr.shape != (DIM, DIM) or arr[0].any() or arr[:, 0].any():
            raise ValueError("expected a 6x6 array with zero first row and column")
        return cls.from_core(arr[1:, 1:])

    @property
    def core(self) -> np.ndarray:
        """The 5x5 block of rows 1..5, columns 1..5."""
        return np.array([r.bins for r in self.rows[1:]], dtype=np.int64)

    @property
    def columns(self) -> tuple[DiscVec, ...]:
        c = self.core
        return (ZERO_VEC,) + tuple(DiscVec(tuple(col)) for col in c.T.tolist())

    def transpose(self) -> "DiscMat":
        return DiscMat.from_core(self.core.T)

    def check(self, n: int) -> None:
        for r in self.rows:
            r.check(n)

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rows)


@dataclass(frozen=True)
class DiscBasis:
    """Six discretized rows of B or C: exact first column, no dephased row."""

    rows: tuple[DiscVec, ...]

    def __post_init__(self) -> None:
        rows = tuple(r if isinstance(r, DiscVec) else DiscVec(tuple(r)) for r in self.rows)
        if len(rows) != DIM:
            raise ValueError(f"DiscBasis needs {DIM} rows, got {len(rows)}")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "DiscBasis":
        a = np.asarray(arr, dtype=np.int64).reshape(DIM, NBINS)
        return cls(tuple(DiscVec(tuple(r)) for r in a.tolist()))

    @property
    def array(self) -> np.ndarray:
        return np.array([r.bins for r in self.rows], dtype=np.int64)

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rows)


def discretize_phase(rho: float, n: int) -> int:
    """Bin index ``j`` with ``rho`` in ``[j/n, (j+1)/n)``; phase 1.0 counts as 0.0."""
    if not (0.0 <= rho <= 1.0) or math.isnan(rho):
        raise ValueError(f"phase {rho!r} outside [0, 1)")
    if rho == 1.0:
        rho = 0.0
    return min(int(math.floor(rho * n)), n - 1)


def discretize_phases(rho: np.ndarray, n: int) -> np.ndarray:
    """Vectorized :func:`discretize_phase` for phases already reduced into [0, 1]."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any((rho < 0.0) | (rho > 1.0) | np.isnan(rho)):
        raise ValueError("phases outside [0, 1)")
    rho = np.where(rho == 1.0, 0.0, rho)
    return np.minimum(np.floor(rho * n).astype(np.int64), n - 1)


def vec_diff_mod_n(u: DiscVec, v: DiscVec, n: int) -> DiscVec:
    return DiscVec(tuple((a - b) % n for a, b in zip(u.bins, v.bins)))


def lex_compare(u: DiscVec, v: DiscVec) -> int:
    """-1, 0 or 1 as ``u`` is less than, equal to or greater than ``v``."""
    if u.bins < v.bins:
        return -1
    if u.bins > v.bins:
        return 1
    return 0


def _strictly_increasing(vecs: Sequence[tuple[int, ...]]) -> bool:
    return all(a < b for a, b in zip(vecs, vecs[1:]))


def is_canonical(m: DiscMat) -> bool:
    """Rows 1..5 and columns 1..5 strictly increase and second row <= second column."""
    core = m.core
    rows = [tuple(r) for r in core.tolist()]
    cols = [tuple(c) for c in core.T.tolist()]
    return _strictly_increasing(rows) and _strictly_increasing(cols) and rows[0] <= cols[0]


def canonical_form(core: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Sort rows and columns lexicographically until stable, then transpose if needed.

    Each sorting pass lexicographically decreases the row-major flattening,
    so the loop terminates.  Returns ``(canon, rperm, cperm, transposed)``
    with ``canon == (core.T if transposed else core)[rperm][:, cperm]``.
    """
    c = np.asarray(core, dtype=np.int64).reshape(NBINS, NBINS).copy()
    rp = np.arange(NBINS)
    cp = np.arange(NBINS)
    while True:
        order = sorted(range(NBINS), key=lambda i: tuple(c[i]))
        c, rp = c[order], rp[order]
        order = sorted(range(NBINS), key=lambda i: tuple(c[:, i]))
        if order == list(range(NBINS)):
            break
        c, cp = c[:, order], cp[order]
    transposed = tuple(c[0]) > tuple(c[:, 0])
    if transposed:
        c, rp, cp = c.T.copy(), cp, rp
    return c, rp, cp, transposed


def canonicalize(core: np.ndarray) -> DiscMat:
    return DiscMat.from_core(canonical_form(core)[0])


# ---------------------------------------------------------------------------
# bulk helpers


def radix_weights(n: int) -> np.ndarray:
    return np.array([n**4, n**3, n**2, n, 1], dtype=np.int64)


def encode(bins: np.ndarray, n: int) -> np.ndarray:
    """Keys of an ``(m, 5)`` array of bins."""
    b = np.asarray(bins, dtype=np.int64).reshape(-1, NBINS)
    return b @ radix_weights(n)


def decode(keys: np.ndarray, n: int) -> np.ndarray:
    k = np.asarray(keys, dtype=np.int64).copy()
    out = np.empty((k.size, NBINS), dtype=np.int64)
    for i in range(NBINS - 1, -1, -1):
        out[:, i] = k % n
        k //= n
    return out


def as_bins_array(vecs: Iterable[DiscVec]) -> np.ndarray:
    return np.array([v.bins for v in vecs], dtype=np.int64).reshape(-1, NBINS)
