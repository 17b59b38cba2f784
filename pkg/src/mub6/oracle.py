"""Ground truth for the filters: exact Hadamard constructions and deep box checks.

Nothing here is used by the search itself.  The box check is deliberately a
separate implementation from :mod:`mub6.certify`: level-by-level numpy
subdivision with the chord bound ``2 sin(pi h)`` per term (tighter than the
arc bound), plus a bounded least-squares search for an explicit witness.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .core import DIM, NBINS, SQRT6, DiscMat, DiscVec, FeasKind, canonical_form, discretize_phases

TWO_PI = 2.0 * math.pi
WITNESS_TOL = 1e-9
CONSTRUCTION_TOL = 1e-12


class Feasibility(enum.Enum):
    FEASIBLE = "feasible_certified"
    INFEASIBLE = "infeasible_certified"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class ExactVec:
    phases: tuple[float, ...]

    def residual(self, kind: FeasKind) -> float:
        s = 1 + np.exp(1j * TWO_PI * np.asarray(self.phases)).sum()
        return abs(s) if kind is FeasKind.ORTHOGONAL else abs(abs(s) - SQRT6)

    def discretize(self, n: int) -> DiscVec:
        return DiscVec(tuple(discretize_phases(np.mod(self.phases, 1.0), n).tolist()))


@dataclass(frozen=True)
class ExactMat:
    """6x6 unimodular matrix stored as phases in [0, 1)."""

    phases: np.ndarray
    dephased: bool = True

    def __post_init__(self) -> None:
        p = np.mod(np.asarray(self.phases, dtype=np.float64).reshape(DIM, DIM), 1.0)
        # np.mod can return 1.0 for tiny negative inputs
        p[p >= 1.0] = 0.0
        object.__setattr__(self, "phases", p)

    @property
    def entries(self) -> np.ndarray:
        return np.exp(1j * TWO_PI * self.phases)

    def hadamard_residual(self) -> float:
        h = self.entries
        g = h @ h.conj().T - DIM * np.eye(DIM)
        return float(np.abs(g).max())

    def discretize(self, n: int) -> np.ndarray:
        """Full 6x6 bin array (first row/column stay 0 for a dephased matrix)."""
        return discretize_phases(self.phases, n)

    def to_text(self) -> str:
        return "\n".join(",".join(f"{x:.17g}" for x in row) for row in self.phases) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExactMat":
        rows = [line for line in text.splitlines() if line.strip()]
        if len(rows) != DIM:
            raise ValueError(f"expected {DIM} lines, got {len(rows)}")
        vals = [[float(x) for x in line.split(",")] for line in rows]
        return cls(np.array(vals))

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: Path) -> "ExactMat":
        return cls.from_text(Path(path).read_text())


def cross_moduli(a: ExactMat, b: ExactMat) -> np.ndarray:
    """|<row_i(a), row_j(b)>| for all i, j."""
    return np.abs(a.entries @ b.entries.conj().T)


# ---------------------------------------------------------------------------
# exact constructions


def fourier_family(a: float, b: float) -> ExactMat:
    """The affine two-parameter family F(a,b) containing the Fourier matrix F_6.

    Entry phase ``jk/6`` plus ``a`` (resp. ``b``) on odd rows in columns with
    ``k mod 3 == 1`` (resp. ``2``).
    """
    j = np.arange(DIM)[:, None]
    k = np.arange(DIM)[None, :]
    shift = np.zeros((DIM, DIM))
    odd = (j % 2 == 1)
    shift += np.where(odd & (k % 3 == 1), a, 0.0)
    shift += np.where(odd & (k % 3 == 2), b, 0.0)
    return ExactMat(j * k / 6.0 + shift)


def unbiased_partner_of_f6() -> ExactMat:
    """A dephased Hadamard matrix unbiased to F_6, from the 2x3 tensor construction.

    Index k of C^6 is identified with (k mod 2, k mod 3); under this map the
    rows of F_6 are the tensor products of rows of F_2 and F_3.  Tensoring
    the qubit basis (1, +-i) with the qutrit basis omega**(jk + k**2) gives a
    basis unbiased to both factors.
    """
    ph = np.zeros((DIM, DIM))
    for i2 in range(2):
        for i3 in range(3):
            row = 3 * i2 + i3
            for k in range(DIM):
                k2, k3 = k % 2, k % 3
                ph[row, k] = k2 * (0.25 + 0.5 * i2) + (i3 * k3 + k3 * k3) / 3.0
    partner = ExactMat(ph)
    f6 = fourier_family(0.0, 0.0)
    if partner.hadamard_residual() > 1e-9:
        raise RuntimeError("partner construction is not Hadamard")
    if np.abs(cross_moduli(f6, partner) - SQRT6).max() > 1e-9:
        raise RuntimeError("partner construction is not unbiased to F_6")
    return partner


def gen_orthogonal_witnesses(count: int, seed: int) -> list[ExactVec]:
    """Zero-sum sextuples {1, -1, w, -w, z, -z} with the 1 in front and the rest shuffled."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        alpha, beta = rng.random(2)
        rest = np.mod(np.array([0.5, alpha, alpha + 0.5, beta, beta + 0.5]), 1.0)
        rng.shuffle(rest)
        out.append(ExactVec(tuple(rest.tolist())))
    return out


def solve_last_phase(phases4: Sequence[float], pick: int = 0) -> float | None:
    """Phase making ``|1 + sum(e(phases4)) + e(phi)| = sqrt(6)``, or None if impossible."""
    s = 1 + np.exp(1j * TWO_PI * np.asarray(phases4)).sum()
    r = abs(s)
    if r == 0.0:
        return None
    c = (5.0 - r * r) / (2.0 * r)
    if abs(c) > 1.0:
        return None
    theta = np.angle(s) + (1 if pick == 0 else -1) * math.acos(c)
    return float(np.mod(theta / TWO_PI, 1.0)) % 1.0


def gen_unbiased_witnesses(count: int, seed: int) -> list[ExactVec]:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        first = rng.random(4)
        phi5 = solve_last_phase(first, int(rng.integers(2)))
        if phi5 is None:
            continue
        ph = np.append(first, phi5)
        rng.shuffle(ph)
        out.append(ExactVec(tuple(ph.tolist())))
    return out


def discretize_canonical(mat: ExactMat, n: int) -> tuple[DiscMat, ExactMat]:
    """Canonical discretization of a dephased matrix and the exact matrix it represents.

    The exact matrix is ``mat`` with the same row/column permutations (and
    transposition) applied, so its entries lie in the returned bins.
    """
    full = mat.discretize(n)
    if full[0].any() or full[:, 0].any():
        raise ValueError("matrix is not dephased")
    canon, rp, cp, transposed = canonical_form(full[1:, 1:])
    src = mat.phases.T if transposed else mat.phases
    rows = np.concatenate([[0], rp + 1])
    cols = np.concatenate([[0], cp + 1])
    return DiscMat.from_core(canon), ExactMat(src[np.ix_(rows, cols)])


# ---------------------------------------------------------------------------
# deep box feasibility

_SIGNS = np.array([[(c >> k) & 1 for k in range(NBINS)] for c in range(32)], dtype=np.float64) * 2 - 1


def _sum_terms(x: np.ndarray) -> np.ndarray:
    return 1 + np.exp(1j * TWO_PI * x).sum(axis=-1)


def _box_residuals(centers: np.ndarray, kind: FeasKind) -> np.ndarray:
    mag = np.abs(_sum_terms(centers))
    return mag if kind is FeasKind.ORTHOGONAL else np.abs(mag - SQRT6)


def _vec_fun(kind: FeasKind):
    if kind is FeasKind.ORTHOGONAL:

        def fun(x):
            return np.array([1 + np.cos(TWO_PI * x).sum(), np.sin(TWO_PI * x).sum()])

        def jac(x):
            return np.vstack([-TWO_PI * np.sin(TWO_PI * x), TWO_PI * np.cos(TWO_PI * x)])

    else:

        def fun(x):
            re = 1 + np.cos(TWO_PI * x).sum()
            im = np.sin(TWO_PI * x).sum()
            return np.array([re * re + im * im - 6.0])

        def jac(x):
            re = 1 + np.cos(TWO_PI * x).sum()
            im = np.sin(TWO_PI * x).sum()
            return (2 * re * -TWO_PI * np.sin(TWO_PI * x) + 2 * im * TWO_PI * np.cos(TWO_PI * x))[None, :]

    return fun, jac


def find_box_witness(lo: np.ndarray, hi: np.ndarray, kind: FeasKind, starts: np.ndarray) -> np.ndarray | None:
    """A point of the closed box ``[lo, hi]`` meeting the condition to WITNESS_TOL."""
    fun, jac = _vec_fun(kind)
    for x0 in starts:
        x0 = np.clip(x0, lo, hi)
        try:
            sol = least_squares(
                fun, x0, jac=jac, bounds=(lo, hi), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200
            )
        except ValueError:
            continue
        x = np.clip(sol.x, lo, hi)
        if _box_residuals(x[None, :], kind)[0] < WITNESS_TOL:
            return x
    return None


def box_feasibility(
    centers: Sequence[float],
    halfwidth: float,
    kind: FeasKind,
    refinement_depth: int = 20,
    max_frontier: int = 1 << 16,
    seed: int = 0,
) -> tuple[Feasibility, np.ndarray | None]:
    """Decide whether the closed box of given centers and half-width contains a solution.

    Subdivision runs first, so infeasible boxes never reach a solver.  For
    a surviving box the unbiased condition is settled by a sign change of
    ``|s| - sqrt(6)`` between two sampled points (the box is convex, so
    bisection along the segment yields the witness); otherwise a bounded
    least-squares search looks for one.
    """
    c0 = np.asarray(centers, dtype=np.float64)
    lo, hi = c0 - halfwidth, c0 + halfwidth
    frontier = c0[None, :]
    res = _box_residuals(frontier, kind)
    h = halfwidth
    for g in range(refinement_depth + 1):
        res = _box_residuals(frontier, kind)
        chord = 2.0 * math.sin(math.pi * h) if h <= 0.5 else 2.0
        keep = res <= NBINS * chord
        frontier, res = frontier[keep], res[keep]
        if frontier.shape[0] == 0:
            return Feasibility.INFEASIBLE, None
        if g == refinement_depth or frontier.shape[0] * 32 > max_frontier:
            break
        h /= 2
        frontier = (frontier[:, None, :] + _SIGNS[None, :, :] * h).reshape(-1, NBINS)
    rng = np.random.default_rng(seed)
    if kind is FeasKind.UNBIASED:
        pts = np.vstack([frontier, lo + (hi - lo) * rng.random((256, NBINS))])
        sig = np.abs(_sum_terms(pts)) - SQRT6
        if sig.min() < -WITNESS_TOL and sig.max() > WITNESS_TOL:
            a, b = pts[np.argmin(sig)], pts[np.argmax(sig)]
            for _ in range(80):
                mid = (a + b) / 2
                if abs(_sum_terms(mid)) < SQRT6:
                    a = mid
                else:
                    b = mid
            return Feasibility.FEASIBLE, (a + b) / 2
    starts = np.vstack([frontier[np.argsort(res)[:6]], lo + (hi - lo) * rng.random((3, NBINS))])
    w = find_box_witness(lo, hi, kind, starts)
    if w is not None:
        return Feasibility.FEASIBLE, w
    return Feasibility.UNRESOLVED, None


def bins_feasibility(bins: DiscVec, kind: FeasKind, n: int, refinement_depth: int = 20) -> Feasibility:
    centers = (np.asarray(bins.bins, dtype=np.float64) + 0.5) / n
    return box_feasibility(centers, 0.5 / n, kind, refinement_depth)[0]


# ---------------------------------------------------------------------------
# whole-matrix witness polish


def polish_hadamard(core_bins: np.ndarray, n: int, starts: int = 6, seed: int = 0) -> np.ndarray | None:
    """Phases of a complex Hadamard matrix whose 25 core entries lie in the given closed bins.

    Residuals are the real and imaginary parts of all row-pair and
    column-pair inner products of the dephased matrix.
    """
    core_bins = np.asarray(core_bins, dtype=np.float64).reshape(NBINS, NBINS)
    lo = (core_bins / n).ravel()
    hi = ((core_bins + 1) / n).ravel()
    iu = np.triu_indices(DIM, 1)

    def full(x):
        p = np.zeros((DIM, DIM))
        p[1:, 1:] = x.reshape(NBINS, NBINS)
        return np.exp(1j * TWO_PI * p)

    def fun(x):
        h = full(x)
        g_r = (h @ h.conj().T)[iu]
        g_c = (h.conj().T @ h)[iu]
        g = np.concatenate([g_r, g_c])
        return np.concatenate([g.real, g.imag])

    rng = np.random.default_rng(seed)
    mids = (lo + hi) / 2
    cands = [mids] + [lo + (hi - lo) * rng.random(lo.size) for _ in range(starts - 1)]
    for x0 in cands:
        sol = least_squares(fun, x0, bounds=(lo, hi), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        x = np.clip(sol.x, lo, hi)
        if np.abs(fun(x)).max() < WITNESS_TOL:
            p = np.zeros((DIM, DIM))
            p[1:, 1:] = x.reshape(NBINS, NBINS)
            return p
    return None
