import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mub6.core import SQRT6, DiscVec, FeasKind, is_canonical
from mub6.oracle import (
    ExactMat,
    Feasibility,
    bins_feasibility,
    box_feasibility,
    cross_moduli,
    discretize_canonical,
    fourier_family,
    gen_orthogonal_witnesses,
    gen_unbiased_witnesses,
    polish_hadamard,
    solve_last_phase,
    unbiased_partner_of_f6,
)

ORT, UB = FeasKind.ORTHOGONAL, FeasKind.UNBIASED


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_fourier_family_is_hadamard(a, b):
    assert fourier_family(a, b).hadamard_residual() < 1e-12


def test_f6_discretization_n17():
    m, exact = discretize_canonical(fourier_family(0, 0), 17)
    assert m.core[0].tolist() == [2, 5, 8, 11, 14]
    assert m.core[2].tolist() == [8, 0, 8, 0, 8]
    assert is_canonical(m)
    assert np.array_equal(exact.discretize(17)[1:, 1:], m.core)
    assert exact.hadamard_residual() < 1e-12


def test_partner_of_f6_is_unbiased():
    p = unbiased_partner_of_f6()
    assert p.hadamard_residual() < 1e-12
    assert np.abs(cross_moduli(fourier_family(0, 0), p) - SQRT6).max() < 1e-9


def test_exactmat_text_roundtrip(tmp_path):
    m = fourier_family(0.1, 0.3)
    m.save(tmp_path / "m.txt")
    assert np.array_equal(ExactMat.load(tmp_path / "m.txt").phases, m.phases)
    with pytest.raises(ValueError):
        ExactMat.from_text("0,0\n")


def test_witness_generators_are_exact_and_seeded():
    ws = gen_orthogonal_witnesses(100, seed=3)
    assert max(w.residual(ORT) for w in ws) < 1e-12
    assert ws == gen_orthogonal_witnesses(100, seed=3)
    us = gen_unbiased_witnesses(100, seed=3)
    assert max(u.residual(UB) for u in us) < 1e-9


def test_unbiased_redraw_acceptance_rate():
    rng = np.random.default_rng(0)
    hits = sum(solve_last_phase(rng.random(4), 0) is not None for _ in range(4000))
    assert hits / 4000 > 0.05


def test_solve_last_phase_none_when_impossible():
    assert solve_last_phase([0, 0, 0, 0]) is None
    phi = solve_last_phase([0, 0, 0.5, 0.25])
    s = 1 + np.exp(2j * math.pi * np.array([0, 0, 0.5, 0.25, phi])).sum()
    assert abs(abs(s) - SQRT6) < 1e-12


@pytest.mark.parametrize(
    "bins, kind, expected",
    [
        ((2, 5, 8, 11, 14), ORT, Feasibility.FEASIBLE),
        ((0, 0, 0, 0, 0), ORT, Feasibility.INFEASIBLE),
        ((0, 0, 0, 0, 0), UB, Feasibility.INFEASIBLE),
        ((8, 0, 8, 0, 8), ORT, Feasibility.FEASIBLE),
    ],
)
def test_bins_feasibility_examples(bins, kind, expected):
    assert bins_feasibility(DiscVec(bins), kind, 17) is expected


def test_box_witness_lies_in_box():
    c = (np.array([2, 5, 8, 11, 14]) + 0.5) / 17
    verdict, w = box_feasibility(c, 0.5 / 17, ORT)
    assert verdict is Feasibility.FEASIBLE
    assert np.all(np.abs(w - c) <= 0.5 / 17 + 1e-15)
    assert abs(1 + np.exp(2j * math.pi * w).sum()) < 1e-9


def test_polish_recovers_fourier_core():
    m, _ = discretize_canonical(fourier_family(0.2, 0.7), 17)
    ph = polish_hadamard(m.core, 17)
    assert ph is not None
    assert ExactMat(ph).hadamard_residual() < 1e-8
    assert np.array_equal(np.floor(ph[1:, 1:] * 17 + 1e-9).clip(0, 16), m.core) or np.all(
        (ph[1:, 1:] >= m.core / 17 - 1e-12) & (ph[1:, 1:] <= (m.core + 1) / 17 + 1e-12)
    )
