import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mub6.core import (
    DiscBasis,
    DiscMat,
    DiscParams,
    DiscVec,
    FeasKind,
    canonical_form,
    decode,
    discretize_phase,
    discretize_phases,
    encode,
    is_canonical,
    lex_compare,
    vec_diff_mod_n,
)

F6_17 = [
    (0, 0, 0, 0, 0),
    (2, 5, 8, 11, 14),
    (5, 11, 0, 5, 11),
    (8, 0, 8, 0, 8),
    (11, 5, 0, 11, 5),
    (14, 11, 8, 5, 2),
]

bins5 = st.tuples(*[st.integers(0, 16)] * 5)


def test_discretize_phase_examples():
    assert discretize_phase(0.0, 17) == 0
    assert discretize_phase(0.5, 17) == 8
    assert discretize_phase(math.acos(-2 / 3) / (2 * math.pi), 17) == 6


def test_phase_one_wraps_to_zero():
    assert discretize_phase(1.0, 17) == 0


@pytest.mark.parametrize("rho", [-1e-9, 1.5, float("nan")])
def test_discretize_phase_rejects_out_of_range(rho):
    with pytest.raises(ValueError):
        discretize_phase(rho, 17)


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.integers(2, 200))
def test_discretize_monotone(a, b, n):
    lo, hi = sorted((a, b))
    assert discretize_phase(lo, n) <= discretize_phase(hi, n)


@given(st.integers(2, 300))
def test_discretize_surjective(n):
    got = discretize_phases((np.arange(n) + 0.5) / n, n)
    assert got.tolist() == list(range(n))


@given(st.lists(st.floats(0, 0.999), min_size=5, max_size=5), st.integers(2, 97), st.floats(0, 1))
def test_bin_stability_inside_bins(phases, n, frac):
    rho = np.array(phases)
    bins = discretize_phases(rho, n)
    room = (bins + 1) / n - rho
    delta = frac * room.min() * 0.999
    assert np.array_equal(discretize_phases(rho + delta, n), bins)


def test_vec_diff_examples():
    u = DiscVec.parse("0,2,5,8,11,14")
    v = DiscVec.parse("0,5,11,0,5,11")
    assert vec_diff_mod_n(u, u, 17).bins == (0, 0, 0, 0, 0)
    assert vec_diff_mod_n(u, v, 17).bins == (14, 11, 8, 6, 3)
    assert vec_diff_mod_n(DiscVec.parse("0,1,0,0,0,0"), DiscVec.parse("0,0,0,0,0,0"), 17).bins == (1, 0, 0, 0, 0)


@given(bins5, bins5)
def test_vec_diff_antisymmetric(a, b):
    u, v = DiscVec(a), DiscVec(b)
    s = [(x + y) % 17 for x, y in zip(vec_diff_mod_n(u, v, 17).bins, vec_diff_mod_n(v, u, 17).bins)]
    assert s == [0] * 5


def test_lex_compare_examples():
    u = DiscVec.parse("0,2,5,8,11,14")
    v = DiscVec.parse("0,5,11,0,5,11")
    assert lex_compare(u, v) == -1
    assert lex_compare(u, u) == 0
    assert lex_compare(DiscVec.parse("0,0,8,0,8,8"), DiscVec.parse("0,0,0,8,8,8")) == 1


@given(bins5, bins5, bins5)
def test_lex_compare_total_order(a, b, c):
    u, v, w = DiscVec(a), DiscVec(b), DiscVec(c)
    assert lex_compare(u, v) == -lex_compare(v, u)
    if lex_compare(u, v) <= 0 and lex_compare(v, w) <= 0:
        assert lex_compare(u, w) <= 0
    assert (lex_compare(u, v) == 0) == (u == v)


@given(bins5, bins5)
def test_key_order_is_lex_order(a, b):
    u, v = DiscVec(a), DiscVec(b)
    assert (u.key(17) < v.key(17)) == (u < v)
    assert decode(encode(np.array([a]), 17), 17)[0].tolist() == list(a)


def test_is_canonical_f6():
    m = DiscMat(tuple(DiscVec(r) for r in F6_17))
    assert is_canonical(m)
    assert str(m.rows[1]) == "(0,2,5,8,11,14)"


def test_is_canonical_rejects_equal_rows():
    rows = list(F6_17)
    rows[2] = rows[1]
    assert not is_canonical(DiscMat(tuple(DiscVec(r) for r in rows)))


def test_is_canonical_rejects_row_above_column():
    i, j = np.indices((5, 5))
    core = i + 2 * j
    assert not is_canonical(DiscMat.from_core(core))
    assert is_canonical(DiscMat.from_core(core.T))


@settings(max_examples=200)
@given(st.lists(st.integers(0, 16), min_size=25, max_size=25))
def test_canonical_form_properties(flat):
    core = np.array(flat).reshape(5, 5)
    canon, rp, cp, tr = canonical_form(core)
    base = core.T if tr else core
    assert np.array_equal(canon, base[rp][:, cp])
    assert [tuple(r) for r in canon] == sorted(tuple(r) for r in canon)
    assert [tuple(c) for c in canon.T] == sorted(tuple(c) for c in canon.T)
    assert tuple(canon[0]) <= tuple(canon[:, 0])
    assert np.array_equal(canonical_form(canon)[0], canon)


def test_params_validation():
    with pytest.raises(ValueError):
        DiscParams(1)
    with pytest.raises(ValueError):
        DiscParams(17, 0)
    assert DiscParams(17).depth == 8


def test_feaskind():
    assert FeasKind.ORTHOGONAL.target == 0.0
    assert FeasKind.UNBIASED.target == pytest.approx(math.sqrt(6))
    assert FeasKind.parse("ub") is FeasKind.UNBIASED
    with pytest.raises(ValueError):
        FeasKind.parse("x")


def test_rendering_and_parsing():
    assert str(DiscVec.parse("0,0,8,0,8,8")) == "(0,0,8,0,8,8)"
    assert DiscVec.parse("(0,8,0,8,8)") == DiscVec.parse("0,0,8,0,8,8")
    with pytest.raises(ValueError):
        DiscVec.parse("1,0,8,0,8,8")
    m = DiscMat.from_core(np.array(F6_17[1:]))
    assert str(m).splitlines()[0] == "(0,0,0,0,0,0)"
    assert DiscMat.from_core(m.core.T).transpose() == m
    basis = DiscBasis.from_array(np.array(F6_17))
    assert np.array_equal(basis.array, np.array(F6_17))


def test_discmat_rejects_nonzero_first_row():
    with pytest.raises(ValueError):
        DiscMat(tuple(DiscVec(r) for r in [F6_17[1]] + F6_17[1:]))
