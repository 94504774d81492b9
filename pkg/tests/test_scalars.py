from __future__ import annotations

import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhvcurves.scalars import (
    INF,
    DegenerateError,
    Mobius,
    Poly,
    ProjPoint,
    agm,
    agm_sequences,
    cross_ratio,
    lagrange_interpolate,
    mobius_from_triple,
    poly_divrem,
)
from oracles import agm_by_quadrature


def test_divrem_by_hand():
    a = Poly([F(-3, 8), -1, 0, 1])
    q, r = poly_divrem(a, Poly([F(1, 2), 1]))
    assert q == Poly([F(-3, 4), F(-1, 2), 1])
    assert r.is_zero()


def test_divrem_unit_and_degree_order():
    p = Poly([1, 2, 3])
    q, r = poly_divrem(p, Poly([1]))
    assert q == p and r.is_zero()
    z2 = Poly([0, 0, 1])
    q, r = poly_divrem(z2, Poly([0, 0, 0, 1]))
    assert q.is_zero() and r == z2


def test_divrem_zero_divisor():
    with pytest.raises(DegenerateError):
        poly_divrem(Poly([1, 1]), Poly([]))


fracs = st.fractions(min_value=-20, max_value=20, max_denominator=9)


@given(st.lists(fracs, min_size=1, max_size=7), st.lists(fracs, min_size=1, max_size=4))
@settings(max_examples=60, deadline=None)
def test_divrem_reconstructs_exactly(a, b):
    b = Poly(b)
    if b.is_zero():
        return
    a = Poly(a)
    q, r = poly_divrem(a, b)
    assert b * q + r == a
    assert r.degree < b.degree or r.is_zero()


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=7), st.lists(st.floats(-5, 5), min_size=2, max_size=4))
@settings(max_examples=60, deadline=None)
def test_divrem_float_residual(a, b):
    b = Poly(b)
    if b.degree < 1 or abs(b.lead()) < 0.1:
        return
    a = Poly(a)
    q, r = poly_divrem(a, b)
    diff = (b * q + r - a).norm_inf() if not a.is_zero() else 0.0
    assert diff <= 1e-12 * max(1.0, a.norm_inf()) * max(1.0, q.norm_inf()) * max(1.0, b.norm_inf())


def test_lagrange_examples():
    assert lagrange_interpolate([0, 1], [1, 3]) == Poly([1, 2])
    assert lagrange_interpolate([F(2)], [F(7)]) == Poly([7])
    assert lagrange_interpolate([0, 1, 2], [0, 1, 4]) == Poly([0, 0, 1])


def test_lagrange_repeated_nodes_named():
    with pytest.raises(DegenerateError, match="1.*3"):
        lagrange_interpolate([0.5, 1.0, 0.5], [1, 2, 3])


def test_cross_ratio_examples():
    assert cross_ratio(0, 1, 2, 3) == ProjPoint(-3)
    assert cross_ratio(1, 0, 5, INF) == ProjPoint(5)
    assert cross_ratio(1, 2, 3, 1) == ProjPoint(0)


def test_cross_ratio_indeterminate():
    with pytest.raises(DegenerateError):
        cross_ratio(1, 1, 1, 2)


finite = st.floats(-10, 10)


@given(st.lists(finite, min_size=4, max_size=4, unique=True), st.lists(finite, min_size=4, max_size=4))
@settings(max_examples=80, deadline=None)
def test_cross_ratio_mobius_invariant(pts, m):
    a, b, c, d = m
    if abs(a * d - b * c) < 0.5 or min(abs(x - y) for i, x in enumerate(pts) for y in pts[i + 1 :]) < 1e-2:
        return
    mob = Mobius(a, b, c, d)
    before = cross_ratio(*pts)
    after = cross_ratio(*[mob(ProjPoint(x)) for x in pts])
    assert before.close(after, 1e-10 * max(1.0, abs(before.value()) if not before.is_infinite() else 1.0) * 1e3)


def test_mobius_from_triple_examples():
    zero, one = ProjPoint(0), ProjPoint(1)
    assert mobius_from_triple([zero, one, INF], [zero, one, INF]).same_as(Mobius.identity())
    m = mobius_from_triple([zero, one, INF], [one, zero, INF])
    assert m.same_as(Mobius(-1, 1, 0, 1))
    for x in (0.3, 2.0, -4.0):
        assert m(ProjPoint(x)).close(ProjPoint(1 - x))


def test_mobius_from_triple_repeated():
    with pytest.raises(DegenerateError):
        mobius_from_triple([ProjPoint(0), ProjPoint(0), INF], [ProjPoint(0), ProjPoint(1), INF])


@given(st.lists(finite, min_size=3, max_size=3, unique=True), finite)
@settings(max_examples=50, deadline=None)
def test_triple_map_hits_targets(dst, x):
    if min(abs(dst[0] - dst[1]), abs(dst[1] - dst[2]), abs(dst[0] - dst[2])) < 1e-2:
        return
    src = [ProjPoint(0), ProjPoint(1), INF]
    m = mobius_from_triple(src, [ProjPoint(v) for v in dst])
    for s, d in zip(src, dst):
        assert m(s).close(ProjPoint(d), 1e-10)


def test_agm_examples():
    assert agm(3.0, 3.0) == 3.0
    assert math.isclose(agm(1.0, 2.0), 1.4567910310469068, rel_tol=1e-14)
    assert agm(1.0, 2.0) == agm(2.0, 1.0)
    with pytest.raises(ValueError):
        agm(-1.0, 2.0)


@pytest.mark.parametrize("a,b", [(0.5, 2.0), (1.0, 5.0), (2.0, 0.5)])
def test_agm_matches_quadrature(a, b):
    assert abs(agm(a, b) - agm_by_quadrature(a, b)) < 1e-8 * agm(a, b)


@given(st.floats(0.01, 100), st.floats(0.01, 100))
@settings(max_examples=60, deadline=None)
def test_agm_bounds_and_monotone(a, b):
    m = agm(a, b)
    assert min(a, b) * (1 - 1e-14) <= m <= max(a, b) * (1 + 1e-14)
    seq = agm_sequences(a, b, 6)
    for (a0, b0), (a1, b1) in zip(seq, seq[1:]):
        assert a1 <= a0 * (1 + 1e-15) and b1 >= b0 * (1 - 1e-15)
        assert b1 <= m * (1 + 1e-14) <= a1 * (1 + 2e-14)
