from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import conductor_direct, conic_soluble_at_p, divisor_sum_direct

from conicbundle.hilbert import (
    INF,
    Place,
    active_primes,
    analytic_symbol,
    delta_det,
    delta_det_flat,
    delta_rand,
    detector,
    hilbert_classical,
    reciprocity_tail_sum,
    symbol_class_sum,
)

nz = st.integers(-2000, 2000).filter(bool)
small_primes = st.sampled_from([2, 3, 5, 7, 11, 13])


def test_place():
    assert INF.is_archimedean and str(INF) == "inf"
    assert Place.parse("inf") == INF and Place.parse("7") == Place(7)
    with pytest.raises(ValueError):
        Place(9)


@pytest.mark.parametrize("a,b,v,expected", [
    (-1, -1, None, -1),
    (-1, -1, 2, -1),
    (2, 3, 3, -1),
    (1, -17, 2, 1),
    (1, -17, 17, 1),
    (-1, 2, None, 1),
])
def test_hilbert_classical_examples(a, b, v, expected):
    assert hilbert_classical(a, b, v) == expected


def test_hilbert_classical_rejects_zero():
    with pytest.raises(ValueError):
        hilbert_classical(0, 3, 3)


def test_hilbert_classical_matches_residue_search():
    for a, b in product(range(-30, 31), repeat=2):
        if a and b:
            for p in (2, 3, 5, 7):
                assert (hilbert_classical(a, b, p) == 1) == conic_soluble_at_p(a, b, p), (a, b, p)


@given(nz, nz, nz, small_primes)
def test_hilbert_bilinear_symmetric(a, b, c, p):
    assert hilbert_classical(a, b, p) == hilbert_classical(b, a, p)
    assert hilbert_classical(a, b * c, p) == hilbert_classical(a, b, p) * hilbert_classical(a, c, p)


@given(nz)
def test_hilbert_a_minus_a(a):
    for p in (2, 3, 5):
        assert hilbert_classical(a, -a, p) == 1
        if a != 1:
            assert hilbert_classical(a, 1 - a, p) == 1


@pytest.mark.parametrize("t1,t2,v,expected", [
    (0, 5, 3, 0), (0, 5, None, 0), (1, 3, 2, 0), (1, 1, 2, 1), (3, 3, 3, -1), (2, 5, 7, 0),
])
def test_analytic_examples(t1, t2, v, expected):
    assert analytic_symbol(t1, t2, v) == expected


@given(nz, nz)
def test_analytic_key_vanishing(t1, t2):
    # a vanishing analytic symbol means the classical symbol is +1
    for p in active_primes(t1, t2):
        s = analytic_symbol(t1, t2, p)
        if s == 0:
            assert hilbert_classical(t1, t2, p) == 1
        else:
            assert s == hilbert_classical(t1, t2, p)


@pytest.mark.parametrize("t,delta,cond", [((1, 1), 2, 2), ((-1, -1), 0, 2), ((2, 3), 0, 6), ((0, 7), 1, 1)])
def test_detector_examples(t, delta, cond):
    dv = detector(*t)
    assert (dv.delta, dv.conductor) == (delta, cond)


@given(st.integers(-3000, 3000), st.integers(-3000, 3000))
def test_detector_invariants(t1, t2):
    dv = detector(t1, t2)
    assert dv.delta == 0 or (dv.delta & (dv.delta - 1)) == 0
    if t1 and t2:
        assert (2 * t1 * t2) % dv.conductor == 0
        prod = 1
        for _, s in dv.per_prime:
            prod *= 1 + s
        assert prod == dv.delta


def test_conductor_matches_direct():
    for t1, t2 in product([-12, -5, -1, 1, 2, 3, 7, 18, 45], repeat=2):
        assert detector(t1, t2).conductor == conductor_direct(t1, t2)


def test_delta_det_examples():
    assert delta_det(1, 1, 1) == 2
    assert delta_det(0, 3, 10) == 1
    assert delta_rand(0, 3, 10) == 0


@pytest.mark.parametrize("t1,t2", [(3, 5), (-6, 35), (14, -15), (-1, 7), (30, 77)])
@pytest.mark.parametrize("z", [1, 2, 3.5, 10, 100, 10**6])
def test_delta_det_matches_direct(t1, t2, z):
    arch = 1 + analytic_symbol(t1, t2, None)
    assert delta_det(t1, t2, z) == arch * divisor_sum_direct(t1, t2, lambda s: s <= z)
    assert delta_det(t1, t2, z) + delta_rand(t1, t2, z) == detector(t1, t2).delta


@given(nz, nz, st.sampled_from([1, 2, 3, 5, 8, 13, 30]))
def test_delta_rand_middle_divisors(t1, t2, z):
    n_t = detector(t1, t2).conductor
    if n_t > z * z:
        middle = divisor_sum_direct(t1, t2, lambda s: z < s < n_t / z)
        assert delta_rand(t1, t2, z) == middle


def test_delta_det_full_range():
    # once z >= N_t every divisor is kept: delta_det = (1 + eps_inf) * delta, so delta_rand = -eps_inf * delta
    for t1, t2 in product(range(-20, 21), repeat=2):
        if t1 and t2:
            dv = detector(t1, t2)
            assert delta_det(t1, t2, dv.conductor) == (1 + dv.archimedean) * dv.delta
            assert delta_rand(t1, t2, dv.conductor) == -dv.archimedean * dv.delta


def test_delta_det_flat():
    for t1, t2 in [(3, 5), (12, -45), (-8, 27), (1, 1)]:
        assert delta_det_flat(t1, t2, 50, 10**12) == delta_det(t1, t2, 50)
    # squarefree coprime: weights equal s, so T >= N_t keeps everything
    assert delta_det_flat(3, 5, 100, 15) == delta_det(3, 5, 100)
    for t1, t2 in [(3, 5), (-7, 11), (1, 1)]:
        assert delta_det_flat(t1, t2, 10, 0.5) == 1 + analytic_symbol(t1, t2, None)
    assert delta_det_flat(0, 5, 10, 3) == 1


@pytest.mark.parametrize("p,b1,b2", [(3, 0, 1), (2, 0, 0), (5, 2, 2), (2, 1, 3), (7, 3, 0)])
def test_symbol_class_sum_zero(p, b1, b2):
    assert symbol_class_sum(p, b1, b2) == Fraction(0)


def test_reciprocity_examples():
    assert reciprocity_tail_sum(1, 1, 1) == (1, 1)
    assert reciprocity_tail_sum(-1, -1, 1) == (1, 1)
    with pytest.raises(ValueError):
        reciprocity_tail_sum(0, 1, 1)


@given(nz, nz, st.floats(0.5, 1000))
def test_reciprocity_random(t1, t2, z):
    left, right = reciprocity_tail_sum(t1, t2, z)
    assert left == right


def test_trivially_soluble_conductor_one():
    # N_t = 1: both sides are the s = 1 term
    t1, t2 = 1, -1
    assert detector(t1, t2).conductor == 1
    assert reciprocity_tail_sum(t1, t2, 1) == (1, 1)


@given(nz, nz, st.integers(1, 10), st.integers(1, 10))
def test_square_invariance_random(t1, t2, a, b):
    for p in active_primes(a * b * t1, t2):
        assert analytic_symbol(a * a * t1, b * b * t2, p) == analytic_symbol(t1, t2, p)
