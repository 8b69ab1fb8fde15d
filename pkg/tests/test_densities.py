import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import grid_omega_inf, mc_omega_p

from conicbundle.densities import (
    DensityBudgetError,
    Interval,
    default_gamma,
    omega_inf,
    omega_p,
    singular_series,
)
from conicbundle.forms import FormTuple, Shape, Status, is_separable, qp_points_exist, sample_tuple

SUM_SQ = FormTuple.from_coeffs([[[1, 0, 1]], [[1, 0, 1]], []])
NEG = FormTuple.from_coeffs([[[-1, 0, -1]], [[-1, 0, -2]], []])
INSOLUBLE_2 = FormTuple.from_coeffs([[[-6, -8, 3]], [[-5, -8, 7]], []])

finite = st.floats(-1e6, 1e6, allow_nan=False)


def _separable_draws(shape, H, seeds):
    for s in seeds:
        F = sample_tuple(Shape.parse(shape), H, s)
        if is_separable(F):
            yield F


@given(finite, finite, finite, finite)
def test_interval_ops_enclose(a, b, c, d):
    x = Interval(min(a, b), max(a, b))
    y = Interval(min(c, d), max(c, d))
    s, m = x + y, x * y
    for u in (x.lo, x.hi, x.mid):
        for v in (y.lo, y.hi, y.mid):
            assert Fraction(s.lo) <= Fraction(u) + Fraction(v) <= Fraction(s.hi)
            assert Fraction(m.lo) <= Fraction(u) * Fraction(v) <= Fraction(m.hi)


def test_interval_basics():
    iv = Interval.from_fractions(Fraction(1, 3), Fraction(2, 3))
    assert Fraction(iv.lo) <= Fraction(1, 3) and Fraction(iv.hi) >= Fraction(2, 3)
    assert 0.5 in iv and Interval(0.4, 0.5).subset_of(iv)
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)


def test_omega_p_units_example():
    # Phi_i are units at 3 on every primitive vector: every fibre is smooth and soluble
    assert omega_p(SUM_SQ, 3).to_list() == [1.0, 1.0]


def test_omega_p_insoluble_is_zero():
    iv = omega_p(INSOLUBLE_2, 2, 1e-4)
    assert iv.lo == 0.0 and iv.hi <= 1e-4


@pytest.mark.parametrize("seed", range(8))
def test_omega_p_range_and_nesting(seed):
    for F in _separable_draws("1,1,1:1,1,1", 10, [seed]):
        for p in (2, 3, 5):
            a = omega_p(F, p, 1e-2)
            b = omega_p(F, p, 1e-3)
            assert 0.0 <= a.lo and a.hi <= 2.0 + 1e-12
            assert a.width <= 1e-2 + 1e-12 and b.width <= 1e-3 + 1e-12
            assert b.subset_of(a)


def test_omega_p_budget():
    with pytest.raises(DensityBudgetError) as exc:
        # t1 = 0 is a root in Z_p, so classes near it never settle
        omega_p(FormTuple.from_coeffs([[[0, 1]], [[1, 0]], []]), 2, 1e-9, max_classes=50)
    assert exc.value.best.lo >= 0.0 and exc.value.best.hi <= 2.0


@pytest.mark.parametrize("p", [2, 3, 5])
def test_omega_p_matches_monte_carlo(p):
    for k, F in enumerate(_separable_draws("1,1,0:2,2", 15, range(40, 60))):
        if k >= 3:
            break
        iv = omega_p(F, p, 1e-3)
        mean, se, n = mc_omega_p(F, p, n=200_000, seed=p * 100 + k)
        assert iv.lo - 5 * se - 1e-3 <= mean <= iv.hi + 5 * se + 1e-3, (F.to_json(), p, iv, mean)


def test_omega_inf_examples():
    # positive definite: the full box counts twice
    iv = omega_inf(SUM_SQ, 0.25, 64)
    full = 2 * (2 * 0.75) ** 2
    assert iv.lo <= full <= iv.hi and iv.width < 1e-9
    assert omega_inf(NEG, 0.25, 64).to_list() == [0.0, 0.0]


def test_omega_inf_input_checks():
    with pytest.raises(ValueError):
        omega_inf(SUM_SQ, 1.5)
    with pytest.raises(ValueError):
        omega_inf(SUM_SQ, 0.5, 7)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_omega_inf_contains_grid_oracle(seed):
    F = sample_tuple(Shape.parse("1,1,1:1,1,1"), 10, seed)
    gamma = 0.1
    iv = omega_inf(F, gamma, 256)
    ref = grid_omega_inf(F, gamma, 2048)
    # the fine midpoint rule may miss cells next to a root curve; both live in [0, 8(1-gamma)^2]
    assert iv.lo - 1e-9 <= ref <= iv.hi + 1e-9
    assert 0.0 <= iv.lo and iv.hi <= 8 * (1 - gamma) ** 2 + 1e-9


def test_omega_inf_refines():
    F = FormTuple.from_coeffs([[[1, -2]], [[-3, 1]], [[1, 1]]])
    coarse, fine = omega_inf(F, 0.1, 64), omega_inf(F, 0.1, 512)
    assert fine.width < coarse.width
    assert fine.lo <= coarse.hi and coarse.lo <= fine.hi


def test_default_gamma():
    assert default_gamma(2) == 0.5
    assert 0.01 <= default_gamma(10**6) <= 0.5
    assert default_gamma(10**6) >= default_gamma(10**7)


@pytest.mark.parametrize("seed", range(10))
def test_certified_class_floor(seed):
    # a class of mass mu with symbol +1 contributes at least 2 mu, hence omega_p >= mu / (1 - p^-2)
    for F in _separable_draws("1,1,0:2,2", 25, [300 + seed]):
        for p in (2, 3, 5, 7):
            v = qp_points_exist(F, p, 6)
            tol = 1e-3
            if v.status is Status.SOLUBLE:
                mu = Fraction(v.certificate["mass"])
                assert omega_p(F, p, tol).lo >= float(mu / (1 - Fraction(1, p * p))) - tol
            elif v.status is Status.INSOLUBLE:
                assert omega_p(F, p, tol).lo == 0.0


def test_sing_zero_when_not_real():
    prof = singular_series(NEG, 20, 0.2)
    assert prof.sing.to_list() == [0.0, 0.0]


def test_sing_empty_product():
    prof = singular_series(SUM_SQ, 1.5, 0.25, grid_n=64)
    assert prof.omega_p == {}
    expected = 6 / math.pi**2 * 2 * 1.5**2
    assert prof.sing.lo <= expected <= prof.sing.hi


def test_sing_is_product():
    F = FormTuple.from_coeffs([[[1, 3]], [[-2, 1]], [[1, 0, 5]]])
    prof = singular_series(F, 13, 0.2, tol=1e-3, grid_n=128, report_omitted_up_to=40)
    lo = 6 / math.pi**2 * prof.omega_inf.lo * math.prod(iv.lo for iv in prof.omega_p.values())
    hi = 6 / math.pi**2 * prof.omega_inf.hi * math.prod(iv.hi for iv in prof.omega_p.values())
    assert prof.sing.lo <= max(lo, 0.0) * (1 + 1e-12) and hi * (1 - 1e-12) <= prof.sing.hi
    assert sorted(prof.omega_p) == [2, 3, 5, 7, 11, 13]
    assert all(p > 13 for p in prof.omitted)
    obj = json.loads(prof.to_json())
    assert set(obj) >= {"omega_inf", "omega_p", "sing", "prime_cutoff", "gamma", "omitted_primes"}
    assert obj["sing"] == prof.sing.to_list()
