import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_spectra import (
    DigitSequence,
    QuadraticIrrational,
    bcf_expand,
    bcf_reconstruct,
    birkhoff_average,
    cf_expand,
    renyi_map,
)

from oracles import exact_backward_digits, high_precision_backward_digits

SQRT2_MINUS_1 = QuadraticIrrational(-1, 1, 1, 2)


def test_expand_examples():
    third = bcf_expand(Fraction(1, 3), 3)
    assert third.digits == (2, 3, 2) and third.terminated
    assert bcf_expand(0.0, 5).digits == (2, 2, 2, 2, 2)
    assert bcf_expand(0.5, 2).digits == (3, 2)
    assert bcf_expand(1 / 3, 3).digits == (2, 3, 2)


def test_reconstruct_examples():
    assert bcf_reconstruct([2, 3, 2], exact=True) == Fraction(1, 3)
    assert bcf_reconstruct([2]) == 0.0
    assert bcf_reconstruct([3, 2]) == 0.5
    lo, hi = bcf_reconstruct([3], tail="interval")
    assert (lo, hi) == (0.5, pytest.approx(2 / 3))
    assert bcf_reconstruct([3], tail="midpoint") == pytest.approx(7 / 12)
    with pytest.raises(ValueError):
        bcf_reconstruct([1, 2])
    with pytest.raises(ValueError):
        bcf_reconstruct([2], tail="spiral")


def test_cf_examples():
    assert cf_expand(SQRT2_MINUS_1, 5).digits == (2, 2, 2, 2, 2)
    assert cf_expand(math.sqrt(2) - 1, 5).digits == (2, 2, 2, 2, 2)
    half = cf_expand(0.5, 3)
    assert half.digits == (2,) and half.terminated
    third = cf_expand(Fraction(1, 3), 3)
    assert third.digits == (3,) and third.terminated


def test_digit_floor_enforced():
    with pytest.raises(ValueError):
        DigitSequence((2, 1), "backward")
    with pytest.raises(ValueError):
        DigitSequence((0,), "regular")
    with pytest.raises(ValueError):
        DigitSequence((2,), "forward")


def test_quadratic_irrational_arithmetic():
    x = SQRT2_MINUS_1
    assert x.floor() == 0
    assert float(x) == pytest.approx(math.sqrt(2) - 1)
    assert float(x.reciprocal()) == pytest.approx(math.sqrt(2) + 1)
    assert (x.reciprocal()).floor() == 2
    assert float(1 - x) == pytest.approx(2 - math.sqrt(2))
    assert QuadraticIrrational(2, 2, -4, 2) == QuadraticIrrational(-1, -1, 2, 2)
    with pytest.raises(ValueError):
        QuadraticIrrational(0, 1, 1, 4)


def test_exact_surd_orbit_matches_high_precision_oracle():
    n = 10_000
    exact = bcf_expand(SQRT2_MINUS_1, n)
    assert list(exact.digits) == high_precision_backward_digits("sqrt(2)-1", n, dps=12_000)
    assert exact.precision_loss == 0.0


def test_birkhoff_average_examples():
    assert birkhoff_average("renyi", np.log, 0.0, 100).value == pytest.approx(LOG2 := math.log(2))
    assert birkhoff_average("renyi", lambda d: d, 0.0, 10).value == 2.0
    avg = birkhoff_average("renyi", np.log, SQRT2_MINUS_1, 10_000)
    # the backward digits of sqrt(2) - 1 alternate 2, 4
    assert avg.value == pytest.approx(1.5 * LOG2, abs=1e-12)
    assert avg.last_quarter == pytest.approx(1.5 * LOG2, abs=1e-12)
    gauss = birkhoff_average("gauss", np.log, SQRT2_MINUS_1, 50)
    assert gauss.value == pytest.approx(LOG2)
    with pytest.raises(ValueError):
        birkhoff_average("renyi", np.log, 0.3, 0)


def test_float_precision_loss_is_reported():
    shallow = bcf_expand(math.pi - 3, 5)
    deep = bcf_expand(math.pi - 3, 60)
    assert 0 < shallow.precision_loss < deep.precision_loss


def test_renyi_map_exact():
    assert renyi_map(Fraction(1, 3)) == Fraction(1, 2)
    assert renyi_map(Fraction(1, 2)) == 0
    half_root = renyi_map(SQRT2_MINUS_1)
    assert half_root == QuadraticIrrational(0, 1, 2, 2)
    assert renyi_map(half_root) == SQRT2_MINUS_1


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=0, max_value=1, max_denominator=10**15).filter(lambda f: f < 1))
def test_exact_rational_digits_match_oracle(x):
    seq = bcf_expand(x, 25)
    assert list(seq.digits) == exact_backward_digits(x, 25)
    # a rational orbit reaches the fixed point 0, so the all-2s tail reconstructs it
    if seq.terminated:
        assert bcf_reconstruct(seq, exact=True) == x


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=0, max_value=1, max_denominator=10**15).filter(lambda f: f < 1), st.integers(1, 30))
def test_shift_property_exact(x, k):
    digits = bcf_expand(x, 30).digits
    y = x
    for _ in range(k - 1):
        y = renyi_map(y)
    assert bcf_expand(y, 1).digits[0] == digits[k - 1]


def test_subnormal_point_overflows_cleanly():
    with pytest.raises(ValueError):
        cf_expand(5e-324, 3)


# below 1e-300 the next regular digit no longer fits in a float
@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True).filter(lambda v: v == 0 or v > 1e-300))
def test_digits_at_least_two(x):
    assert all(d >= 2 for d in bcf_expand(x, 30).digits)
    if x > 0:
        assert all(d >= 1 for d in cf_expand(x, 30).digits)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True), st.integers(1, 40))
def test_interval_reconstruction_contains_point(x, n):
    seq = bcf_expand(x, n)
    lo, hi = bcf_reconstruct(seq, tail="interval")
    slack = 1e-12 + seq.precision_loss
    assert lo - slack <= x <= hi + slack
