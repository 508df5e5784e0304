import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_spectra.map_model import (
    ModelValidationError,
    XiClass,
    build_model,
    check_distortion,
    check_growth_condition,
    check_l_condition,
    check_parabolic_structure,
    check_partition,
    check_positivity,
    classify_potential,
    constant_potential,
    digit_expression,
    digit_power,
    digit_table,
    log_derivative,
    log_digit,
    with_growth_exponent,
)

RENYI_SPEC = {
    "inverse": "1 - 1/(y + i)",
    "forward": "1/(1 - x) - i",
    "derivative": "1/(1 - x)**2",
    "domain_lo": "1 - 1/i",
    "domain_hi": "1 - 1/(i + 1)",
    "kappa": "2",
    "gamma": "1",
    "parabolic": "1",
    "parabolic_points": "0",
    "digit_label": "i + 1",
}


def test_renyi_branch_values(renyi):
    assert renyi.inverse(1, 0.0) == 0.0
    assert renyi.derivative(1, 0.0) == 1.0
    assert renyi.inverse(2, 0.0) == 0.5
    assert renyi.parabolic_set == (1,)
    assert renyi.s_inf == 0.5


def test_build_model_dispatch():
    assert build_model("renyi").name == "renyi"
    assert build_model("gauss").parabolic_set == ()
    with pytest.raises(ModelValidationError):
        build_model("tent")
    with pytest.raises(ModelValidationError):
        build_model("custom", {"inverse": "y"})


def test_custom_model_matches_builtin(renyi):
    custom = build_model("custom", RENYI_SPEC)
    i = np.arange(1, 50, dtype=float)
    y = np.linspace(0, 1, 7)[:, None]
    assert np.allclose(custom.inverse(i, y), renyi.inverse(i, y))
    x = np.array([0.1, 0.55, 0.9, 0.999])
    assert np.array_equal(custom.branch_index(x), renyi.branch_index(x))
    assert check_growth_condition(custom, 1000).passed


def test_custom_model_rejects_bad_exponent():
    spec = dict(RENYI_SPEC, gamma="1.5")
    with pytest.raises(ModelValidationError):
        build_model("custom", spec)


@pytest.mark.parametrize("name", ["renyi", "gauss"])
def test_growth_condition_passes(name):
    rep = check_growth_condition(build_model(name), 10_000)
    assert rep.passed
    assert rep.value <= 4.0 * (1 + 1e-9)


def test_growth_condition_misdeclared_exponent_fails(renyi):
    assert not check_growth_condition(with_growth_exponent(renyi, 1.0), 100).passed


@pytest.mark.parametrize("name", ["renyi", "gauss"])
def test_structural_checks(name):
    model = build_model(name)
    assert check_partition(model).passed
    assert check_parabolic_structure(model).passed
    assert check_distortion(model).passed


def test_potential_checks(renyi, log_b1):
    assert check_positivity(log_b1).passed
    assert check_l_condition(log_b1).passed
    assert not check_positivity(constant_potential(renyi, -1.0)).passed


def test_l_condition_detects_wrong_constants(renyi):
    wrong = digit_expression(renyi, "log(d)", XiClass.finite(0.5, 0.5, 0.6))
    assert not check_l_condition(wrong).passed


def test_classify_log_digit_tends_to_half(renyi, log_b1):
    cls = classify_potential(renyi, log_b1, 10_000)
    assert cls.consistent
    assert cls.observed_class == "finite"
    assert cls.estimated_limit == pytest.approx(0.5, abs=0.03)


def test_classify_digit_is_infinite(renyi):
    cls = classify_potential(renyi, digit_power(renyi, 1.0), 1000)
    assert cls.observed_class == "infinite" and cls.consistent


def test_classify_constant_is_zero(renyi):
    cls = classify_potential(renyi, constant_potential(renyi, 1.0), 1000)
    assert cls.observed_class == "zero" and cls.consistent


def test_classify_warns_but_keeps_declared_class(renyi):
    misdeclared = digit_expression(renyi, "d", XiClass.zero())
    with pytest.warns(UserWarning):
        cls = classify_potential(renyi, misdeclared, 1000)
    assert not cls.consistent
    assert misdeclared.xi_class.kind == "zero"


def test_digit_potentials_on_renyi(renyi):
    x = np.array([0.0, 0.4, 0.5, 0.7])
    assert np.allclose(log_digit(renyi).eval(x), np.log([2, 2, 3, 4]))
    assert np.allclose(digit_power(renyi, 2).eval(x), [4, 4, 9, 16])
    table = digit_table(renyi, [1.0, 2.0, 3.0])
    assert np.allclose(table.eval(x[:3]), [1.0, 1.0, 2.0])
    assert log_derivative(renyi).eval(0.5) == pytest.approx(math.log(4))


def test_parabolic_value(renyi, log_b1):
    assert log_b1.parabolic_value(1) == pytest.approx(math.log(2))


@settings(max_examples=200, deadline=None)
# beyond 1 - 1e-6 neighbouring branch domains stop being distinct floats
@given(st.floats(min_value=0.0, max_value=1.0 - 1e-6))
def test_renyi_forward_inverts_inverse(x):
    model = build_model("renyi")
    i = model.branch_index(x)
    lo, hi = model.domain_interval(i)
    assert lo <= x < hi
    y = model.forward(i, x)
    # forward rounding error grows like eps times the derivative 1/(1-x)^2
    slack = 8 * np.finfo(float).eps / (1 - x) ** 2
    assert -slack <= y < 1 + slack
    assert model.inverse(i, y) == pytest.approx(x, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=10_000), st.floats(min_value=0.0, max_value=1.0))
def test_inverse_derivative_matches_forward(i, y):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for model in (build_model("renyi"), build_model("gauss")):
            x = model.inverse(i, y)
            expected = -math.log(model.derivative(i, x))
            assert model.log_inverse_derivative(i, y) == pytest.approx(expected, rel=1e-9, abs=1e-12)
