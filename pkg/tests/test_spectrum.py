import math

import numpy as np
import pytest

from birkhoff_spectra import (
    SpectrumConfig,
    XiClass,
    digit_expression,
    digit_power,
    flat_part,
    log_digit,
    solve_spectrum_point,
    spectrum_curve,
)
from birkhoff_spectra.spectrum import alpha_endpoints, audit_curve, b_of_q, parabolic_range

from oracles import FROZEN

LOG2 = math.log(2)


def test_parabolic_range(renyi, log_b1, gauss):
    assert parabolic_range(renyi, log_b1) == (pytest.approx(LOG2), pytest.approx(LOG2))
    assert parabolic_range(gauss, log_digit(gauss)) is None


def test_alpha_endpoints(renyi, log_b1, gauss):
    ends = alpha_endpoints(renyi, log_b1)
    assert ends.A == pytest.approx((LOG2, LOG2))
    assert ends.alpha_inf == pytest.approx(LOG2) and not ends.inf_one_sided
    assert ends.alpha_sup == math.inf
    assert alpha_endpoints(renyi, digit_power(renyi, 1.0)).alpha_inf == pytest.approx(2.0)
    gauss_ends = alpha_endpoints(gauss, log_digit(gauss))
    assert gauss_ends.A is None
    assert 0 <= gauss_ends.alpha_inf < 1e-3


def test_flat_part_examples(renyi, log_b1):
    b2 = flat_part(renyi, digit_power(renyi, 1.0), 3.0)
    assert b2.flat and b2.reason == "B2" and b2.b == 1.0
    a = flat_part(renyi, log_b1, LOG2)
    assert a.flat and a.reason == "A" and a.b == 1.0
    assert not flat_part(renyi, log_b1, 1.5).flat


def test_interior_point(khinchin_point):
    pt = khinchin_point
    assert 0 < pt.b < 1 and pt.q < 0
    assert pt.case_tag == "B3"
    assert pt.residuals[0] <= 1e-8 and pt.residuals[1] <= 1e-6
    assert pt.mean_phi == pytest.approx(1.2, abs=1e-4)
    assert pt.entropy / pt.lyapunov == pytest.approx(pt.b, abs=2e-3)


def test_interior_point_matches_plain_route(khinchin_point):
    assert khinchin_point.b == pytest.approx(FROZEN["renyi_log_b1_spectrum_1p2"], abs=1e-6)


def test_envelope_condition(renyi, log_b1, khinchin_point):
    q, h = khinchin_point.q, 1e-4
    slope = (b_of_q(renyi, log_b1, 1.2, q + h) - b_of_q(renyi, log_b1, 1.2, q - h)) / (2 * h)
    assert abs(slope) < 1e-5
    assert b_of_q(renyi, log_b1, 1.2, q) == pytest.approx(khinchin_point.b, abs=1e-10)


def test_near_flat_endpoint_is_numerically_one(renyi, log_b1):
    # q(α) shrinks like exp(-c/(α - log 2)); at 1e-3 above log 2 it underflows
    pt = solve_spectrum_point(renyi, log_b1, LOG2 + 1e-3)
    assert pt.case_tag == "BOUNDARY"
    assert abs(pt.b - 1.0) < 1e-9


def test_gauss_subsystem_point(gauss):
    digits = tuple(range(1, 51))
    cfg = SpectrumConfig(digits=digits)
    pt = solve_spectrum_point(gauss, log_digit(gauss), 2.0, cfg)
    assert pt.case_tag not in ("BOUNDARY", "FLAT_A", "FLAT_INFTY")
    assert pt.residuals[0] <= 1e-8 and pt.residuals[1] <= 1e-6
    assert pt.b == pytest.approx(FROZEN["gauss_1_50_log_a1_spectrum_2p0"], abs=1e-5)


def test_curve_strictly_decreasing(renyi, log_b1):
    alphas = [0.8, 1.0, 1.5, 2.0, 3.0]
    points = spectrum_curve(renyi, log_b1, alphas)
    b = [p.b for p in points]
    assert all(x > y for x, y in zip(b, b[1:]))
    audit = audit_curve(points, parabolic_range(renyi, log_b1), 1.0)
    assert audit.monotone_right and audit.sign_law and audit.below_dimension


def test_flat_curves(renyi):
    for r, alphas in ((1.0, [2.5, 4.0, 8.0]), (2.0, [4.5, 9.0])):
        points = spectrum_curve(renyi, digit_power(renyi, r), alphas)
        assert all(p.flat and p.b == 1.0 and p.q is None for p in points)


def test_curve_inside_A_is_constant(renyi):
    pts = spectrum_curve(renyi, digit_power(renyi, 1.0), [2.0])
    assert pts[0].flat and pts[0].case_tag == "FLAT_A" and pts[0].b == 1.0


def test_zero_class_sign_law_and_floor(renyi):
    phi = digit_expression(renyi, "1/d", XiClass.zero())
    points = spectrum_curve(renyi, phi, [0.1, 0.3, 0.45])
    for p in points:
        assert p.case_tag == "B1"
        assert p.q > 0
        assert p.b >= renyi.s_inf - 1e-6
        assert p.mean_phi == pytest.approx(p.alpha, abs=1e-4)
    b = [p.b for p in points]
    # left of A the spectrum increases
    assert b[0] < b[1] < b[2] <= 1.0 + 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        SpectrumConfig(pressure_tol=0.0)
    with pytest.raises(ValueError):
        SpectrumConfig(q_policy="sideways")


def test_positive_policy_on_gauss(gauss):
    cfg = SpectrumConfig(digits=tuple(range(1, 21)), q_policy="positive")
    pt = solve_spectrum_point(gauss, log_digit(gauss), 0.5, cfg)
    assert pt.q > 0 and 0 < pt.b < 1
    assert np.isclose(pt.mean_phi, 0.5, atol=1e-4)
