"""Acceptance checks, one test per criterion, with the contractual tolerances pinned."""
import math
import time

import numpy as np
import pytest

from birkhoff_spectra import (
    Truncation,
    XiClass,
    bcf_expand,
    bcf_reconstruct,
    bowen_dimension,
    digit_expression,
    digit_power,
    flat_part,
    gibbs_chain,
    lift_observables,
    pressure,
    renyi_map,
    ruelle_check,
    sample_gibbs_orbit,
    solve_spectrum_point,
    truncated_mean_return,
    truncated_pressure,
)
from birkhoff_spectra.induced import check_inducing_condition
from birkhoff_spectra.map_model import (
    check_growth_condition,
    check_parabolic_structure,
    with_growth_exponent,
    with_inducing_exponent,
)

from acceptance_log import criterion
from oracles import FROZEN

LOG2 = math.log(2)

# interior points of the region where p exceeds the parabolic floor
RUELLE_POINTS = [
    (0.7, 0.0), (0.7, 0.15), (0.8, -0.15), (0.8, 0.0), (0.8, 0.15),
    (0.8, 0.2), (0.9, -0.15), (0.9, 0.0), (0.9, 0.15), (0.95, 0.0),
]


def test_c01_round_trip():
    with criterion(1, "backward-digit round trip, 1e4 points, 40 digits, max error < 1e-9, < 5 s") as note:
        x = np.random.default_rng(0).random(10_000)
        start = time.perf_counter()
        errors = np.array([abs(bcf_reconstruct(bcf_expand(float(v), 40), tail="midpoint") - v) for v in x])
        elapsed = time.perf_counter() - start
        note["detail"] = (
            f"max error {errors.max():.3g}, {np.count_nonzero(errors >= 1e-9)} of {x.size} points >= 1e-9, "
            f"{elapsed:.2f} s"
        )
        assert elapsed < 5.0
        assert errors.max() < 1e-9


def test_c02_shift_identity():
    with criterion(2, "b_k(x) = b_1(R^(k-1) x) exactly, 1e3 points, k <= 30") as note:
        mismatches = 0
        for v in np.random.default_rng(1).random(1000):
            digits = bcf_expand(float(v), 30).digits
            y = float(v)
            for k in range(30):
                mismatches += bcf_expand(y, 1).digits[0] != digits[k]
                y = renyi_map(y)
        note["detail"] = f"{mismatches} mismatches"
        assert mismatches == 0


def test_c03_condition_suite(renyi):
    with criterion(3, "growth and inducing conditions pass as declared, fail when misdeclared") as note:
        growth = check_growth_condition(renyi, 10_000)
        inducing = check_inducing_condition(renyi, 100, 1000)
        neutral = check_parabolic_structure(renyi)
        note["detail"] = f"C_G = {growth.value:.6f}, C_F = {inducing.empirical_constant:.4f}"
        assert renyi.growth_exponent == 2 and growth.passed and growth.value <= 4.0 * (1 + 1e-9)
        assert renyi.inducing_exponent == 1 and inducing.passed
        assert neutral.passed and float(renyi.derivative(1, 0.0)) == 1.0
        assert not check_growth_condition(with_growth_exponent(renyi, 1.0), 1000).passed
        assert not check_growth_condition(with_growth_exponent(renyi, 3.0), 1000).passed
        assert not check_inducing_condition(with_inducing_exponent(renyi, 0.0), 100, 1000).passed
        assert not check_inducing_condition(with_inducing_exponent(renyi, 0.5), 100, 1000).passed


def test_c04_truncation_monotone(renyi, log_b1):
    with criterion(4, "P_F non-decreasing along {1..10} < {1..100} < {1..1000} at 5 (b, q)") as note:
        rng = np.random.default_rng(4)
        violations = 0
        for b, q in zip(rng.uniform(0.6, 1.0, 5), rng.uniform(-0.3, 0.5, 5)):
            values = [truncated_pressure(renyi, log_b1, b, q, range(1, n + 1)).value for n in (10, 100, 1000)]
            violations += sum(later < earlier for earlier, later in zip(values, values[1:]))
        note["detail"] = f"{violations} violations"
        assert violations == 0


def test_c05_gauss_pair_dimension(gauss):
    with criterion(5, "Bowen root of Gauss digits {1, 2} within 1e-4 of the Ulam oracle, < 10 s") as note:
        start = time.perf_counter()
        value = bowen_dimension(gauss, (1, 2))
        elapsed = time.perf_counter() - start
        note["detail"] = f"{value:.10f} vs {FROZEN['gauss_12_dimension_ulam']:.10f}, {elapsed:.2f} s"
        assert abs(value - FROZEN["gauss_12_dimension_ulam"]) < 1e-4
        assert elapsed < 10.0


def test_c06_full_renyi_dimension(renyi):
    with criterion(6, "full Renyi dimension increases toward 1 over j_max 1e2, 1e3, 1e4; final > 0.99") as note:
        values = [
            bowen_dimension(renyi, trunc=Truncation(j_max=j, n_max=j, tails=False)) for j in (100, 1000, 10_000)
        ]
        note["detail"] = ", ".join(f"{v:.8f}" for v in values)
        assert values[0] < values[1] < values[2] <= 1.0 + 1e-9
        assert values[2] > 0.99


def test_c07_root_matches_direct_pressure(renyi, log_b1):
    with criterion(7, "induced root agrees with direct pressure within residual + tail estimate, 25 points") as note:
        worst = 0.0
        for b in np.linspace(0.7, 0.95, 5):
            for q in np.linspace(-0.2, 0.2, 5):
                res = pressure(renyi, log_b1, b, q)
                direct = truncated_pressure(renyi, log_b1, b, q, range(1, res.truncation.j_max + 1), depth=1)
                assert res.in_N
                bound = res.residual + res.truncation.tail_estimate + direct.residual
                gap = abs(res.value - direct.value)
                worst = max(worst, gap / bound)
                assert gap <= bound
        note["detail"] = f"largest gap / bound = {worst:.3f}"


def test_c08_ruelle_formula(renyi, log_b1):
    with criterion(8, "finite differences of p match -lambda and -mu(phi) within 1e-3, 10 points") as note:
        worst = 0.0
        for b, q in RUELLE_POINTS:
            rep = ruelle_check(renyi, log_b1, b, q, h_step=1e-4)
            worst = max(worst, rep.residual_b, rep.residual_q)
            assert rep.residual_b < 1e-3 and rep.residual_q < 1e-3
        note["detail"] = f"largest residual {worst:.2e}"


def test_c09_convexity(renyi, log_b1):
    with criterion(9, "no midpoint-convexity violations of p on a 21 x 21 grid (tolerance 1e-9)") as note:
        bs, qs = np.linspace(0.55, 0.95, 21), np.linspace(-0.3, 0.3, 21)
        values = np.full((21, 21), np.nan)
        inside = np.zeros((21, 21), dtype=bool)
        for i, b in enumerate(bs):
            for j, q in enumerate(qs):
                res = pressure(renyi, log_b1, b, q)
                if res.is_finite and res.in_N:
                    values[i, j], inside[i, j] = res.value, True
        violations = checked = 0
        for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
            for i in range(21):
                for j in range(21):
                    lo, hi = (i - di, j - dj), (i + di, j + dj)
                    if not (0 <= lo[0] and hi[0] < 21 and 0 <= min(lo[1], hi[1]) and max(lo[1], hi[1]) < 21):
                        continue
                    if not (inside[i, j] and inside[lo] and inside[hi]):
                        continue
                    checked += 1
                    violations += values[i, j] > 0.5 * (values[lo] + values[hi]) + 1e-9
        note["detail"] = f"{inside.sum()} grid points in the region, {checked} midpoint triples, {violations} violations"
        assert inside.sum() >= 300
        assert violations == 0


def test_c10_gibbs_sandwich(renyi, log_b1):
    with criterion(10, "one constant Q bounds 500 depth-2 cylinder mass ratios") as note:
        p = pressure(renyi, log_b1, 0.8, 0.3).value
        chain = gibbs_chain(renyi, log_b1, 0.8, 0.3, p)
        words = chain.random_words(np.random.default_rng(10), 500, depth=2)
        ratios = chain.gibbs_ratios(words)
        q = chain.gibbs_constant
        note["detail"] = f"Q = {q:.2f}, ratios in [{ratios.min():.3f}, {ratios.max():.3f}]"
        assert math.isfinite(q)
        assert np.all(ratios >= 1.0 / q) and np.all(ratios <= q)


def test_c11_equilibrium_identity(renyi, log_b1):
    with criterion(11, "h + mu(-q phi - b log|f'|) = p within 2e-3, 10 points") as note:
        worst = 0.0
        for b, q in RUELLE_POINTS:
            p = pressure(renyi, log_b1, b, q).value
            chain = gibbs_chain(renyi, log_b1, b, q, p)
            obs = lift_observables(chain)
            lifted = obs.entropy - q * obs.mean_phi - b * obs.lyapunov - p
            # the same identity with the integrals replaced by pressure derivatives
            rep = ruelle_check(renyi, log_b1, b, q)
            from_derivatives = obs.entropy + q * rep.fd_q + b * rep.fd_b - p
            worst = max(worst, abs(lifted), abs(from_derivatives))
            assert abs(lifted) <= 2e-3 and abs(from_derivatives) <= 2e-3
        note["detail"] = f"largest defect {worst:.2e}"


def test_c12_khinchin_spectrum(renyi, log_b1):
    with criterion(12, "log-digit spectrum strictly decreasing in (0, 1) with q < 0; k(log 2) = 1; < 60 s") as note:
        start = time.perf_counter()
        points = [solve_spectrum_point(renyi, log_b1, a) for a in (0.8, 1.0, 1.5, 2.0)]
        flat = flat_part(renyi, log_b1, LOG2)
        elapsed = time.perf_counter() - start
        b = [p.b for p in points]
        note["detail"] = "b = " + ", ".join(f"{v:.6f}" for v in b) + f", {elapsed:.1f} s"
        assert all(x > y for x, y in zip(b, b[1:]))
        for p in points:
            assert 0 < p.b < 1 and p.q < 0
            assert p.residuals[0] <= 1e-8 and p.residuals[1] <= 1e-6
            assert abs(p.entropy / p.lyapunov - p.b) <= 2e-3
        assert flat.flat and flat.b == 1.0
        assert elapsed < 60.0


def test_c13_arithmetic_mean_flatness(renyi):
    with criterion(13, "digit-mean spectra flat with b = 1 (r = 1 at 2.5, 4, 8; r = 2 at 4.5, 9)") as note:
        cases = [(1.0, a) for a in (2.5, 4.0, 8.0)] + [(2.0, a) for a in (4.5, 9.0)]
        tags = []
        for r, alpha in cases:
            pt = solve_spectrum_point(renyi, digit_power(renyi, r), alpha)
            tags.append(pt.case_tag)
            assert pt.flat and pt.b == 1.0 and pt.b == renyi.dimension
        note["detail"] = ", ".join(tags)


def test_c14_psi_dichotomy(renyi, log_b1):
    with criterion(14, "psi = log non-flat off A; psi = log^2 (infinite class) fully flat") as note:
        squared = digit_expression(renyi, "log(d)**2", XiClass.infinite())
        off_a = [0.8, 1.2, 2.0, 3.0]
        sampled = [0.6, 1.0, 3.0, 10.0]
        for alpha in off_a:
            assert not flat_part(renyi, log_b1, alpha).flat
            pt = solve_spectrum_point(renyi, log_b1, alpha)
            assert not pt.flat and pt.b < 1.0
        for alpha in sampled:
            pt = solve_spectrum_point(renyi, squared, alpha)
            assert pt.flat and pt.b == 1.0
        note["detail"] = f"non-flat at {off_a}, flat at {sampled}"


def test_c15_orbit_sampling(khinchin_point, khinchin_chain):
    with criterion(15, "sampled Birkhoff mean within 0.02 of alpha, length 1e6, fixed seed") as note:
        orbit = sample_gibbs_orbit(khinchin_chain, 1_000_000, 1)
        note["detail"] = f"alpha {khinchin_point.alpha}, sampled mean {orbit.average:.5f}"
        assert len(orbit.digits) == 1_000_000
        assert abs(orbit.average - khinchin_point.alpha) < 0.02


def test_c16_divergent_return(renyi, log_b1):
    with criterion(16, "mean return time at (b, q) = (1, 0) grows without bound in n_max") as note:
        chain = gibbs_chain(renyi, log_b1, 1.0, 0.0, 0.0)
        sizes = (50, 200, 800, 3200, 12800)
        means = [truncated_mean_return(renyi, log_b1, 1.0, 0.0, 0.0, n) for n in sizes]
        note["detail"] = "truncated means " + ", ".join(f"{m:.3f}" for m in means)
        assert chain.mean_return == math.inf
        # a divergent logarithmic sum gains a fixed amount per factor 4
        steps = np.diff(means)
        assert np.all(steps > 1.0)
        assert steps[-1] >= 0.9 * steps[0]
