import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_spectra.coding import (
    DepthOverflowError,
    Word,
    birkhoff_sum_bounds,
    compose_inverse,
    cylinder_interval,
    depth_words,
    refine_point,
)
from birkhoff_spectra.map_model import build_model

words = st.lists(st.integers(min_value=1, max_value=30), min_size=1, max_size=12)


def test_word_validation_and_composition():
    assert Word.of([1, 2]) + Word((3,)) == Word((1, 2, 3))
    assert Word((1,)).extend(2, 2).digits == (1, 2, 2)
    with pytest.raises(ValueError):
        Word((0,))


def test_cylinder_examples(renyi):
    one = cylinder_interval(renyi, [1])
    assert (one.lo, one.hi) == (0.0, 0.5)
    two_two = cylinder_interval(renyi, [2, 2])
    assert two_two.lo == pytest.approx(0.6, abs=1e-15)
    assert two_two.hi == pytest.approx(0.625, abs=1e-15)
    empty = cylinder_interval(renyi, [])
    assert (empty.lo, empty.hi) == (0.0, 1.0)


def test_cylinder_depth_limit(renyi):
    with pytest.raises(DepthOverflowError):
        cylinder_interval(renyi, [2] * 10, max_depth=5)


def test_refine_periodic_points(renyi):
    golden = refine_point(renyi, [], periodic_tail=[2])
    assert golden.exact
    assert golden.value == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)
    assert refine_point(renyi, [], periodic_tail=[1]).value == 0.0


def test_refine_prefix_lies_in_parent(renyi):
    est = refine_point(renyi, [2, 3, 2])
    parent = cylinder_interval(renyi, [2, 2])
    assert est.radius < 0.0125
    # [2, 3, ...] lies in Δ_2 and nowhere inside [2, 2]
    outer = cylinder_interval(renyi, [2])
    assert outer.lo <= est.value - est.radius and est.value + est.radius <= outer.hi
    assert not parent.lo <= est.value <= parent.hi


def test_refine_periodic_gauss(gauss):
    # [1, 1, ...] codes the golden-ratio conjugate under the Gauss map
    assert refine_point(gauss, [], periodic_tail=[1]).value == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)
    # [2, 2, ...] codes sqrt(2) - 1
    assert refine_point(gauss, [], periodic_tail=[2]).value == pytest.approx(math.sqrt(2) - 1, abs=1e-15)


def test_depth_words_enumerates_all():
    w = depth_words([1, 2, 3], 2)
    assert w.shape == (9, 2)
    assert len({tuple(r) for r in w}) == 9
    assert depth_words([1, 2], 0).shape == (1, 0)


def test_birkhoff_sum_bounds_constant_potential(renyi):
    lo, hi = birkhoff_sum_bounds(renyi, lambda i, x: np.ones_like(x), depth_words([1, 2, 3], 3))
    assert np.all(lo == 3) and np.all(hi == 3)


def test_birkhoff_sum_bounds_contain_samples(renyi):
    def phi(i, x):
        return -np.log(renyi.derivative(i, x))

    w = np.array([[2, 3], [1, 4]])
    lo, hi = birkhoff_sum_bounds(renyi, phi, w)
    for k, word in enumerate(w):
        y = np.linspace(0, 1, 11)
        x0 = compose_inverse(renyi, word, y)
        total = phi(word[0], x0) + phi(word[1], compose_inverse(renyi, word[1:], y))
        assert np.all(total >= lo[k] - 1e-12) and np.all(total <= hi[k] + 1e-12)


@settings(max_examples=150, deadline=None)
@given(words, st.integers(min_value=1, max_value=30))
def test_cylinders_nest(digits, extra):
    for model in (build_model("renyi"), build_model("gauss")):
        parent = cylinder_interval(model, digits)
        child = cylinder_interval(model, digits + [extra])
        assert parent.contains(child, slack=1e-15)
        assert child.diameter <= parent.diameter


@settings(max_examples=150, deadline=None)
@given(words)
def test_forward_map_shifts_cylinders(digits):
    model = build_model("renyi")
    cyl = cylinder_interval(model, digits)
    x = cyl.midpoint
    if len(digits) > 1:
        tail = cylinder_interval(model, digits[1:])
        y = float(model.forward(digits[0], x))
        assert tail.lo - 1e-9 <= y <= tail.hi + 1e-9


def test_diameters_shrink_with_depth(renyi):
    rng = np.random.default_rng(5)
    for depth, bound in ((10, 0.1), (40, 0.03), (60, 0.02)):
        sample = rng.integers(1, 6, size=(200, depth))
        worst = max(cylinder_interval(renyi, list(w)).diameter for w in sample)
        assert worst < bound
    # the slowest cylinders are those of the parabolic branch: [1]^n has diameter 1/(n+1)
    assert cylinder_interval(renyi, [1] * 60).diameter == pytest.approx(1 / 61, rel=1e-12)
