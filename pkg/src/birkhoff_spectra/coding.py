"""Words over the branch alphabet and their cylinder intervals.

The cylinder of a word ``ω = ω_1 … ω_n`` is ``T_ω([0, 1])`` with
``T_ω = T_{ω_1} ∘ ⋯ ∘ T_{ω_n}``; it collects the points whose first ``n``
digits are ``ω``.  Cylinders shrink to points as words grow, which defines
the coding map from infinite words to ``[0, 1]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .map_model import MapModel

DEFAULT_MAX_DEPTH = 64


class DepthOverflowError(ValueError):
    """A word is longer than the configured maximum depth."""


@dataclass(frozen=True)
class Word:
    """A finite word of branch indices; the empty word stands for ``[0, 1]``."""

    digits: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        digits = tuple(int(d) for d in self.digits)
        if any(d < 1 for d in digits):
            raise ValueError("branch indices are 1-based")
        object.__setattr__(self, "digits", digits)

    @classmethod
    def of(cls, digits: Iterable[int]) -> "Word":
        return cls(tuple(digits))

    def __len__(self) -> int:
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    def extend(self, *more: int) -> "Word":
        return Word(self.digits + tuple(more))

    def __add__(self, other: "Word") -> "Word":
        return Word(self.digits + other.digits)


@dataclass(frozen=True)
class CylinderInterval:
    """Closed interval ``[lo, hi]`` spanned by the cylinder of ``word``."""

    lo: float
    hi: float
    word: Word

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, other: "CylinderInterval", slack: float = 0.0) -> bool:
        return self.lo - slack <= other.lo and other.hi <= self.hi + slack


def compose_inverse(model: MapModel, digits: Sequence[int], y) -> np.ndarray:
    """Evaluate ``T_ω(y)`` for the word ``digits`` (innermost branch applied first)."""
    y = np.asarray(y, dtype=float)
    for d in reversed(digits):
        y = model.inverse(d, y)
    return y


def cylinder_interval(model: MapModel, word: Word | Sequence[int], max_depth: int = DEFAULT_MAX_DEPTH) -> CylinderInterval:
    """Cylinder ``T_ω([0, 1])`` with its endpoints ordered."""
    word = word if isinstance(word, Word) else Word.of(word)
    if len(word) > max_depth:
        raise DepthOverflowError(f"word of length {len(word)} exceeds max depth {max_depth}")
    ends = compose_inverse(model, word.digits, np.array([0.0, 1.0]))
    return CylinderInterval(float(ends.min()), float(ends.max()), word)


@dataclass(frozen=True)
class PointEstimate:
    """A point of ``[0, 1]`` with an error radius; ``exact`` marks closed-form solves."""

    value: float
    radius: float
    exact: bool


def _mobius_product(model: MapModel, digits: Sequence[int]) -> np.ndarray:
    mat = np.array([[1, 0], [0, 1]], dtype=object)
    for d in digits:
        mat = mat.dot(model.mobius_fn(d))
    return mat


def _mobius_fixed_point(mat: np.ndarray, lo: float, hi: float) -> float:
    """Fixed point in ``[lo, hi]`` of ``y ↦ (a y + b)/(c y + d)``."""
    a, b = (int(v) for v in mat[0])
    c, d = (int(v) for v in mat[1])
    if c == 0:
        return float(Fraction(b, d - a)) if d != a else lo
    # c y^2 + (d - a) y - b = 0
    disc = (d - a) ** 2 + 4 * b * c
    root = math.sqrt(disc)
    candidates = [(-(d - a) + root) / (2 * c), (-(d - a) - root) / (2 * c)]
    return min(candidates, key=lambda y: 0.0 if lo - 1e-15 <= y <= hi + 1e-15 else min(abs(y - lo), abs(y - hi)))


def refine_point(
    model: MapModel,
    word: Word | Sequence[int],
    periodic_tail: Optional[Word | Sequence[int]] = None,
) -> PointEstimate:
    """Locate the point coded by ``word``.

    Without ``periodic_tail`` the midpoint of the cylinder is returned with
    its half-width as error radius.  With ``periodic_tail`` the point coded by
    ``word`` followed by the tail repeated forever is computed by solving the
    fixed-point equation of the tail's composed branch: exactly (quadratic
    formula) for Möbius branches, by contraction otherwise.
    """
    word = word if isinstance(word, Word) else Word.of(word)
    if periodic_tail is None:
        if not len(word):
            raise ValueError("refine_point needs a nonempty word")
        cyl = cylinder_interval(model, word)
        return PointEstimate(cyl.midpoint, 0.5 * cyl.diameter, False)

    tail = periodic_tail if isinstance(periodic_tail, Word) else Word.of(periodic_tail)
    if not len(tail):
        raise ValueError("periodic tail must be nonempty")
    tail_cyl = cylinder_interval(model, tail)
    if len(set(tail.digits)) == 1 and model.is_parabolic(tail.digits[0]):
        fixed = model.fixed_point(tail.digits[0])
    elif model.mobius_fn is not None:
        fixed = _mobius_fixed_point(_mobius_product(model, tail.digits), tail_cyl.lo, tail_cyl.hi)
    else:
        fixed = tail_cyl.midpoint
        for _ in range(10_000):
            nxt = float(compose_inverse(model, tail.digits, fixed))
            if abs(nxt - fixed) < 1e-15:
                break
            fixed = nxt
    value = float(compose_inverse(model, word.digits, fixed))
    return PointEstimate(value, 0.0, True)


def depth_words(alphabet: Sequence[int], depth: int) -> np.ndarray:
    """All words of length ``depth`` over ``alphabet`` as rows of an integer array."""
    alphabet = np.asarray(alphabet, dtype=np.int64)
    if depth == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*([alphabet] * depth), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def birkhoff_sum_bounds(model: MapModel, phi_branch, words: np.ndarray, tail_points=(0.0, 0.5, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """Min and max over sampled points of ``Σ_m ψ(f^m x)`` on each word's cylinder.

    ``phi_branch(i, x)`` gives the summand on branch ``i``.  The cylinder of
    each word is sampled at the images of ``tail_points`` (both endpoints and
    the midpoint of ``[0, 1]``), which bounds the sum exactly whenever the
    summand is monotone on cylinders.
    """
    words = np.asarray(words, dtype=np.int64)
    n_words, depth = words.shape
    y = np.broadcast_to(np.asarray(tail_points, dtype=float), (n_words, len(tail_points))).copy()
    total = np.zeros_like(y)
    for m in range(depth - 1, -1, -1):
        digit = words[:, m][:, None].astype(float)
        y = model.inverse(digit, y)
        total += phi_branch(digit, y)
    return total.min(axis=1), total.max(axis=1)
