"""Backward and regular continued-fraction digits, Birkhoff averages and orbit sampling.

Backward digits come from the Rényi map ``R(x) = 1/(1-x) mod 1`` via
``b = ⌊1/(1-x)⌋ + 1``, so that ``x = 1 - 1/(b_1 - 1/(b_2 - …))`` with every
``b_k ≥ 2``.  Regular digits come from the Gauss map ``G(x) = 1/x mod 1`` via
``a = ⌊1/x⌋``.  Inputs may be floats, :class:`fractions.Fraction` values
(exact rational orbits) or :class:`QuadraticIrrational` values (exact
eventually periodic orbits).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np

from .gibbs import GibbsChain
from .map_model import MapModel
from .transfer import InfinitePressureError

SNAP_TOL = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class DigitSequence:
    """Digits of a point; ``terminated`` marks orbits that hit a branch boundary.

    ``precision_loss`` estimates the absolute error of the last floating-point
    orbit point (machine epsilon times the accumulated expansion).
    """

    digits: tuple[int, ...]
    kind: str
    terminated: bool = False
    precision_loss: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("backward", "regular"):
            raise ValueError(f"unknown digit kind {self.kind!r}")
        floor = 2 if self.kind == "backward" else 1
        if any(d < floor for d in self.digits):
            raise ValueError(f"{self.kind} digits must be at least {floor}")

    def __len__(self) -> int:
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)


# --------------------------------------------------------------------------
# exact quadratic surds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticIrrational:
    """The number ``(p + r·√d) / q`` with integers and ``d`` not a perfect square."""

    p: int
    r: int
    q: int
    d: int

    def __post_init__(self) -> None:
        if self.q == 0:
            raise ZeroDivisionError("denominator is zero")
        if self.d < 2 or math.isqrt(self.d) ** 2 == self.d:
            raise ValueError("d must be a positive non-square integer")
        p, r, q = self.p, self.r, self.q
        if q < 0:
            p, r, q = -p, -r, -q
        g = math.gcd(math.gcd(p, r), q)
        object.__setattr__(self, "p", p // g)
        object.__setattr__(self, "r", r // g)
        object.__setattr__(self, "q", q // g)

    def __float__(self) -> float:
        return (self.p + self.r * math.sqrt(self.d)) / self.q

    def floor(self) -> int:
        root = math.isqrt(self.r * self.r * self.d)
        sqrt_floor = root if self.r >= 0 else -root - 1
        return (self.p + sqrt_floor) // self.q

    def __sub__(self, k: int) -> "QuadraticIrrational":
        return QuadraticIrrational(self.p - k * self.q, self.r, self.q, self.d)

    def __rsub__(self, k: int) -> "QuadraticIrrational":
        return QuadraticIrrational(k * self.q - self.p, -self.r, self.q, self.d)

    def reciprocal(self) -> "QuadraticIrrational":
        # q / (p + r√d) = q (p - r√d) / (p² - r² d)
        norm = self.p * self.p - self.r * self.r * self.d
        return QuadraticIrrational(self.q * self.p, -self.q * self.r, norm, self.d)

    def __eq__(self, other) -> bool:
        return isinstance(other, QuadraticIrrational) and (self.p, self.r, self.q, self.d) == (other.p, other.r, other.q, other.d)

    def __hash__(self) -> int:
        return hash((self.p, self.r, self.q, self.d))


Number = Union[float, Fraction, QuadraticIrrational]


def _in_unit_interval(x: Number, closed_left: bool) -> bool:
    """``x ∈ [0, 1)`` (or ``(0, 1)``), compared exactly for exact inputs."""
    v = float(x) if isinstance(x, QuadraticIrrational) else x
    return (0 <= v if closed_left else 0 < v) and v < 1


def _near_integer(v: float) -> Optional[int]:
    if not math.isfinite(v):
        raise ValueError("orbit point too close to a boundary: the next digit overflows")
    k = round(v)
    return int(k) if abs(v - k) < SNAP_TOL else None


# --------------------------------------------------------------------------
# maps and expansions
# --------------------------------------------------------------------------


def renyi_map(x: Number) -> Number:
    """``R(x) = 1/(1-x) - ⌊1/(1-x)⌋`` (exact for exact inputs)."""
    return _renyi_step(x)[1]


def _renyi_step(x: Number) -> tuple[int, Number, bool]:
    """One backward digit, the image point and whether the step snapped to a boundary."""
    if isinstance(x, QuadraticIrrational):
        v = (1 - x).reciprocal()
        k = v.floor()
        return k + 1, v - k, False
    if isinstance(x, Fraction):
        v = 1 / (1 - x)
        k = math.floor(v)
        return k + 1, v - k, v == k
    v = 1.0 / (1.0 - x)
    snapped = _near_integer(v)
    if snapped is not None:
        return snapped + 1, 0.0, True
    k = math.floor(v)
    return k + 1, v - k, False


def bcf_expand(x: Number, n: int) -> DigitSequence:
    """First ``n`` backward digits of ``x ∈ [0, 1)``.

    Float orbits that land within ``1e-12`` of a branch boundary are snapped
    onto it and flagged ``terminated``; the orbit then sits at the neutral
    fixed point ``0`` and every further digit is 2.
    """
    if not _in_unit_interval(x, closed_left=True):
        raise ValueError("x must lie in [0, 1)")
    digits = []
    terminated = False
    log_growth = 0.0
    y = x
    for _ in range(n):
        if not isinstance(y, (Fraction, QuadraticIrrational)):
            log_growth += 2.0 * math.log(1.0 / (1.0 - y))
        b, y, snapped = _renyi_step(y)
        digits.append(b)
        terminated = terminated or snapped or (isinstance(y, Fraction) and y == 0)
    exact = isinstance(x, (Fraction, QuadraticIrrational))
    loss = 0.0 if exact else _EPS * math.exp(min(log_growth, 700.0))
    return DigitSequence(tuple(digits), "backward", terminated, loss)


def bcf_reconstruct(digits: DigitSequence | tuple[int, ...] | list[int], tail: str = "all-2s", exact: bool = False):
    """Evaluate a finite backward continued fraction.

    ``tail="all-2s"`` continues with the digit 2 forever (tail value 1);
    ``"interval"`` returns ``(lo, hi)`` swept by all continuations and
    ``"midpoint"`` its midpoint.  ``exact=True`` evaluates in rationals.
    """
    seq = tuple(digits.digits if isinstance(digits, DigitSequence) else digits)
    if not seq:
        raise ValueError("digit sequence is empty")
    if any(d < 2 for d in seq):
        raise ValueError("backward digits must be at least 2")

    def evaluate(w):
        for b in reversed(seq):
            w = 1 / (b - w)
        return 1 - w

    one = Fraction(1) if exact else 1.0
    if tail == "all-2s":
        return evaluate(one)
    if tail in ("interval", "midpoint"):
        # the tail w = 1 - R^n x ranges over (0, 1]
        a, b = evaluate(0 * one), evaluate(one)
        lo, hi = min(a, b), max(a, b)
        return (lo, hi) if tail == "interval" else (lo + hi) / 2
    raise ValueError(f"unknown tail mode {tail!r}")


def _gauss_step(x: Number) -> tuple[int, Number, bool]:
    if isinstance(x, QuadraticIrrational):
        v = x.reciprocal()
        k = v.floor()
        return k, v - k, False
    if isinstance(x, Fraction):
        v = 1 / x
        k = math.floor(v)
        return k, v - k, v == k
    v = 1.0 / x
    snapped = _near_integer(v)
    if snapped is not None:
        return snapped, 0.0, True
    k = math.floor(v)
    return k, v - k, False


def cf_expand(x: Number, n: int) -> DigitSequence:
    """First ``n`` regular continued-fraction digits of ``x ∈ (0, 1)``; stops at rationals."""
    if not _in_unit_interval(x, closed_left=False):
        raise ValueError("x must lie in (0, 1)")
    digits = []
    terminated = False
    log_growth = 0.0
    y = x
    for _ in range(n):
        if not isinstance(y, (Fraction, QuadraticIrrational)):
            log_growth += 2.0 * math.log(1.0 / y)
        a, y, snapped = _gauss_step(y)
        digits.append(a)
        if snapped or (isinstance(y, Fraction) and y == 0):
            terminated = True
            break
    exact = isinstance(x, (Fraction, QuadraticIrrational))
    loss = 0.0 if exact else _EPS * math.exp(min(log_growth, 700.0))
    return DigitSequence(tuple(digits), "regular", terminated, loss)


# --------------------------------------------------------------------------
# Birkhoff averages
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BirkhoffAverage:
    """Running average of ``ψ`` over the first ``n`` digits and over their last quarter."""

    value: float
    last_quarter: float
    n: int
    terminated: bool
    precision_loss: float


def birkhoff_average(model: MapModel | str, psi: Callable[[np.ndarray], np.ndarray], x: Number, n: int) -> BirkhoffAverage:
    """``(1/n) Σ_{k<n} ψ(digit_k(x))`` for backward (Rényi) or regular (Gauss) digits."""
    if n < 1:
        raise ValueError("n must be at least 1")
    name = model if isinstance(model, str) else model.name
    if name == "renyi":
        seq = bcf_expand(x, n)
    elif name == "gauss":
        seq = cf_expand(x, n)
    else:
        raise ValueError(f"digit expansion is available for renyi and gauss, not {name!r}")
    values = np.asarray(psi(np.asarray(seq.digits, dtype=float)), dtype=float)
    quarter = values[-max(1, len(values) // 4) :]
    return BirkhoffAverage(float(values.mean()), float(quarter.mean()), len(values), seq.terminated, seq.precision_loss)


# --------------------------------------------------------------------------
# orbit sampling from a Gibbs chain
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SampledOrbit:
    digits: DigitSequence
    average: float
    symbols: int


def _step_values(chain: GibbsChain, branches: np.ndarray) -> np.ndarray:
    const = chain.phi.per_digit_constant(branches)
    if const is not None:
        return np.asarray(const, dtype=float)
    # not constant on branches: use the value at the branch midpoint
    lo, hi = chain.model.domain_interval(branches)
    return chain.phi.branch_value(branches, 0.5 * (lo + hi))


def sample_gibbs_orbit(chain: GibbsChain, length: int, seed: int) -> SampledOrbit:
    """Original-map digits of a stationary Gibbs orbit and the average of ``φ`` per step.

    Induced symbols are drawn from the chain and unrolled: ``Hyp(d)`` gives
    the digit of branch ``d``, a parabolic run ``(j, i, n)`` gives branch
    ``j`` followed by ``n - 1`` steps on branch ``i``.
    """
    if length < 0:
        raise ValueError("length must be non-negative")
    if not math.isfinite(chain.mean_return):
        raise InfinitePressureError("the chain has infinite mean return time")
    kind = "regular" if chain.model.name == "gauss" else "backward"
    if length == 0:
        return SampledOrbit(DigitSequence((), kind), math.nan, 0)
    rng = np.random.default_rng(seed)
    branches = []
    total = 0
    symbols = 0
    while total < length:
        count = int(math.ceil((length - total) / chain.mean_return * 1.05)) + 16
        first, par, steps = chain.sample_symbols(count, rng)
        # every symbol contributes its first branch then steps - 1 parabolic steps
        lead = np.repeat(first, 1)
        rest = np.repeat(par, np.maximum(steps - 1, 0))
        offsets = np.cumsum(steps) - steps
        seq = np.empty(int(steps.sum()), dtype=np.int64)
        mask = np.zeros(seq.size, dtype=bool)
        mask[offsets] = True
        seq[mask] = lead
        seq[~mask] = rest
        branches.append(seq)
        total += seq.size
        symbols += count
    path = np.concatenate(branches)[:length]
    values = _step_values(chain, path)
    labels = chain.model.digit_label(path).astype(np.int64)
    return SampledOrbit(DigitSequence(tuple(int(v) for v in labels), kind), float(values.mean()), symbols)
