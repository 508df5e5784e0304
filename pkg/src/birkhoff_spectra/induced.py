"""First-return inducing scheme away from the parabolic fixed points.

The inducing domain is the complement of the cylinders ``[i i]`` for
parabolic ``i``.  Its first-return map is uniformly expanding and is coded by
three families of symbols:

* ``Hyp(i)``: one step on branch ``i`` whose image is the hyperbolic part
  ``B = ∪_{j ∈ H} Δ_j``.  It applies to every index ``i``; for parabolic ``i``
  it is the cylinder ``[i k]`` with ``k`` hyperbolic.
* ``ParaEntry(j, i)``: one step on branch ``j ≠ i`` landing in
  ``A_i = Δ_i ∖ [i i]``.
* ``ParaRun(j, i, n)``: a step on ``j`` followed by ``n - 1`` steps on the
  parabolic branch ``i``, first returning after ``n`` steps, again into ``A_i``.

Each symbol has a *source* piece (``B`` or ``A_j``) containing its cylinder and
a *target* piece (``B`` or ``A_i``) equal to its image.  A symbol may follow
another exactly when its source is the other's target.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coding import CylinderInterval, Word, compose_inverse, cylinder_interval
from .map_model import MapModel, Potential

log = logging.getLogger(__name__)

HYPERBOLIC_PIECE = "B"
# allowed |log2| of the ratio drift over the second half of the run
DRIFT_LOG2_LIMIT = 0.2


def parabolic_piece(i: int) -> str:
    return f"A{i}"


@dataclass(frozen=True)
class InducedSymbol:
    """Symbol of the induced alphabet.

    ``kind`` is ``"hyp"``, ``"entry"`` or ``"run"``.  ``first`` is the first
    digit (``i`` for ``Hyp(i)``, ``j`` otherwise), ``parabolic`` the parabolic
    index ``i`` of entry/run symbols and ``steps`` the number ``n`` of original
    steps until return.
    """

    kind: str
    first: int
    parabolic: Optional[int] = None
    steps: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("hyp", "entry", "run"):
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if self.kind == "hyp" and (self.parabolic is not None or self.steps != 1):
            raise ValueError("Hyp symbols take one step and no parabolic index")
        if self.kind == "entry" and self.steps != 1:
            raise ValueError("ParaEntry symbols take one step")
        if self.kind == "run" and self.steps < 2:
            raise ValueError("ParaRun symbols take at least two steps")
        if self.kind != "hyp" and (self.parabolic is None or self.parabolic == self.first):
            raise ValueError("entry/run symbols need a parabolic index different from the first digit")

    @classmethod
    def hyp(cls, i: int) -> "InducedSymbol":
        return cls("hyp", int(i))

    @classmethod
    def para(cls, j: int, i: int, n: int) -> "InducedSymbol":
        """``ParaEntry(j, i)`` when ``n == 1``, else ``ParaRun(j, i, n)``."""
        return cls("entry" if n == 1 else "run", int(j), int(i), int(n))

    @property
    def return_time(self) -> int:
        return self.steps

    @property
    def consumed_digits(self) -> tuple[int, ...]:
        """Original digits read before the return: ``j`` then ``n - 1`` copies of ``i``."""
        if self.kind == "hyp":
            return (self.first,)
        return (self.first,) + (self.parabolic,) * (self.steps - 1)

    @property
    def base_word(self) -> Word:
        """Explicit word ``j·i^n`` (or ``i`` for ``Hyp``); the successor digit is left open."""
        if self.kind == "hyp":
            return Word((self.first,))
        return Word((self.first,) + (self.parabolic,) * self.steps)

    def source(self, model: MapModel) -> str:
        return parabolic_piece(self.first) if model.is_parabolic(self.first) else HYPERBOLIC_PIECE

    def target(self, model: MapModel) -> str:
        return HYPERBOLIC_PIECE if self.kind == "hyp" else parabolic_piece(self.parabolic)

    def admissible_successor(self, model: MapModel, k: int) -> bool:
        if self.kind == "hyp":
            return not model.is_parabolic(k)
        return k != self.parabolic

    @property
    def label(self) -> str:
        if self.kind == "hyp":
            return f"Hyp({self.first})"
        if self.kind == "entry":
            return f"ParaEntry({self.first},{self.parabolic})"
        return f"ParaRun({self.first},{self.parabolic},{self.steps})"

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class InducedAlphabet:
    """A truncated induced alphabet with its incidence relation.

    ``identity`` marks the degenerate scheme of a model without parabolic
    branches, where every digit is its own symbol and all transitions are
    allowed.
    """

    model: MapModel
    symbols: tuple[InducedSymbol, ...]
    identity: bool

    def incidence(self) -> np.ndarray:
        targets = [s.target(self.model) for s in self.symbols]
        sources = [s.source(self.model) for s in self.symbols]
        return np.array([[t == s for s in sources] for t in targets], dtype=bool)

    def labels(self) -> list[str]:
        return [s.label for s in self.symbols]


def enumerate_induced_symbols(model: MapModel, j_max: int, n_max: int) -> InducedAlphabet:
    """Induced symbols with digits ``≤ j_max`` and return times ``≤ n_max``.

    The alphabet contains ``Hyp(i)`` for every ``i ≤ j_max`` (parabolic ``i``
    included: those cylinders are needed for the symbols to cover the
    inducing domain), then ``ParaEntry(j, i)`` and ``ParaRun(j, i, n)``.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if not model.parabolic_set:
        symbols = tuple(InducedSymbol.hyp(i) for i in range(1, j_max + 1))
        return InducedAlphabet(model, symbols, identity=True)
    if j_max < 2:
        raise ValueError("j_max must be at least 2 when parabolic branches exist")
    symbols = [InducedSymbol.hyp(i) for i in range(1, j_max + 1)]
    for i in model.parabolic_set:
        for j in range(1, j_max + 1):
            if j == i:
                continue
            for n in range(1, n_max + 1):
                symbols.append(InducedSymbol.para(j, i, n))
    return InducedAlphabet(model, tuple(symbols), identity=False)


def is_finitely_primitive(alphabet: InducedAlphabet, max_connector: int = 2) -> bool:
    """Every ordered pair connects through at most ``max_connector`` intermediate symbols.

    The check runs on the pieces (sources and targets), which is equivalent
    and avoids a dense symbol-by-symbol matrix.
    """
    model = alphabet.model
    pieces = sorted({s.source(model) for s in alphabet.symbols} | {s.target(model) for s in alphabet.symbols})
    index = {p: k for k, p in enumerate(pieces)}
    # piece graph: source piece -> target piece through some symbol
    step = np.zeros((len(pieces), len(pieces)), dtype=np.int64)
    for s in alphabet.symbols:
        step[index[s.source(model)], index[s.target(model)]] = 1
    reach = np.eye(len(pieces), dtype=np.int64)
    total = reach.copy()
    for _ in range(max_connector):
        reach = np.minimum(reach @ step, 1)
        total = np.maximum(total, reach)
    # symbol a -> symbol b needs target(a) to reach source(b) within the connector budget
    return bool(np.all(total > 0))


def return_time_by_membership(model: MapModel, word: Sequence[int]) -> int:
    """First ``m ≥ 1`` whose shifted word starts outside every ``[i i]``, ``i`` parabolic."""
    for m in range(1, len(word)):
        a = word[m]
        if not model.is_parabolic(a):
            return m
        if m + 1 >= len(word):
            break
        if word[m + 1] != a:
            return m
    raise ValueError("word too short to decide the return time")


@dataclass(frozen=True)
class InducedOrbitData:
    """Birkhoff data of an induced symbol on the cylinder of ``symbol·k``."""

    symbol: InducedSymbol
    successor_digit: int
    cylinder: CylinderInterval
    return_time: int
    log_deriv_sum: tuple[float, float]
    phi_sum: tuple[float, float]


def _orbit_sums(model: MapModel, phi: Potential, word: Sequence[int], steps: int, tails: np.ndarray):
    """Sums over the first ``steps`` points of the orbit of ``T_word(tails)``."""
    points = []
    y = np.asarray(tails, dtype=float)
    for d in reversed(word):
        y = model.inverse(d, y)
        points.append((d, y))
    points.reverse()  # points[m] = (digit m, f^m x)
    log_deriv = np.zeros_like(y)
    phi_sum = np.zeros_like(y)
    for d, x in points[:steps]:
        log_deriv += np.log(model.derivative(d, x))
        phi_sum += phi.branch_value(d, x)
    return log_deriv, phi_sum


def induced_orbit_data(
    model: MapModel,
    phi: Potential,
    symbol: InducedSymbol,
    successor_digit: int,
    refine_depth: int = 0,
) -> InducedOrbitData:
    """Cylinder, return time and bounds of the induced sums for ``symbol·k``.

    ``refine_depth`` appends that many copies of the smallest hyperbolic
    digit after ``k``; the sampled bounds tighten as the cylinder shrinks.
    """
    if not symbol.admissible_successor(model, successor_digit):
        raise ValueError(f"digit {successor_digit} cannot follow {symbol.label}")
    filler = next(i for i in range(1, 10_000) if not model.is_parabolic(i))
    word = list(symbol.base_word.digits) + [successor_digit] + [filler] * refine_depth
    r = return_time_by_membership(model, word)
    cyl = cylinder_interval(model, Word.of(word), max_depth=len(word))
    samples = np.linspace(0.0, 1.0, 9)
    lds, phs = _orbit_sums(model, phi, word, r, samples)
    return InducedOrbitData(
        symbol=symbol,
        successor_digit=successor_digit,
        cylinder=cyl,
        return_time=r,
        log_deriv_sum=(float(lds.min()), float(lds.max())),
        phi_sum=(float(phs.min()), float(phs.max())),
    )


@dataclass(frozen=True)
class InducingReport:
    """Sampled constant of ``|F̂'(x)| ≍ |f'(x)|·n^{1+γ}`` over run symbols."""

    empirical_constant: float
    ratio_min: float
    ratio_max: float
    drift: float
    passed: bool
    vacuous: bool = False


def check_inducing_condition(model: MapModel, j_max: int, n_max: int, c_limit: float = 16.0) -> InducingReport:
    """Ratio ``|F̂'(x)| / (|f'(x)|·n^{1+γ})`` over ``ParaRun(j, i, n)`` cylinders.

    Since ``F̂ = f^n`` on the cylinder, the ratio equals
    ``1 / (|(T_i^{n-1})'(z)|·n^{1+γ})`` with ``z = F̂(x) ∈ A_i``.  It is
    sampled at the endpoints and midpoint of ``A_i`` and is independent of
    ``j``; ``j_max`` only bounds the enumerated symbols.  The check passes
    when the constant stays below ``c_limit`` and the ratio does not drift
    between ``n_max/2`` and ``n_max`` by more than a factor ``2**0.2``, which
    flags exponents misdeclared by a quarter or more.
    """
    if not model.parabolic_set:
        return InducingReport(1.0, 1.0, 1.0, 0.0, True, vacuous=True)
    del j_max  # the ratio does not depend on the first digit
    gamma = model.inducing_exponent
    lows, highs, drift = [], [], 0.0
    for i in model.parabolic_set:
        lo, hi = parabolic_piece_interval(model, i)
        z = np.array([lo, 0.5 * (lo + hi), hi])
        y = z.copy()
        log_dt = np.zeros_like(z)
        ratios = np.empty((n_max - 1, z.size))
        for n in range(2, n_max + 1):
            # advance y = T_i^{n-1} z and its log-derivative
            log_dt += model.log_inverse_derivative(i, y)
            y = model.inverse(i, y)
            ratios[n - 2] = np.exp(-log_dt) / n ** (1.0 + gamma)
        lows.append(ratios.min())
        highs.append(ratios.max())
        half = ratios[(n_max - 1) // 2 :]
        drift = max(drift, float(half[-1].max() / half[0].max()))
    rmin, rmax = float(min(lows)), float(max(highs))
    constant = max(rmax, 1.0 / rmin)
    passed = constant <= c_limit and abs(math.log2(drift)) <= DRIFT_LOG2_LIMIT
    return InducingReport(constant, rmin, rmax, drift, passed)


def parabolic_piece_interval(model: MapModel, i: int) -> tuple[float, float]:
    """Hull of ``A_i = T_i([0, 1] ∖ Δ_i)``, the image piece of symbols ending near ``x_i``."""
    lo, hi = (float(v) for v in model.domain_interval(i))
    ends = []
    if lo > 0:
        ends.extend([0.0, lo])
    if hi < 1:
        ends.extend([hi, 1.0])
    images = model.inverse(i, np.array(ends))
    a, b = float(images.min()), float(images.max())
    x0 = model.fixed_point(i)
    if a - 1e-12 <= x0 <= b + 1e-12 and not (abs(x0 - a) < 1e-12 or abs(x0 - b) < 1e-12):
        raise NotImplementedError("parabolic fixed point inside its first-return piece")
    if abs(x0 - a) < 1e-12 or abs(x0 - b) < 1e-12:
        raise NotImplementedError("first-return piece touches the parabolic fixed point")
    return a, b


def hyperbolic_piece_interval(model: MapModel) -> tuple[float, float]:
    """Hull of ``B``, the union of the hyperbolic branch domains."""
    hyper_starts = [i for i in range(1, len(model.parabolic_set) + 2) if not model.is_parabolic(i)]
    first = hyper_starts[0]
    lo, hi = (float(v) for v in model.domain_interval(first))
    if model.accumulation_point >= 0.5:
        return lo, 1.0
    return 0.0, hi


def induced_symbol_point(model: MapModel, symbol: InducedSymbol, z) -> np.ndarray:
    """Preimage ``T_ω(z)`` of a point ``z`` of the target piece."""
    return compose_inverse(model, symbol.consumed_digits, z)


def distortion_widths(model: MapModel, phi: Potential, j_values: Sequence[int], n_values: Sequence[int]) -> np.ndarray:
    """Width ``hi - lo`` of the sampled ``log|F̂'|`` range per run symbol (rows ``j``, columns ``n``)."""
    out = np.zeros((len(j_values), len(n_values)))
    i = model.parabolic_set[0]
    k = next(d for d in range(1, 100) if d != i)
    for (a, j), (b, n) in itertools.product(enumerate(j_values), enumerate(n_values)):
        data = induced_orbit_data(model, phi, InducedSymbol.para(j, i, n), k)
        out[a, b] = data.log_deriv_sum[1] - data.log_deriv_sum[0]
    return out
