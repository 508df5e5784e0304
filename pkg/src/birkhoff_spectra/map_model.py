"""Countable-branch interval maps, digit potentials and their structural checks.

A :class:`MapModel` describes a piecewise expanding map of ``[0, 1]`` through
its branches: branch ``i`` (1-based, unbounded) has domain ``Δ_i``, forward map
``f_i``, inverse ``T_i`` and derivative modulus ``|f_i'|``.  Branches listed in
``parabolic_set`` have a neutral fixed point.  Two built-in models are
provided (the Rényi map generating backward continued fractions, and the Gauss
map generating regular continued fractions); other maps can be described by
formulas in a configuration file.

A :class:`Potential` is a real function on ``[0, 1]`` given branchwise, so that
it can be evaluated at real (non-integer) branch indices when tail sums are
replaced by integrals.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .expressions import Expression

log = logging.getLogger(__name__)

BranchFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ModelValidationError(ValueError):
    """A custom model or potential violates a structural requirement."""


# --------------------------------------------------------------------------
# map models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MapModel:
    """Branch data of a countable-branch interval map.

    ``closed_side`` records the half-open convention of the branch domains:
    ``"left"`` means ``Δ_i = [lo, hi)`` and ``"right"`` means ``(lo, hi]``.
    ``parabolic_points`` maps each parabolic index to its neutral fixed point.
    ``parabolic_iterate`` (optional) returns ``(T_i^n z, log|(T_i^n)'(z)|)`` for
    real ``n``; it enables asymptotic tails over long parabolic excursions.
    """

    name: str
    inverse_fn: BranchFn
    forward_fn: BranchFn
    derivative_fn: BranchFn
    domain_fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    branch_index_fn: Callable[[np.ndarray], np.ndarray]
    digit_label_fn: Callable[[np.ndarray], np.ndarray]
    parabolic_points: Mapping[int, float]
    growth_exponent: float
    growth_constant: float
    inducing_exponent: float
    expansion_constant: float
    accumulation_point: float
    closed_side: str = "left"
    log_inverse_derivative_fn: Optional[BranchFn] = None
    parabolic_iterate: Optional[Callable[[int, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]] = None
    mobius_fn: Optional[Callable[[int], np.ndarray]] = None
    dimension: Optional[float] = None
    branch_system_source: Mapping[str, str] = field(default_factory=dict)

    # -- basic branch access -------------------------------------------------
    @property
    def parabolic_set(self) -> tuple[int, ...]:
        return tuple(sorted(self.parabolic_points))

    @property
    def s_inf(self) -> float:
        """Finiteness abscissa ``1/κ`` of the geometric potential."""
        return 1.0 / self.growth_exponent

    def is_parabolic(self, i: int) -> bool:
        return int(i) in self.parabolic_points

    def inverse(self, i, y) -> np.ndarray:
        return self.inverse_fn(np.asarray(i, dtype=float), np.asarray(y, dtype=float))

    def forward(self, i, x) -> np.ndarray:
        return self.forward_fn(np.asarray(i, dtype=float), np.asarray(x, dtype=float))

    def derivative(self, i, x) -> np.ndarray:
        """Modulus ``|f_i'(x)|``."""
        return self.derivative_fn(np.asarray(i, dtype=float), np.asarray(x, dtype=float))

    def log_inverse_derivative(self, i, y) -> np.ndarray:
        """``log|T_i'(y)|``, which equals ``-log|f'(T_i y)|``."""
        i = np.asarray(i, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.log_inverse_derivative_fn is not None:
            return self.log_inverse_derivative_fn(i, y)
        return -np.log(self.derivative_fn(i, self.inverse_fn(i, y)))

    def domain_interval(self, i) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints ``(lo, hi)`` of ``Δ_i``; the open side follows ``closed_side``."""
        lo, hi = self.domain_fn(np.asarray(i, dtype=float))
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)

    def branch_index(self, x) -> np.ndarray:
        """Index ``i`` with ``x ∈ Δ_i`` (integer array)."""
        return np.asarray(self.branch_index_fn(np.asarray(x, dtype=float)), dtype=np.int64)

    def digit_label(self, i) -> np.ndarray:
        """Digit value attached to branch ``i`` (``b_1 = i + 1`` for Rényi, ``a_1 = i`` for Gauss)."""
        return self.digit_label_fn(np.asarray(i, dtype=float))

    def fixed_point(self, i: int) -> float:
        return float(self.parabolic_points[int(i)])

    def hyperbolic_digits(self, digits: Sequence[int]) -> tuple[int, ...]:
        return tuple(d for d in digits if d not in self.parabolic_points)


def _renyi_index(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        idx = np.maximum(np.floor(1.0 / (1.0 - x)), 1.0)
        # the rounded quotient can be off by one against the domain endpoints
        idx = np.where(x < 1.0 - 1.0 / idx, np.maximum(idx - 1.0, 1.0), idx)
        return np.where(x >= 1.0 - 1.0 / (idx + 1.0), idx + 1.0, idx)


def _renyi_parabolic_iterate(i: int, n: np.ndarray, z: np.ndarray):
    if i != 1:
        raise ValueError("the Rényi map has a single parabolic branch")
    denom = 1.0 + n * z
    return z / denom, -2.0 * np.log(denom)


def _renyi_mobius(i: int) -> np.ndarray:
    return np.array([[1, i - 1], [1, i]], dtype=object)


def _gauss_index(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        idx = np.maximum(np.floor(1.0 / x), 1.0)
        idx = np.where(x > 1.0 / idx, np.maximum(idx - 1.0, 1.0), idx)
        return np.where(x <= 1.0 / (idx + 1.0), idx + 1.0, idx)


def _gauss_mobius(i: int) -> np.ndarray:
    return np.array([[0, 1], [1, i]], dtype=object)


def renyi_model() -> MapModel:
    """The Rényi map ``x ↦ 1/(1-x) mod 1`` with its parabolic fixed point at 0."""
    return MapModel(
        name="renyi",
        inverse_fn=lambda i, y: 1.0 - 1.0 / (y + i),
        forward_fn=lambda i, x: 1.0 / (1.0 - x) - i,
        derivative_fn=lambda i, x: 1.0 / (1.0 - x) ** 2,
        domain_fn=lambda i: (1.0 - 1.0 / i, 1.0 - 1.0 / (i + 1.0)),
        branch_index_fn=_renyi_index,
        digit_label_fn=lambda i: i + 1.0,
        parabolic_points={1: 0.0},
        growth_exponent=2.0,
        growth_constant=4.0,
        inducing_exponent=1.0,
        expansion_constant=4.0,
        accumulation_point=1.0,
        closed_side="left",
        log_inverse_derivative_fn=lambda i, y: -2.0 * np.log(y + i),
        parabolic_iterate=_renyi_parabolic_iterate,
        mobius_fn=_renyi_mobius,
        dimension=1.0,
    )


def gauss_model() -> MapModel:
    """The Gauss map ``x ↦ 1/x mod 1``; uniformly expanding, no parabolic branch."""
    return MapModel(
        name="gauss",
        inverse_fn=lambda i, y: 1.0 / (i + y),
        forward_fn=lambda i, x: 1.0 / x - i,
        derivative_fn=lambda i, x: 1.0 / x**2,
        domain_fn=lambda i: (1.0 / (i + 1.0), 1.0 / i),
        branch_index_fn=_gauss_index,
        digit_label_fn=lambda i: i,
        parabolic_points={},
        growth_exponent=2.0,
        growth_constant=4.0,
        inducing_exponent=1.0,
        expansion_constant=1.0 + 1e-12,
        accumulation_point=0.0,
        closed_side="right",
        log_inverse_derivative_fn=lambda i, y: -2.0 * np.log(y + i),
        mobius_fn=_gauss_mobius,
        dimension=1.0,
    )


CUSTOM_REQUIRED = ("inverse", "forward", "derivative", "domain_lo", "domain_hi", "kappa", "gamma")
CUSTOM_OPTIONAL = (
    "parabolic",
    "parabolic_points",
    "growth_constant",
    "expansion_constant",
    "accumulation",
    "closed_side",
    "digit_label",
    "parabolic_iterate",
    "parabolic_iterate_logderiv",
    "dimension",
    "name",
)


def _custom_branch_index(domain_fn, accumulation: float, closed_side: str):
    """Vectorized bisection over branch indices for monotonically ordered domains."""

    def index(x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo_i = np.ones_like(x)
        hi_i = np.full_like(x, 2.0**40)
        toward_one = accumulation >= 0.5
        for _ in range(45):
            mid = np.floor(0.5 * (lo_i + hi_i))
            d_lo, d_hi = domain_fn(mid)
            if toward_one:
                past = x >= d_lo if closed_side == "left" else x > d_lo
            else:
                past = x <= d_hi if closed_side == "right" else x < d_hi
            lo_i = np.where(past, mid, lo_i)
            hi_i = np.where(past, hi_i, mid)
            if np.all(hi_i - lo_i <= 1):
                break
        return lo_i

    return index


def build_model(kind: str, spec: Optional[Mapping[str, str]] = None) -> MapModel:
    """Construct a built-in model (``renyi``, ``gauss``) or a custom one from formulas.

    A custom specification maps keys to strings: branch formulas ``inverse``
    (in ``i, y``), ``forward`` and ``derivative`` (in ``i, x``), domain end
    formulas ``domain_lo``/``domain_hi`` (in ``i``), the parabolic indices
    ``parabolic`` with fixed points ``parabolic_points``, and the exponents
    ``kappa`` and ``gamma``.
    """
    kind = kind.lower()
    if kind == "renyi":
        return renyi_model()
    if kind == "gauss":
        return gauss_model()
    if kind not in ("custom", "custom-spec"):
        raise ModelValidationError(f"unknown model kind {kind!r}")
    if spec is None:
        raise ModelValidationError("custom model requires a specification")
    missing = [k for k in CUSTOM_REQUIRED if k not in spec]
    if missing:
        raise ModelValidationError(f"custom model is missing keys: {', '.join(missing)}")
    unknown = [k for k in spec if k not in CUSTOM_REQUIRED + CUSTOM_OPTIONAL]
    if unknown:
        raise ModelValidationError(f"custom model has unknown keys: {', '.join(unknown)}")

    kappa = float(spec["kappa"])
    if not kappa > 0:
        raise ModelValidationError("growth exponent kappa must be positive")
    gamma = float(spec["gamma"])
    if gamma > 1:
        raise ModelValidationError("inducing exponent gamma must not exceed 1")

    inverse = Expression(spec["inverse"], ("i", "y"))
    forward = Expression(spec["forward"], ("i", "x"))
    derivative = Expression(spec["derivative"], ("i", "x"))
    dom_lo = Expression(spec["domain_lo"], ("i",))
    dom_hi = Expression(spec["domain_hi"], ("i",))
    label = Expression(spec.get("digit_label", "i"), ("i",))
    accumulation = float(spec.get("accumulation", "1"))
    closed_side = spec.get("closed_side", "left" if accumulation >= 0.5 else "right")

    parabolic = [int(p) for p in spec.get("parabolic", "").replace(",", " ").split()]
    points_raw = [float(p) for p in spec.get("parabolic_points", "").replace(",", " ").split()]
    if len(points_raw) != len(parabolic):
        raise ModelValidationError("parabolic_points must list one fixed point per parabolic index")

    def domain_fn(i):
        return np.asarray(dom_lo(i), dtype=float), np.asarray(dom_hi(i), dtype=float)

    iterate = None
    if "parabolic_iterate" in spec:
        it_expr = Expression(spec["parabolic_iterate"], ("i", "n", "y"))
        ld_expr = Expression(spec.get("parabolic_iterate_logderiv", "0"), ("i", "n", "y"))
        if "parabolic_iterate_logderiv" not in spec:
            raise ModelValidationError("parabolic_iterate requires parabolic_iterate_logderiv")

        def iterate(i, n, z):
            return it_expr(i, n, z), ld_expr(i, n, z)

    model = MapModel(
        name=spec.get("name", "custom"),
        inverse_fn=lambda i, y: inverse(i, y),
        forward_fn=lambda i, x: forward(i, x),
        derivative_fn=lambda i, x: np.abs(derivative(i, x)),
        domain_fn=domain_fn,
        branch_index_fn=_custom_branch_index(domain_fn, accumulation, closed_side),
        digit_label_fn=lambda i: label(i),
        parabolic_points=dict(zip(parabolic, points_raw)),
        growth_exponent=kappa,
        growth_constant=float(spec.get("growth_constant", "4")),
        inducing_exponent=gamma,
        expansion_constant=float(spec.get("expansion_constant", "1.0000001")),
        accumulation_point=accumulation,
        closed_side=closed_side,
        parabolic_iterate=iterate,
        dimension=float(spec["dimension"]) if "dimension" in spec else None,
        branch_system_source=dict(spec),
    )
    _validate_custom(model)
    return model


def _validate_custom(model: MapModel, i_max: int = 200) -> None:
    idx = np.arange(1, i_max + 1, dtype=float)
    lo, hi = model.domain_interval(idx)
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)) or np.any(hi <= lo):
        raise ModelValidationError("branch domains must be non-empty finite intervals")
    if np.any(lo < -1e-12) or np.any(hi > 1 + 1e-12):
        raise ModelValidationError("branch domains must lie in [0, 1]")
    order = np.argsort(lo)
    if np.any(hi[order][:-1] > lo[order][1:] + 1e-12):
        raise ModelValidationError("branch domains have overlapping interiors")
    y = np.linspace(0.05, 0.95, 7)
    for i in (1, 2, 5, 50):
        back = model.forward(i, model.inverse(i, y))
        if np.max(np.abs(back - y)) > 1e-9:
            raise ModelValidationError(f"forward and inverse disagree on branch {i}")
    for i, x0 in model.parabolic_points.items():
        if abs(float(model.inverse(i, x0)) - x0) > 1e-9:
            raise ModelValidationError(f"declared parabolic point of branch {i} is not fixed")


# --------------------------------------------------------------------------
# potentials
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class XiClass:
    """Growth class of ``φ / log|f'|`` at the accumulation point.

    ``kind`` is ``"zero"``, ``"finite"`` or ``"infinite"``.  For the finite
    class, ``θ·log|f'| + eta ≤ φ ≤ θ·log|f'| + xi`` is expected on the limit set.
    """

    kind: str
    theta: float = 0.0
    eta: float = 0.0
    xi: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "finite", "infinite"):
            raise ModelValidationError(f"unknown xi class {self.kind!r}")
        if self.kind == "finite" and not self.theta > 0:
            raise ModelValidationError("finite xi class needs theta > 0")

    @classmethod
    def zero(cls) -> "XiClass":
        return cls("zero")

    @classmethod
    def infinite(cls) -> "XiClass":
        return cls("infinite")

    @classmethod
    def finite(cls, theta: float, eta: float, xi: float) -> "XiClass":
        return cls("finite", theta, eta, xi)

    def describe(self) -> str:
        if self.kind == "finite":
            return f"finite(theta={self.theta:g},eta={self.eta:g},xi={self.xi:g})"
        return self.kind


@dataclass(frozen=True)
class Potential:
    """A potential ``φ`` given branchwise by ``branch_value(i, x)``.

    ``digit_constant`` is set when ``φ`` is constant on every branch domain.
    ``parabolic_sum`` returns ``Σ_{m=1}^{n-1} φ(T_i^m z)`` for real ``n``; it is
    available for digit-constant potentials and for the geometric potential.
    """

    name: str
    model: MapModel
    branch_value_fn: BranchFn
    xi_class: XiClass
    h1_flag: bool
    digit_constant_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    parabolic_sum_fn: Optional[Callable[[int, np.ndarray, np.ndarray], np.ndarray]] = None
    positivity_floor: float = field(init=False)
    description: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "positivity_floor", _sample_floor(self))

    def branch_value(self, i, x) -> np.ndarray:
        return self.branch_value_fn(np.asarray(i, dtype=float), np.asarray(x, dtype=float))

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.branch_value(self.model.branch_index(x), x)

    def per_digit_constant(self, i) -> Optional[np.ndarray]:
        if self.digit_constant_fn is None:
            return None
        return self.digit_constant_fn(np.asarray(i, dtype=float))

    def parabolic_value(self, i: int) -> float:
        """``α_i = φ(x_i)`` for a parabolic branch ``i``."""
        return float(self.branch_value(i, self.model.fixed_point(i)))

    def parabolic_sum(self, i: int, n, z) -> Optional[np.ndarray]:
        if self.parabolic_sum_fn is None:
            return None
        return self.parabolic_sum_fn(i, np.asarray(n, dtype=float), np.asarray(z, dtype=float))

    @property
    def satisfies_positivity(self) -> bool:
        return self.positivity_floor > 0


def _sample_points(model: MapModel, i_max: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    idx = np.unique(np.round(np.geomspace(1, i_max, 200))).astype(float)
    frac = np.linspace(0.0, 1.0, 11)
    lo, hi = model.domain_interval(idx)
    x = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    i = np.broadcast_to(idx[:, None], x.shape)
    return i.ravel(), x.ravel()


def _sample_floor(phi: Potential) -> float:
    i, x = _sample_points(phi.model)
    values = phi.branch_value(i, x)
    for p in phi.model.parabolic_set:
        values = np.append(values, phi.branch_value(p, phi.model.fixed_point(p)))
    return float(np.min(values))


def _constant_parabolic_sum(const_fn):
    def parabolic_sum(i, n, z):
        return (n - 1.0) * const_fn(np.asarray(float(i))) * np.ones_like(z)

    return parabolic_sum


def log_digit(model: MapModel) -> Potential:
    """``φ = log(digit)``; the Khinchin potential ``log b_1`` for the Rényi map."""
    const = lambda i: np.log(model.digit_label(i))
    if model.name == "renyi":
        xi_class = XiClass.finite(0.5, 0.0, math.log(2.0))
    elif model.name == "gauss":
        xi_class = XiClass.finite(0.5, -math.log(2.0), 0.0)
    else:
        xi_class = _fitted_finite_class(model, const, 1.0 / model.growth_exponent)
    return Potential(
        name="log_b1",
        model=model,
        branch_value_fn=lambda i, x: const(i) + 0.0 * x,
        xi_class=xi_class,
        h1_flag=True,
        digit_constant_fn=const,
        parabolic_sum_fn=_constant_parabolic_sum(const),
        description="log of the first digit",
    )


def digit_power(model: MapModel, r: float = 1.0) -> Potential:
    """``φ = digit**r`` (``r > 0``); arithmetic-mean potential for ``r = 1``."""
    if not r > 0:
        raise ModelValidationError("digit power requires r > 0")
    const = lambda i: model.digit_label(i) ** r
    return Potential(
        name=f"b1_pow({r:g})",
        model=model,
        branch_value_fn=lambda i, x: const(i) + 0.0 * x,
        xi_class=XiClass.infinite(),
        h1_flag=True,
        digit_constant_fn=const,
        parabolic_sum_fn=_constant_parabolic_sum(const),
        description=f"first digit to the power {r:g}",
    )


def log_derivative(model: MapModel) -> Potential:
    """The geometric potential ``φ = log|f'|``."""

    def parabolic_sum(i, n, z):
        if model.parabolic_iterate is None:
            raise ValueError("model has no closed-form parabolic iterate")
        _, logderiv = model.parabolic_iterate(i, n - 1.0, z)
        return -logderiv

    return Potential(
        name="log_deriv",
        model=model,
        branch_value_fn=lambda i, x: np.log(model.derivative(i, x)),
        xi_class=XiClass.finite(1.0, 0.0, 0.0),
        h1_flag=False,
        parabolic_sum_fn=parabolic_sum if model.parabolic_iterate is not None else None,
        description="log of the derivative modulus",
    )


def digit_table(model: MapModel, values: Sequence[float], name: str = "digit_table") -> Potential:
    """Per-branch constants ``values[i-1]``; the last entry extends to all larger ``i``."""
    table = np.asarray(values, dtype=float)
    if table.size == 0:
        raise ModelValidationError("digit table is empty")

    def const(i):
        i = np.asarray(i, dtype=float)
        k = np.clip(np.floor(i).astype(np.int64) - 1, 0, table.size - 1)
        return table[k]

    return Potential(
        name=name,
        model=model,
        branch_value_fn=lambda i, x: const(i) + 0.0 * x,
        xi_class=XiClass.zero(),
        h1_flag=True,
        digit_constant_fn=const,
        parabolic_sum_fn=_constant_parabolic_sum(const),
        description=f"table of {table.size} digit values",
    )


def digit_expression(model: MapModel, source: str, xi_class: XiClass, h1_flag: bool = True) -> Potential:
    """``φ = g(d)`` for a formula ``g`` in the digit ``d``; the class and (H1) are declared."""
    expr = Expression(source, ("d",))
    const = lambda i: expr(model.digit_label(i))
    return Potential(
        name=f"digit_expr({source})",
        model=model,
        branch_value_fn=lambda i, x: const(i) + 0.0 * x,
        xi_class=xi_class,
        h1_flag=h1_flag,
        digit_constant_fn=const,
        parabolic_sum_fn=_constant_parabolic_sum(const),
        description=f"digit formula {source}",
    )


def constant_potential(model: MapModel, value: float = 1.0) -> Potential:
    const = lambda i: np.full(np.shape(i), float(value))
    return Potential(
        name=f"constant({value:g})",
        model=model,
        branch_value_fn=lambda i, x: np.full(np.broadcast(np.asarray(i), np.asarray(x)).shape, float(value)),
        xi_class=XiClass.zero(),
        h1_flag=True,
        digit_constant_fn=const,
        parabolic_sum_fn=_constant_parabolic_sum(const),
        description=f"constant {value:g}",
    )


def _fitted_finite_class(model: MapModel, const, theta: float) -> XiClass:
    i, x = _sample_points(model)
    gap = const(i) - theta * np.log(model.derivative(i, x))
    gap = gap[np.isfinite(gap)]
    return XiClass.finite(theta, float(gap.min()) - 1e-9, float(gap.max()) + 1e-9)


# --------------------------------------------------------------------------
# structural checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a sampled structural check."""

    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""


def _branch_samples(model: MapModel, i: np.ndarray, interior: int = 8) -> np.ndarray:
    """Endpoints, midpoint and ``interior`` interior points of each branch domain."""
    lo, hi = model.domain_interval(i)
    frac = np.concatenate([[0.0, 0.5, 1.0], (np.arange(1, interior + 1) / (interior + 1))])
    width = hi - lo
    x = lo[:, None] + width[:, None] * frac[None, :]
    # stay strictly inside at the open endpoint so the branch formula applies
    eps = 1e-13 * np.maximum(width, 1e-300)
    if model.closed_side == "left":
        x[:, 2] = hi - eps
    else:
        x[:, 0] = lo + eps
    return x


def _index_sample(i_max: int) -> np.ndarray:
    dense = np.arange(1, min(i_max, 2000) + 1)
    sparse = np.geomspace(2000, i_max, 400) if i_max > 2000 else np.array([])
    return np.unique(np.concatenate([dense, np.round(sparse)])).astype(float)


def check_growth_condition(model: MapModel, i_max: int, c_limit: Optional[float] = None) -> ConditionReport:
    """Empirical ``C`` with ``C⁻¹ ≤ |f_i'(x)| / i^κ ≤ C`` over sampled ``x ∈ Δ_i``, ``i ≤ i_max``."""
    if i_max < 2:
        raise ValueError("i_max must be at least 2")
    c_limit = model.growth_constant if c_limit is None else c_limit
    idx = _index_sample(i_max)
    x = _branch_samples(model, idx)
    ratio = model.derivative(idx[:, None], x) / idx[:, None] ** model.growth_exponent
    empirical = float(max(ratio.max(), 1.0 / ratio.min()))
    return ConditionReport(
        name="G",
        value=empirical,
        limit=c_limit,
        passed=empirical <= c_limit * (1 + 1e-9),
        detail=f"kappa={model.growth_exponent:g}, i_max={i_max}",
    )


def check_partition(model: MapModel, samples: int = 10_000, seed: int = 0) -> ConditionReport:
    """Every sampled point lies in exactly one branch domain and maps back into ``[0, 1)``."""
    rng = np.random.default_rng(seed)
    x = rng.random(samples)
    x = x[(x > 0) & (x < 1)]
    i = model.branch_index(x)
    lo, hi = model.domain_interval(i)
    if model.closed_side == "left":
        inside = (x >= lo) & (x < hi)
        below = model.domain_interval(np.maximum(i - 1, 1))
        unique = inside & ~((i > 1) & (x >= below[0]) & (x < below[1]))
    else:
        inside = (x > lo) & (x <= hi)
        unique = inside
    image = model.forward(i, x)
    ok = unique & (image >= -1e-12) & (image < 1 + 1e-12)
    bad = int(np.count_nonzero(~ok))
    return ConditionReport("NERI1", float(bad), 0.0, bad == 0, f"{x.size} sampled points")


def check_parabolic_structure(model: MapModel, i_max: int = 200) -> ConditionReport:
    """Neutral fixed points on parabolic branches, uniform expansion elsewhere."""
    worst = 0.0
    ok = True
    for p, x0 in model.parabolic_points.items():
        d0 = float(model.derivative(p, x0))
        worst = max(worst, abs(d0 - 1.0))
        x = _branch_samples(model, np.array([float(p)]))[0]
        x = x[np.abs(x - x0) > 1e-9]
        ok &= bool(np.all(model.derivative(p, x) > 1.0)) and abs(d0 - 1.0) < 1e-12
    hyper = np.array([i for i in range(1, i_max + 1) if i not in model.parabolic_points], dtype=float)
    if hyper.size:
        # interior samples only: the Gauss map is neutral at its rational endpoint x = 1
        x = _branch_samples(model, hyper)[:, 1:]
        x = np.delete(x, 1, axis=1)
        dmin = float(model.derivative(hyper[:, None], x).min())
        ok &= dmin >= model.expansion_constant * (1 - 1e-12) and dmin > 1.0
    return ConditionReport(
        "NERI3a",
        worst,
        1e-12,
        bool(ok),
        f"parabolic {list(model.parabolic_set)}, expansion floor {model.expansion_constant:g}",
    )


def check_distortion(model: MapModel, i_max: int = 1000, limit: float = 10.0) -> ConditionReport:
    """Sampled ``sup |f''| / |f'|²`` over branches ``i ≤ i_max`` (finite-difference ``f''``)."""
    idx = _index_sample(i_max)
    lo, hi = model.domain_interval(idx)
    frac = np.linspace(0.05, 0.95, 10)
    x = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    h = 1e-6 * (hi - lo)[:, None]
    d1 = model.derivative(idx[:, None], x)
    d2 = (model.derivative(idx[:, None], x + h) - model.derivative(idx[:, None], x - h)) / (2 * h)
    value = float(np.max(np.abs(d2) / d1**2))
    return ConditionReport("NERI3b", value, limit, value <= limit, f"i_max={i_max}")


def check_positivity(phi: Potential) -> ConditionReport:
    return ConditionReport("P", phi.positivity_floor, 0.0, phi.satisfies_positivity, phi.name)


def check_l_condition(phi: Potential, i_max: int = 2000) -> ConditionReport:
    """Sandwich ``θ·log|f'| + η ≤ φ ≤ θ·log|f'| + ξ`` for the finite class (``+θ`` reading)."""
    xc = phi.xi_class
    if xc.kind != "finite":
        return ConditionReport("L", 0.0, 0.0, True, f"not applicable to class {xc.kind}")
    i, x = _sample_points(phi.model, i_max)
    keep = x > 0 if phi.model.accumulation_point < 0.5 else x < 1
    i, x = i[keep], x[keep]
    gap = phi.branch_value(i, x) - xc.theta * np.log(phi.model.derivative(i, x))
    excess = float(max(xc.eta - gap.min(), gap.max() - xc.xi, 0.0))
    return ConditionReport("L", excess, 1e-9, excess <= 1e-9, xc.describe())


@dataclass(frozen=True)
class PotentialClassification:
    """Sampled ratio ``φ / log|f'|`` along the branches and its inferred limit class."""

    indices: np.ndarray
    ratios: np.ndarray
    estimated_limit: float
    observed_class: str
    consistent: bool


def classify_potential(model: MapModel, phi: Potential, i_max: int) -> PotentialClassification:
    """Compare the trend of ``φ / log|f'|`` with the declared growth class.

    The ratio is taken at one interior point per branch.  Its limit is
    extrapolated linearly in ``1/log i`` between ``i = sqrt(i_max)`` and
    ``i_max``; a ratio that keeps growing by more than a factor 1.5 is read as
    divergent.  An inconsistent trend triggers a warning only; the declared
    class stays authoritative.
    """
    idx = np.unique(np.round(np.geomspace(2, i_max, 60))).astype(float)
    lo, hi = model.domain_interval(idx)
    mid = 0.5 * (lo + hi)
    ratios = phi.branch_value(idx, mid) / np.log(model.derivative(idx, mid))

    i1, i2 = math.sqrt(i_max), float(i_max)
    r1 = float(np.interp(math.log(i1), np.log(idx), ratios))
    r2 = float(ratios[-1])
    u1, u2 = 1.0 / math.log(i1), 1.0 / math.log(i2)
    limit = r2 - (r1 - r2) * u2 / (u1 - u2)
    if r2 > 1.5 * r1 and r2 > 1.0:
        observed = "infinite"
        limit = math.inf
    elif abs(limit) < 0.05 * max(1.0, abs(r1)):
        observed = "zero"
    else:
        observed = "finite"

    declared = phi.xi_class
    if declared.kind == "finite":
        consistent = observed == "finite" and abs(limit - declared.theta) <= 0.1 * declared.theta + 0.02
    else:
        consistent = observed == declared.kind
    if not consistent:
        warnings.warn(
            f"potential {phi.name}: sampled ratio trend looks {observed} (limit {limit:.4g}) "
            f"but the declared class is {declared.describe()}",
            stacklevel=2,
        )
    return PotentialClassification(idx, ratios, float(limit), observed, consistent)


def with_growth_exponent(model: MapModel, kappa: float) -> MapModel:
    """Copy of ``model`` with a different declared growth exponent."""
    return replace(model, growth_exponent=kappa)


def with_inducing_exponent(model: MapModel, gamma: float) -> MapModel:
    return replace(model, inducing_exponent=gamma)
