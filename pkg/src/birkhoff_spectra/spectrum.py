"""Birkhoff spectra ``b(α)`` through the pressure of ``-qφ - b·log|f'|``.

For ``α`` off the flat part the dimension ``b(α)`` solves
``P_α(b, q) := p(b, q) + qα = 0`` and ``∂_q P_α(b, q) = 0``.  Since
``p(b, q) = -qα`` holds exactly when the induced pressure vanishes at
``s = -qα``, the inner equation becomes ``𝒫(b, q, -qα) = 0``, solved for
``b = b(q)`` by safeguarded Newton (``∂_b 𝒫 = -μ̃(log|F'|)``).  The outer
minimisation of ``b(q)`` reduces to the stationarity condition
``μ(φ) = α`` because ``db/dq`` is proportional to ``α - μ(φ)``; it is solved
by bracketing followed by Brent's method.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .map_model import MapModel, Potential
from .pressure import (
    BracketError,
    EquilibriumObservables,
    bowen_dimension,
    lower_bound,
    observables_from_spectral,
    pressure,
)
from .transfer import InfinitePressureError, SpectralData, SpectralError, Truncation, geometry_for

log = logging.getLogger(__name__)

CASE_TAGS = ("B1", "B2", "B3", "FLAT_A", "FLAT_INFTY", "BOUNDARY")


class SpectrumSolveError(ArithmeticError):
    """No interior solution could be bracketed at this truncation."""


@dataclass(frozen=True)
class SpectrumConfig:
    """Solver settings for spectrum points.

    ``q_policy`` is ``"auto"`` (sign of ``q`` from the position of ``α``
    relative to ``A``), ``"positive"`` or ``"negative"``.
    """

    truncation: Truncation = Truncation()
    digits: Optional[tuple[int, ...]] = None
    pressure_tol: float = 1e-8
    stationarity_tol: float = 1e-6
    b_tol: float = 1e-12
    q_tol: float = 1e-10
    q_start: float = 0.02
    q_limit: float = 200.0
    q_policy: str = "auto"
    alphas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for name in ("pressure_tol", "stationarity_tol", "b_tol", "q_tol", "q_start", "q_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.q_policy not in ("auto", "positive", "negative"):
            raise ValueError(f"unknown q policy {self.q_policy!r}")


@dataclass(frozen=True)
class SpectrumPoint:
    """One point ``(α, b(α))`` of the spectrum with the equilibrium data at the solution."""

    alpha: float
    b: float
    q: Optional[float]
    lyapunov: float
    entropy: float
    mean_phi: float
    case_tag: str
    flat: bool
    residuals: tuple[float, float]
    in_N: bool = True
    mean_return: float = math.nan
    detail: str = ""

    def row(self) -> dict:
        return {
            "alpha": self.alpha,
            "b": self.b,
            "q": "" if self.q is None else self.q,
            "lambda": self.lyapunov,
            "entropy": self.entropy,
            "mean_phi": self.mean_phi,
            "case": self.case_tag,
            "flat": int(self.flat),
            "res_P": self.residuals[0],
            "res_dP": self.residuals[1],
        }


CSV_COLUMNS = ("alpha", "b", "q", "lambda", "entropy", "mean_phi", "case", "flat", "res_P", "res_dP")


# --------------------------------------------------------------------------
# endpoints and flat part
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaEndpoints:
    """Range of Birkhoff averages: ``A`` exactly, ``α_inf``/``α_sup`` as scan estimates.

    The flags tell whether each estimate is only one-sided (an upper bound for
    ``α_inf`` or a lower bound for ``α_sup``).  ``alpha_sup`` is ``inf`` when
    the digit means diverge.
    """

    alpha_inf: float
    alpha_sup: float
    A: Optional[tuple[float, float]]
    inf_one_sided: bool
    sup_one_sided: bool


def parabolic_range(model: MapModel, phi: Potential, digits: Optional[Sequence[int]] = None) -> Optional[tuple[float, float]]:
    """``A = [min α_i, max α_i]`` over the parabolic digits in use (``None`` if there are none)."""
    par = model.parabolic_set if digits is None else [d for d in sorted(set(digits)) if model.is_parabolic(d)]
    if not par:
        return None
    values = [phi.parabolic_value(i) for i in par]
    return min(values), max(values)


def subsystem_dimension(model: MapModel, digits: Optional[Sequence[int]] = None, trunc: Truncation = Truncation()) -> float:
    """``δ``: the declared dimension of the full system or the Bowen root of a subsystem."""
    if digits is None and model.dimension is not None:
        return float(model.dimension)
    return bowen_dimension(model, digits, trunc)


def _equilibrium_mean(model, phi, b, q, trunc, digits) -> Optional[float]:
    try:
        res = pressure(model, phi, b, q, trunc, digits)
    except (BracketError, SpectralError):
        return None
    if res.infinite or not res.in_N:
        return None
    sd = res.diagnostics["spectral"]
    r = sd.mean("r")
    return sd.mean("phi") / r if math.isfinite(r) else None


def alpha_endpoints(
    model: MapModel,
    phi: Potential,
    trunc: Truncation = Truncation(),
    digits: Optional[Sequence[int]] = None,
    b: Optional[float] = None,
    q_values: Sequence[float] = (1, 2, 4, 8, 16, 32),
) -> AlphaEndpoints:
    """Estimate ``α_inf``/``α_sup`` from equilibrium means as ``q → ±∞`` at fixed ``b``."""
    A = parabolic_range(model, phi, digits)
    b = subsystem_dimension(model, digits, trunc) if b is None else b
    lows = [m for q in q_values if (m := _equilibrium_mean(model, phi, b, float(q), trunc, digits)) is not None]
    highs = [m for q in q_values if (m := _equilibrium_mean(model, phi, b, -float(q), trunc, digits)) is not None]
    alpha_inf = min(lows) if lows else math.inf
    inf_one_sided = True
    if A is not None and A[0] <= alpha_inf:
        # a Dirac mass at a parabolic point realises α_i exactly
        alpha_inf, inf_one_sided = A[0], False
    diverging = digits is None and phi.xi_class.kind in ("finite", "infinite") and _digit_means_diverge(model, phi)
    if diverging:
        alpha_sup, sup_one_sided = math.inf, False
    else:
        alpha_sup, sup_one_sided = (max(highs) if highs else -math.inf), True
        if A is not None:
            alpha_sup = max(alpha_sup, A[1])
    return AlphaEndpoints(alpha_inf, alpha_sup, A, inf_one_sided, sup_one_sided)


def _digit_means_diverge(model: MapModel, phi: Potential) -> bool:
    digits = np.array([10.0, 1e3, 1e5])
    lo, hi = model.domain_interval(digits)
    values = phi.branch_value(digits, 0.5 * (lo + hi))
    return bool(values[-1] > values[0] + 1.0 and values[-1] > values[1])


@dataclass(frozen=True)
class FlatReport:
    flat: bool
    reason: str
    b: Optional[float] = None


def flat_part(
    model: MapModel,
    phi: Potential,
    alpha: float,
    digits: Optional[Sequence[int]] = None,
    trunc: Truncation = Truncation(),
    atol: float = 1e-12,
) -> FlatReport:
    """Whether ``b(α) = δ``: for ``α ∈ A``, or above ``A`` when ``φ`` grows faster than ``log|f'|`` and has (H1)."""
    A = parabolic_range(model, phi, digits)
    if A is not None and A[0] - atol <= alpha <= A[1] + atol:
        return FlatReport(True, "A", subsystem_dimension(model, digits, trunc))
    above = A is None or alpha > A[1]
    if phi.xi_class.kind == "infinite" and phi.h1_flag and above and digits is None:
        return FlatReport(True, "B2", subsystem_dimension(model, digits, trunc))
    return FlatReport(False, "interior")


# --------------------------------------------------------------------------
# the two-level solve
# --------------------------------------------------------------------------


def _case_tag(phi: Potential) -> str:
    return {"zero": "B1", "infinite": "B2", "finite": "B3"}[phi.xi_class.kind]


@dataclass
class _InnerSolution:
    b: float
    spectral: SpectralData

    @property
    def stationarity(self) -> float:
        """``μ(φ) - α`` at the solution, via the induced integrals."""
        sd = self.spectral
        return sd.mean("phi") / sd.mean("r")


class _Solver:
    """Evaluates ``b(q)`` and ``μ(φ)`` at ``(b(q), q)`` for one ``α``."""

    def __init__(self, model: MapModel, phi: Potential, alpha: float, cfg: SpectrumConfig, b_cap: float) -> None:
        self.model, self.phi, self.alpha, self.cfg = model, phi, alpha, cfg
        self.geom = geometry_for(model, phi, cfg.digits, cfg.truncation)
        self.b_cap = b_cap
        self.cache: dict[float, _InnerSolution] = {}
        self.last_b = min(b_cap, 1.0)

    def _induced(self, b: float, q: float) -> Optional[tuple[float, SpectralData]]:
        """``P_α``-type value at ``(b, q)`` (zero exactly on the inner root) with its spectral data."""
        try:
            if self.geom.induced:
                sd = self.geom.at(b, q).spectral(-q * self.alpha)
                return sd.log_rho, sd
            # without inducing P_α(b, q) = log ρ + qα directly
            sd = self.geom.at(b, q).spectral(0.0)
            return sd.log_rho + q * self.alpha, sd
        except InfinitePressureError:
            return None

    def _b_floor(self, q: float) -> float:
        xc = self.phi.xi_class
        floor = 0.0
        if xc.kind == "finite" and q < 0 and self.cfg.digits is None:
            floor = self.model.s_inf - xc.theta * q
        return floor

    def inner(self, q: float) -> _InnerSolution:
        """Root ``b(q)`` of ``𝒫(b, q, -qα) = 0`` (decreasing in ``b``)."""
        if q in self.cache:
            return self.cache[q]
        lb = lower_bound(self.model, self.phi, q, self.cfg.digits)
        if -q * self.alpha <= lb:
            raise SpectrumSolveError(f"-qα = {-q * self.alpha:g} is not above LB(q) = {lb:g} at q = {q:g}")
        lo = self._b_floor(q)
        hi = None
        b = max(self.last_b, lo + 1e-6)
        ev = self._induced(b, q)
        # bracket: value(lo) > 0 (or infinite), value(hi) < 0
        if ev is not None and ev[0] < 0:
            hi, ev_hi = b, ev
        else:
            lo = b
            step = 0.05
            while True:
                trial = b + step
                if trial > 50:
                    raise SpectrumSolveError(f"no upper bracket for b at q = {q:g}")
                ev_t = self._induced(trial, q)
                if ev_t is not None and ev_t[0] < 0:
                    hi, ev_hi = trial, ev_t
                    break
                lo = trial
                step *= 2
        b, (val, sd) = hi, ev_hi
        for _ in range(200):
            slope = -sd.mean("lam")
            nxt = b - val / slope if slope < 0 else math.nan
            if not (lo < nxt < hi):
                nxt = 0.5 * (lo + hi)
            ev_n = self._induced(nxt, q)
            if ev_n is None or ev_n[0] > 0:
                lo = nxt
                if ev_n is None:
                    continue
            else:
                hi = nxt
            b_prev, b, (val, sd) = b, nxt, ev_n
            if abs(val) < 1e-13 or (abs(b - b_prev) < self.cfg.b_tol and abs(val) < 1e-11):
                break
            if hi - lo < self.cfg.b_tol:
                break
        else:
            raise SpectrumSolveError(f"inner solve for b did not converge at q = {q:g}")
        self.last_b = b
        sol = _InnerSolution(b, sd)
        self.cache[q] = sol
        return sol

    def gap(self, q: float) -> float:
        """``μ(φ) - α`` at ``(b(q), q)``; zero at the minimiser of ``b(q)``."""
        return self.inner(q).stationarity - self.alpha


def _q_sign(model, phi, alpha, cfg, solver: _Solver, A) -> int:
    if cfg.q_policy == "positive":
        return 1
    if cfg.q_policy == "negative":
        return -1
    if A is not None:
        return 1 if alpha < A[0] else -1
    # no parabolic point: compare with the mean at q = 0 (the measure of maximal dimension)
    return -1 if solver.gap(0.0) < 0 else 1


def solve_spectrum_point(
    model: MapModel,
    phi: Potential,
    alpha: float,
    cfg: SpectrumConfig = SpectrumConfig(),
    q_guess: Optional[float] = None,
) -> SpectrumPoint:
    """``b(α)`` with the minimising ``q(α)`` and equilibrium observables.

    Flat points return ``b = δ`` and ``q = None``.  When the stationarity
    condition cannot be bracketed inside ``|q| ≤ q_limit`` the point is
    returned with case tag ``BOUNDARY`` and its residuals.
    """
    digits = cfg.digits
    A = parabolic_range(model, phi, digits)
    flat = flat_part(model, phi, alpha, digits, cfg.truncation)
    if flat.flat:
        tag = "FLAT_A" if flat.reason == "A" else "FLAT_INFTY"
        return SpectrumPoint(alpha, flat.b, None, math.nan, math.nan, math.nan, tag, True, (0.0, 0.0), detail=flat.reason)

    delta = subsystem_dimension(model, digits, cfg.truncation)
    solver = _Solver(model, phi, alpha, cfg, delta)
    sign = _q_sign(model, phi, alpha, cfg, solver, A)

    # μ(φ) - α is negative near q = 0 when q < 0 is sought and positive when q > 0 is
    def gap(q: float) -> float:
        return -sign * solver.gap(q)

    # find where the oriented gap turns positive: grow |q| from a small start,
    # or shrink it when the gap is already positive there
    def probe(mag: float) -> Optional[float]:
        try:
            return gap(sign * mag)
        except SpectrumSolveError as exc:
            log.debug("skip q=%g: %s", sign * mag, exc)
            return None

    q_near = q_far = None
    mag = abs(q_guess) if q_guess is not None and np.sign(q_guess) == sign else cfg.q_start
    g = probe(mag)
    if g is not None and g >= 0:
        q_far = sign * mag
        while mag > 1e-12:
            mag *= 0.25
            g = probe(mag)
            if g is not None and g < 0:
                q_near = sign * mag
                break
            if g is not None:
                q_far = sign * mag
    else:
        if g is not None:
            q_near = sign * mag
        while mag < cfg.q_limit:
            mag = min(2.0 * mag, cfg.q_limit)
            g = probe(mag)
            if g is None:
                continue
            if g >= 0:
                q_far = sign * mag
                break
            q_near = sign * mag
    if q_near is None or q_far is None or abs(q_near) > abs(q_far):
        q_edge = q_near if q_near is not None else q_far
        if q_edge is None:
            raise SpectrumSolveError(f"no admissible q for α = {alpha:g}")
        return _boundary_point(model, phi, alpha, solver, q_edge)
    q_star = brentq(gap, q_near, q_far, xtol=cfg.q_tol, rtol=1e-14, maxiter=200)
    return _finish(model, phi, alpha, cfg, solver, q_star, _case_tag(phi))


def _observables(sd: SpectralData, q: float, alpha: float) -> EquilibriumObservables:
    return observables_from_spectral(sd, -q * alpha)


def _finish(model, phi, alpha, cfg, solver: _Solver, q: float, tag: str) -> SpectrumPoint:
    sol = solver.inner(q)
    b = sol.b
    check = pressure(model, phi, b, q, cfg.truncation, cfg.digits, tol=1e-13)
    if check.infinite:
        raise SpectrumSolveError(f"pressure is infinite at the solution (b={b:g}, q={q:g})")
    res_p = abs(check.value + q * alpha)
    obs = observables_from_spectral(check.diagnostics["spectral"], check.value)
    res_dp = abs(obs.mean_phi - alpha)
    point = SpectrumPoint(
        alpha=alpha,
        b=b,
        q=q,
        lyapunov=obs.lyapunov,
        entropy=obs.entropy,
        mean_phi=obs.mean_phi,
        case_tag=tag,
        flat=False,
        residuals=(res_p, res_dp),
        in_N=check.in_N,
        mean_return=obs.mean_return,
    )
    if res_p > cfg.pressure_tol or res_dp > cfg.stationarity_tol or not check.in_N:
        log.warning("spectrum point α=%g misses tolerance: res_P=%.2e res_dP=%.2e in_N=%s", alpha, res_p, res_dp, check.in_N)
    return point


def _boundary_point(model, phi, alpha, solver: _Solver, q: float) -> SpectrumPoint:
    log.warning("stationarity not bracketed for α=%g; outer minimum sits at q=%g", alpha, q)
    sol = solver.inner(q)
    sd = sol.spectral
    try:
        obs = _observables(sd, q, alpha)
        lyap, ent, mean = obs.lyapunov, obs.entropy, obs.mean_phi
    except InfinitePressureError:
        lyap = ent = mean = math.nan
    return SpectrumPoint(
        alpha, sol.b, q, lyap, ent, mean, "BOUNDARY", False,
        (abs(sd.log_rho), abs(mean - alpha) if math.isfinite(mean) else math.inf),
        detail="outer minimum at the q search boundary",
    )


def b_of_q(model: MapModel, phi: Potential, alpha: float, q: float, cfg: SpectrumConfig = SpectrumConfig()) -> float:
    """The inner root ``b(q)`` (exposed for envelope checks)."""
    delta = subsystem_dimension(model, cfg.digits, cfg.truncation)
    return _Solver(model, phi, alpha, cfg, delta).inner(q).b


# --------------------------------------------------------------------------
# curves
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveAudit:
    """Monotonicity of ``b`` left and right of ``A`` and the sign law of ``q``."""

    monotone_left: bool
    monotone_right: bool
    sign_law: bool
    below_dimension: bool


def spectrum_curve(
    model: MapModel,
    phi: Potential,
    alphas: Sequence[float],
    cfg: SpectrumConfig = SpectrumConfig(),
    warm_start: bool = True,
    solve: Callable[..., SpectrumPoint] = solve_spectrum_point,
) -> list[SpectrumPoint]:
    """Spectrum points along a grid of ``α`` values, warm-starting ``q`` from the neighbour."""
    points = []
    q_prev = None
    for alpha in alphas:
        pt = solve(model, phi, float(alpha), cfg, q_guess=q_prev if warm_start else None)
        points.append(pt)
        if pt.q is not None:
            q_prev = pt.q
    return points


def audit_curve(points: Sequence[SpectrumPoint], A: Optional[tuple[float, float]], delta: float, atol: float = 1e-9) -> CurveAudit:
    pts = sorted(points, key=lambda p: p.alpha)
    left = [p.b for p in pts if A is not None and p.alpha < A[0]]
    right = [p.b for p in pts if A is None or p.alpha > A[1]]
    mono_left = all(b2 >= b1 - atol for b1, b2 in zip(left, left[1:]))
    mono_right = A is None or all(b2 <= b1 + atol for b1, b2 in zip(right, right[1:]))
    sign_ok = True
    for p in pts:
        if p.q is None or A is None:
            continue
        if p.alpha < A[0] and not p.q > 0:
            sign_ok = False
        if p.alpha > A[1] and not p.q < 0:
            sign_ok = False
    below = all(p.b <= delta + 1e-6 for p in pts)
    return CurveAudit(mono_left, mono_right, sign_ok, below)
