"""Topological pressure of ``-qφ - b·log|f'|`` and Bowen dimension roots.

Three routes are available:

* ``induced-root``: the pressure ``p(b, q)`` is the root in ``s`` of the
  induced pressure ``𝒫(b, q, s)``, computed spectrally on the first-return
  system with asymptotic tails (the default whenever parabolic digits occur);
* ``spectral``: the logarithm of the dominant eigenvalue of the collocated
  transfer operator of a (finite or uniformly expanding) subsystem, without
  inducing;
* ``direct-cylinder``: ``(1/n)·log`` of the sum over words of length ``n`` of
  the exponentiated sup of the Birkhoff sum, an upper estimate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .coding import birkhoff_sum_bounds, depth_words
from .map_model import MapModel, Potential, constant_potential
from .transfer import (
    InfinitePressureError,
    SpectralData,
    Truncation,
    WeightedOperator,
    geometry_for,
)

log = logging.getLogger(__name__)

S_MARGIN = 1e-6


class DivergentTailError(InfinitePressureError):
    """The induced pressure was requested at ``s ≤ LB(q)``, where it diverges."""


class BracketError(ArithmeticError):
    """A root could not be bracketed."""


@dataclass(frozen=True)
class PressureResult:
    """A pressure value with provenance.

    ``value`` is ``None`` when the pressure is infinite (see ``infinite``).
    ``in_N`` reports whether the value exceeds the parabolic floor ``LB(q)``.
    """

    value: Optional[float]
    method: str
    truncation: Truncation
    residual: float
    in_N: bool
    lower_bound: float = -math.inf
    infinite: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def is_finite(self) -> bool:
        return not self.infinite

    def require(self) -> float:
        if self.infinite or self.value is None:
            raise InfinitePressureError("pressure is infinite")
        return self.value


def _infinite(method: str, trunc: Truncation, lb: float, reason: str) -> PressureResult:
    return PressureResult(None, method, trunc, math.inf, False, lb, True, {"reason": reason})


def lower_bound(model: MapModel, phi: Potential, q: float, digits: Optional[Sequence[int]] = None) -> float:
    """``LB(q) = max_{i ∈ P}(-q·α_i)`` over the parabolic digits in use (``-inf`` if none)."""
    parabolic = model.parabolic_set if digits is None else [d for d in set(digits) if model.is_parabolic(d)]
    if not parabolic:
        return -math.inf
    return max(-q * phi.parabolic_value(i) for i in parabolic)


# --------------------------------------------------------------------------
# finiteness
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FinitenessReport:
    finite: bool
    partial_sum: float
    tail_exponent: float


def finiteness_test(model: MapModel, phi: Potential, b: float, q: float, i_max: int = 1000) -> FinitenessReport:
    """Decide finiteness of ``Σ_i exp(sup_{Δ_i} ψ)`` from a power-law fit of its terms.

    The exponent is fitted by least squares on ``log`` term versus ``log i``
    over the last decade ``[i_max/10, i_max]``; the sum is declared finite
    when the fitted decay exponent exceeds 1.
    """
    if i_max < 1000:
        raise ValueError("i_max must be at least 1000")
    idx = np.arange(1, i_max + 1, dtype=float)
    lo, hi = model.domain_interval(idx)
    frac = np.linspace(0.0, 1.0, 11)
    x = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    x[:, -1] = hi - 1e-13 * (hi - lo) if model.closed_side == "left" else x[:, -1]
    if model.closed_side == "right":
        x[:, 0] = lo + 1e-13 * (hi - lo)
    psi = -q * phi.branch_value(idx[:, None], x) - b * np.log(model.derivative(idx[:, None], x))
    log_terms = psi.max(axis=1)
    partial = float(np.sum(np.exp(log_terms)))
    sel = idx >= i_max / 10
    slope = np.polyfit(np.log(idx[sel]), log_terms[sel], 1)[0]
    exponent = float(-slope)
    return FinitenessReport(exponent > 1.0 + 1e-6, partial, exponent)


# --------------------------------------------------------------------------
# truncated pressure on finite digit sets
# --------------------------------------------------------------------------


def direct_cylinder_pressure(
    model: MapModel,
    phi: Potential,
    b: float,
    q: float,
    digits: Sequence[int],
    depth: int = 2,
    max_words: int = 2_000_000,
) -> PressureResult:
    """``(1/n)·log Σ_{|ω| = n} exp(sup_{[ω]} S_n ψ)`` over all words of length ``n = depth``.

    The residual is the gap to the previous depth; values decrease towards
    the pressure as the depth grows.  Depth is reduced when the word count
    would exceed ``max_words``.
    """
    alphabet = np.array(sorted(set(int(d) for d in digits)), dtype=np.int64)
    if alphabet.size == 0:
        raise ValueError("digit set is empty")
    depth = max(1, depth)
    while depth > 1 and alphabet.size**depth > max_words:
        depth -= 1

    def psi(i, x):
        return -q * phi.branch_value(i, x) - b * np.log(model.derivative(i, x))

    values = []
    for n in range(1, depth + 1):
        words = depth_words(alphabet, n)
        total = 0.0
        chunk = 200_000
        sups = []
        for start in range(0, words.shape[0], chunk):
            _, hi = birkhoff_sum_bounds(model, psi, words[start : start + chunk])
            sups.append(hi)
        sups = np.concatenate(sups)
        top = sups.max()
        total = top + math.log(np.sum(np.exp(sups - top)))
        values.append(total / n)
    residual = abs(values[-1] - values[-2]) if len(values) > 1 else math.nan
    trunc = Truncation(j_max=int(alphabet[-1]), n_max=1, depth=min(depth, 2), tails=False)
    lb = lower_bound(model, phi, q, alphabet)
    return PressureResult(values[-1], "direct-cylinder", trunc, residual, values[-1] > lb, lb, diagnostics={"by_depth": values, "depth": depth})


def truncated_pressure(
    model: MapModel,
    phi: Potential,
    b: float,
    q: float,
    digits: Sequence[int],
    depth: int = 2,
    nodes: int = 48,
) -> PressureResult:
    """Pressure of the subsystem on a finite digit set, without inducing.

    The spectral value is the log of the dominant eigenvalue of the collocated
    transfer operator on ``[0, 1]`` restricted to ``digits``; the residual is
    the change when the node count is reduced by a third.  The cylinder-sum
    value at ``depth`` is reported in ``diagnostics["direct"]``.
    """
    digits = sorted(set(int(d) for d in digits))
    trunc = Truncation(j_max=max(digits), n_max=1, depth=min(max(depth, 1), 2), nodes=nodes, tails=False)
    fine = geometry_for(model, phi, digits, trunc, mode="plain").at(b, q).spectral(0.0).log_rho
    coarse_trunc = replace(trunc, nodes=max(8, (2 * nodes) // 3))
    coarse = geometry_for(model, phi, digits, coarse_trunc, mode="plain").at(b, q).spectral(0.0).log_rho
    lb = lower_bound(model, phi, q, digits)
    diagnostics = {}
    if len(digits) ** depth <= 2_000_000:
        direct = direct_cylinder_pressure(model, phi, b, q, digits, depth)
        diagnostics = {"direct": direct.value, "direct_residual": direct.residual}
    return PressureResult(fine, "spectral", trunc, abs(fine - coarse), fine > lb, lb, diagnostics=diagnostics)


# --------------------------------------------------------------------------
# induced pressure and its root
# --------------------------------------------------------------------------


def induced_spectral(
    model: MapModel,
    phi: Potential,
    b: float,
    q: float,
    s: float,
    trunc: Truncation = Truncation(),
    digits: Optional[Sequence[int]] = None,
) -> SpectralData:
    """Spectral data of the induced operator at ``(b, q, s)``."""
    lb = lower_bound(model, phi, q, digits)
    if s < lb:
        raise DivergentTailError(f"s = {s:g} is below LB(q) = {lb:g}")
    # at s = LB(q) the excursion tail converges only through its polynomial decay
    return geometry_for(model, phi, digits, trunc).at(b, q).spectral(s)


def _tail_estimate(sd: SpectralData, per_step: bool) -> float:
    eps = min(max(sd.mean("tail"), 0.0), 1.0 - 1e-16)
    est = -math.log1p(-eps)
    return est / sd.mean("r") if per_step else est


def induced_pressure(
    model: MapModel,
    phi: Potential,
    b: float,
    q: float,
    s: float,
    trunc: Truncation = Truncation(),
    digits: Optional[Sequence[int]] = None,
) -> PressureResult:
    """``𝒫(b, q, s)``: log of the dominant eigenvalue of the induced operator.

    ``truncation.tail_estimate`` is ``-log(1 - ε)`` with ``ε`` the equilibrium
    mass of the symbols handled by the asymptotic tails.
    """
    lb = lower_bound(model, phi, q, digits)
    try:
        sd = induced_spectral(model, phi, b, q, s, trunc, digits)
    except DivergentTailError:
        raise
    except InfinitePressureError as exc:
        return _infinite("spectral", trunc, lb, str(exc))
    trunc = replace(trunc, tail_estimate=_tail_estimate(sd, per_step=False))
    return PressureResult(sd.log_rho, "spectral", trunc, 0.0, s > lb, lb, diagnostics={"spectral": sd})


@dataclass
class _RootOutcome:
    s: float
    spectral: Optional[SpectralData]
    residual: float
    floor: bool


def _solve_root(op: WeightedOperator, lb: float, tol: float, guess: Optional[float] = None, max_iter: int = 100) -> _RootOutcome:
    """Root of ``s ↦ 𝒫(b, q, s)`` by safeguarded Newton (derivative ``-μ̃(r)``)."""
    if math.isfinite(lb):
        s_lo = lb + S_MARGIN
        sd_lo = op.spectral(s_lo)
        f_lo = sd_lo.log_rho
        if f_lo <= 0:
            return _RootOutcome(lb, sd_lo, abs(f_lo), True)
    else:
        s_lo = -1.0
        sd_lo = op.spectral(s_lo)
        f_lo = sd_lo.log_rho
        while f_lo <= 0:
            s_lo = 2 * s_lo - 1.0
            if s_lo < -1e3:
                raise BracketError("no lower bracket for the induced pressure root")
            sd_lo = op.spectral(s_lo)
            f_lo = sd_lo.log_rho
    # 𝒫 drops at least at unit rate in s (return times are at least 1)
    s_hi = s_lo + f_lo * (1 + 1e-9) + 1e-12
    if s_hi > 1e3:
        raise BracketError("induced pressure root lies beyond s = 1e3")
    a, c = s_lo, s_hi
    s = guess if guess is not None and a < guess < c else s_lo + 0.5 * f_lo / max(sd_lo.mean("r"), 1.0)
    sd = None
    for _ in range(max_iter):
        sd = op.spectral(s)
        f = sd.log_rho
        if f > 0:
            a = s
        else:
            c = s
        nxt = s + f / sd.mean("r")
        if not (a < nxt < c) or nxt == s:
            nxt = 0.5 * (a + c)
        if abs(nxt - s) < tol and abs(f) < 10 * tol:
            s = nxt
            sd = op.spectral(s)
            break
        s = nxt
    else:
        raise BracketError("Newton iteration for the pressure root did not converge")
    return _RootOutcome(s, sd, abs(sd.log_rho), False)


def pressure(
    model: MapModel,
    phi: Potential,
    b: float,
    q: float,
    trunc: Truncation = Truncation(),
    digits: Optional[Sequence[int]] = None,
    tol: float = 1e-10,
    cross_check: bool = False,
    guess: Optional[float] = None,
) -> PressureResult:
    """``p(b, q)`` for the map restricted to ``digits`` (all digits by default).

    With parabolic digits the value is the root ``s*`` of the induced
    pressure, and ``in_N`` is ``s* > LB(q)``.  When the induced pressure is
    already non-positive at ``LB(q) + 1e-6`` the pressure equals the floor
    ``LB(q)`` (carried by the parabolic fixed point) and ``in_N`` is false.
    ``cross_check`` adds the non-induced spectral pressure of the digit set
    ``{1..j_max}`` to ``diagnostics``.
    """
    lb = lower_bound(model, phi, q, digits)
    geom = geometry_for(model, phi, digits, trunc)
    try:
        op = geom.at(b, q)
        if not geom.induced:
            sd = op.spectral(0.0)
            value = sd.log_rho
            res = PressureResult(
                value,
                "spectral",
                replace(trunc, tail_estimate=_tail_estimate(sd, per_step=True)),
                0.0,
                value > lb,
                lb,
                diagnostics={"spectral": sd},
            )
        else:
            out = _solve_root(op, lb, tol, guess)
            est = _tail_estimate(out.spectral, per_step=True) if not out.floor else 0.0
            res = PressureResult(
                out.s,
                "induced-root",
                replace(trunc, tail_estimate=est),
                out.residual,
                not out.floor,
                lb,
                diagnostics={"spectral": out.spectral, "floor": out.floor},
            )
    except InfinitePressureError as exc:
        return _infinite("induced-root" if geom.induced else "spectral", trunc, lb, str(exc))
    if cross_check:
        ref = truncated_pressure(model, phi, b, q, range(1, trunc.j_max + 1), depth=1)
        res.diagnostics["cross_check"] = ref.value
        res.diagnostics["cross_check_ok"] = abs(ref.value - res.value) <= res.residual + res.truncation.tail_estimate + ref.residual + 1e-9
    return res


# --------------------------------------------------------------------------
# equilibrium observables and Ruelle's formula
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumObservables:
    """Integrals against the equilibrium state of ``-qφ - b·log|f'|``.

    Induced integrals (``induced_*``) refer to the first-return system; the
    lifted values divide by the mean return time.
    """

    b: float
    q: float
    pressure: float
    lyapunov: float
    mean_phi: float
    entropy: float
    mean_return: float
    induced_entropy: float
    induced_lyapunov: float
    induced_phi: float


def observables_from_spectral(sd: SpectralData, pressure_value: float) -> EquilibriumObservables:
    """Abramov-Kac lifting of induced integrals to the original map."""
    mean_r = sd.mean("r")
    if not math.isfinite(mean_r) or mean_r <= 0:
        raise InfinitePressureError("mean return time is infinite")
    lam_i, phi_i, h_i = sd.mean("lam"), sd.mean("phi"), sd.entropy_induced
    op = sd.operator
    return EquilibriumObservables(
        b=op.b,
        q=op.q,
        pressure=pressure_value,
        lyapunov=lam_i / mean_r,
        mean_phi=phi_i / mean_r,
        entropy=h_i / mean_r,
        mean_return=mean_r,
        induced_entropy=h_i,
        induced_lyapunov=lam_i,
        induced_phi=phi_i,
    )


def equilibrium(
    model: MapModel,
    phi: Potential,
    b: float,
    q: float,
    trunc: Truncation = Truncation(),
    digits: Optional[Sequence[int]] = None,
    tol: float = 1e-10,
) -> tuple[PressureResult, EquilibriumObservables]:
    """Pressure together with the equilibrium observables at ``(b, q)``."""
    res = pressure(model, phi, b, q, trunc, digits, tol)
    if res.infinite:
        raise InfinitePressureError(res.diagnostics.get("reason", "infinite pressure"))
    if not res.in_N:
        raise InfinitePressureError("no liftable equilibrium state: p(b, q) sits at the parabolic floor")
    return res, observables_from_spectral(res.diagnostics["spectral"], res.value)


@dataclass(frozen=True)
class RuelleReport:
    fd_b: float
    fd_q: float
    minus_lyapunov: float
    minus_mean_phi: float
    residual_b: float
    residual_q: float


def ruelle_check(
    model: MapModel,
    phi: Potential,
    b: float,
    q: float,
    h_step: float = 1e-4,
    trunc: Truncation = Truncation(),
    digits: Optional[Sequence[int]] = None,
) -> RuelleReport:
    """Central differences of ``p`` in ``b`` and ``q`` against ``-λ`` and ``-μ(φ)``."""
    values = {}
    for db, dq in ((h_step, 0), (-h_step, 0), (0, h_step), (0, -h_step)):
        r = pressure(model, phi, b + db, q + dq, trunc, digits)
        if r.infinite or not r.in_N:
            raise ValueError(f"neighbour ({b + db:g}, {q + dq:g}) is outside the region where p exceeds LB")
        values[(db, dq)] = r.value
    _, obs = equilibrium(model, phi, b, q, trunc, digits)
    fd_b = (values[(h_step, 0)] - values[(-h_step, 0)]) / (2 * h_step)
    fd_q = (values[(0, h_step)] - values[(0, -h_step)]) / (2 * h_step)
    return RuelleReport(fd_b, fd_q, -obs.lyapunov, -obs.mean_phi, abs(fd_b + obs.lyapunov), abs(fd_q + obs.mean_phi))


# --------------------------------------------------------------------------
# Bowen dimension
# --------------------------------------------------------------------------


def bowen_dimension(
    model: MapModel,
    digits: Optional[Sequence[int]] = None,
    trunc: Truncation = Truncation(),
    tol: float = 1e-8,
    t_max: float = 1.5,
) -> float:
    """Root ``t*`` of ``t ↦ P(-t·log|f'|)`` for the subsystem on ``digits``.

    With a parabolic digit present, ``t*`` is the root of the induced pressure
    ``𝒫(t, 0, 0)`` (the parabolic floor is 0 at ``q = 0``), which is smooth in
    ``t`` where ``P`` itself flattens.  Infinite pressure counts as positive.
    """
    zero = constant_potential(model, 1.0)
    geom = geometry_for(model, zero, digits, trunc)

    def f(t: float) -> float:
        try:
            return geom.at(t, 0.0).spectral(0.0).log_rho
        except InfinitePressureError:
            return math.inf

    lo, hi = 0.0, t_max
    f_lo, f_hi = f(lo), f(hi)
    if not f_hi < 0:
        raise BracketError(f"pressure at t = {t_max} is not negative")
    if f_lo < 0:
        raise BracketError("pressure at t = 0 is negative")
    # bisect until the left end is finite, then switch to Brent
    while not math.isfinite(f_lo):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm > 0:
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
        if hi - lo < tol:
            return 0.5 * (lo + hi)
    return float(brentq(f, lo, hi, xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps))
