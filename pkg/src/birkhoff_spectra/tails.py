"""Asymptotic summation of slowly decaying series tails.

Transfer operators over a countable alphabet contain sums such as
``sum_{j > J} F(j)`` whose terms decay like a power of ``j`` (or like a power
times an exponential).  These are evaluated with the midpoint Euler-Maclaurin
formula: an integral from ``J + 1/2`` plus a first derivative correction.  The
integral uses a fixed composite Gauss-Legendre rule in the variable
``v = log(t / X)``, so the result is a smooth function of any parameters
appearing in ``F``.  Smoothness matters because pressures are differentiated
numerically downstream.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

LogTerm = Callable[[np.ndarray], np.ndarray]

_PANEL_EDGES = (0.0, 0.05, 0.25, 1.0, 3.0, 8.0, 28.0)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _log_panels() -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = [], []
    for lo, hi in zip(_PANEL_EDGES[:-1], _PANEL_EDGES[1:]):
        nodes.append(0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * _GL_WEIGHTS)
    return np.concatenate(nodes), np.concatenate(weights)


_V_NODES, _V_WEIGHTS = _log_panels()


def quadrature_points(start: float) -> np.ndarray:
    """Abscissae ``t`` used by :func:`tail_integral` for a lower limit ``start``."""
    return start * np.exp(_V_NODES)


def _evaluate(log_term: LogTerm, multiplier: Optional[LogTerm], t: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        values = np.exp(log_term(t))
        if multiplier is not None:
            values = values * multiplier(t)
    return values


def tail_integral(log_term: LogTerm, start: float, multiplier: Optional[LogTerm] = None) -> np.ndarray:
    """Integral of ``exp(log_term(t)) * multiplier(t)`` over ``t > start``.

    ``log_term`` maps a 1-D array of abscissae to an array whose last axis runs
    over them; leading axes are preserved in the result.  Beyond the last
    panel the integrand is continued as a power law fitted to its local decay;
    a non-integrable continuation yields ``inf``.
    """
    t = quadrature_points(start)
    values = _evaluate(log_term, multiplier, t)
    with np.errstate(over="ignore", invalid="ignore"):
        integral = (values * t * _V_WEIGHTS).sum(axis=-1)

    t_end = start * np.exp(_PANEL_EDGES[-1])
    step = 1e-3
    ends = np.array([t_end, t_end * np.exp(step)])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logs = log_term(ends)
        decay = -(logs[..., 1] - logs[..., 0]) / step
        if multiplier is not None:
            # the multiplier's own growth changes the decay rate
            mult = np.abs(np.broadcast_to(multiplier(ends), logs.shape))
            decay = decay - np.where(mult[..., 0] > 0, np.log(mult[..., 1] / mult[..., 0]) / step, 0.0)
        head = _evaluate(log_term, multiplier, ends[:1])[..., 0]
        remainder = np.where(decay > 1.0 + 1e-9, head * t_end / np.maximum(decay - 1.0, 1e-300), np.inf)
        remainder = np.where(head == 0.0, 0.0, remainder)
    return integral + remainder


def tail_sum(log_term: LogTerm, last: float, multiplier: Optional[LogTerm] = None) -> np.ndarray:
    """Approximate ``sum_{t = last + 1}^{inf} exp(log_term(t)) * multiplier(t)``.

    Accurate to roughly ``F''' / last**3`` relative to the tail itself, which
    is far below double-precision noise for ``last`` in the hundreds.
    """
    midpoint = last + 0.5
    integral = tail_integral(log_term, midpoint, multiplier)
    h = 1e-4 * midpoint
    probes = np.array([midpoint - h, midpoint + h])
    values = _evaluate(log_term, multiplier, probes)
    with np.errstate(over="ignore", invalid="ignore"):
        slope = (values[..., 1] - values[..., 0]) / (2.0 * h)
        return integral + slope / 24.0


def power_law_exponent(log_term: LogTerm, at: float) -> np.ndarray:
    """Local decay exponent ``-d log F / d log t`` at ``t = at``."""
    step = 1e-3
    pts = np.array([at, at * np.exp(step)])
    logs = log_term(pts)
    return -(logs[..., 1] - logs[..., 0]) / step
