"""Chebyshev collocation grids on intervals.

A grid stores first-kind Chebyshev nodes on ``[lo, hi]`` together with the
map from node values to Chebyshev coefficients, so that interpolation rows and
endpoint derivative rows can be produced as plain matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb


def chebyshev_nodes(lo: float, hi: float, count: int) -> np.ndarray:
    """First-kind Chebyshev nodes on ``[lo, hi]`` in decreasing order."""
    k = np.arange(count)
    unit = np.cos(np.pi * (2 * k + 1) / (2 * count))
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * unit


@dataclass(frozen=True)
class ChebyshevGrid:
    """Interpolation grid with ``size`` nodes on ``[lo, hi]``."""

    lo: float
    hi: float
    size: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    _coefficients: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise ValueError(f"empty grid interval [{self.lo}, {self.hi}]")
        nodes = chebyshev_nodes(self.lo, self.hi, self.size)
        vander = cheb.chebvander(self._to_unit(nodes), self.size - 1)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "_coefficients", np.linalg.inv(vander))

    def _to_unit(self, x: np.ndarray) -> np.ndarray:
        return (2.0 * np.asarray(x, dtype=float) - (self.lo + self.hi)) / (self.hi - self.lo)

    def interpolation_rows(self, x: np.ndarray) -> np.ndarray:
        """Rows ``E`` with ``E @ g_nodes`` equal to the interpolant at ``x``.

        The output has shape ``x.shape + (size,)``.
        """
        x = np.asarray(x, dtype=float)
        flat = cheb.chebvander(self._to_unit(x.ravel()), self.size - 1) @ self._coefficients
        return flat.reshape(x.shape + (self.size,))

    def derivative_rows(self, x0: float, orders: int) -> np.ndarray:
        """Rows giving derivatives of order ``0..orders-1`` of the interpolant at ``x0``."""
        rows = np.empty((orders, self.size))
        scale = 2.0 / (self.hi - self.lo)
        point = self._to_unit(np.array([x0]))
        for k in range(orders):
            coef = self._coefficients
            if k:
                coef = cheb.chebder(coef, k, axis=0) * scale**k
            rows[k] = (cheb.chebvander(point, coef.shape[0] - 1) @ coef)[0]
        return rows

    def taylor_rows(self, x0: float, orders: int) -> np.ndarray:
        """Derivative rows divided by ``k!``, i.e. Taylor coefficients at ``x0``."""
        rows = self.derivative_rows(x0, orders)
        return rows / np.array([math.factorial(k) for k in range(orders)])[:, None]
