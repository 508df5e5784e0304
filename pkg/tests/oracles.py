"""Independent reference computations whose results are frozen into the tests.

Each oracle uses a discretisation or arithmetic different from the package:
Ulam cell matrices, uniform-grid Nyström operators with linear interpolation,
Hurwitz-zeta tail sums, exact rationals and high-precision floats.  Running
``python tests/oracles.py`` recomputes every frozen value.
"""
from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.sparse import csr_matrix

# values recorded from the oracles below (see main())
FROZEN = {
    # Ulam, 4000 cells, 8 samples per cell
    "gauss_12_dimension_ulam": 0.5312802409004301,
    # induced IFS T_1^n T_2 on an 800-point grid, n <= 4000 plus Hurwitz tail
    "renyi_12_dimension_induced": 0.7988587087924087,
    # plain (non-induced) collocation route, 64 nodes, full alphabet with tails
    "renyi_log_b1_spectrum_1p2": 0.9752601975015652,
    # uniform-grid Nyström Legendre solve, 600 points
    "gauss_1_50_log_a1_spectrum_2p0": 0.8448101156937339,
}


# --------------------------------------------------------------------------
# dimension oracles
# --------------------------------------------------------------------------


def ulam_bowen_dimension(branches, cells: int = 4000, samples: int = 8, bracket=(0.3, 1.0)) -> float:
    """Bowen root from Ulam's piecewise-constant discretisation.

    ``branches`` lists ``(inverse, |inverse'|)`` pairs on ``[0, 1]``.
    """
    x = (np.arange(cells)[:, None] + (np.arange(samples)[None, :] + 0.5) / samples) / cells
    rows, cols, dens = [], [], []
    for inverse, d_inverse in branches:
        y = inverse(x)
        rows.append(np.repeat(np.arange(cells), samples))
        cols.append(np.minimum((y * cells).astype(int), cells - 1).ravel())
        dens.append(d_inverse(x).ravel())
    rows, cols, dens = np.concatenate(rows), np.concatenate(cols), np.concatenate(dens)

    def log_radius(t: float) -> float:
        mat = csr_matrix((dens**t / samples, (rows, cols)), shape=(cells, cells))
        v = np.ones(cells)
        lam = 1.0
        for _ in range(5000):
            w = mat @ v
            lam = w.max()
            w /= lam
            if np.abs(w - v).max() < 1e-14:
                break
            v = w
        return math.log(lam)

    return brentq(log_radius, *bracket, xtol=1e-13)


def gauss_branches(digits):
    return [(lambda y, k=k: 1.0 / (k + y), lambda y, k=k: 1.0 / (k + y) ** 2) for k in digits]


def renyi_12_induced_dimension(points: int = 800, n_max: int = 4000) -> float:
    """Dimension of the Rényi subsystem on digits {1, 2} via the IFS ``T_1^n ∘ T_2``.

    Sequences with infinitely many 2s are concatenations of blocks ``2 1^n``,
    so the limit set differs from the IFS attractor by a countable set.
    ``T_1^n(z) = z / (1 + n z)``; terms ``n > n_max`` are summed with the
    Hurwitz zeta function and placed at ``0``.
    """
    y = np.linspace(0.0, 1.0, points)
    z = 1.0 - 1.0 / (y + 2.0)
    n = np.arange(0, n_max + 1)[:, None]
    images = z[None, :] / (1.0 + n * z[None, :])
    log_w = -2.0 * np.log(y + 2.0)[None, :] - 2.0 * np.log1p(n * z[None, :])
    pos = images * (points - 1)
    lo = np.minimum(pos.astype(int), points - 2)
    frac = pos - lo
    rows = np.broadcast_to(np.arange(points), images.shape)

    def log_radius(t: float) -> float:
        mat = np.zeros((points, points))
        w = np.exp(t * log_w)
        np.add.at(mat, (rows, lo), w * (1.0 - frac))
        np.add.at(mat, (rows, lo + 1), w * frac)
        tail = np.array([float(mpmath.zeta(2 * t, n_max + 1 + 1 / zk)) * zk ** (-2 * t) for zk in z])
        mat[:, 0] += tail * (y + 2.0) ** (-2 * t)
        return math.log(np.max(np.abs(np.linalg.eigvals(mat))))

    return brentq(log_radius, 0.6, 0.95, xtol=1e-13)


# --------------------------------------------------------------------------
# spectrum oracles
# --------------------------------------------------------------------------


def nystrom_log_radius(branches, values, b: float, q: float, points: int = 600) -> float:
    """``log`` spectral radius of ``Σ_k exp(-q·values[k]) |T_k'|^b`` on a uniform grid."""
    y = np.linspace(0.0, 1.0, points)
    mat = np.zeros((points, points))
    for (inverse, d_inverse), val in zip(branches, values):
        img = inverse(y)
        pos = img * (points - 1)
        lo = np.minimum(pos.astype(int), points - 2)
        frac = pos - lo
        w = np.exp(-q * val) * d_inverse(y) ** b
        np.add.at(mat, (np.arange(points), lo), w * (1.0 - frac))
        np.add.at(mat, (np.arange(points), lo + 1), w * frac)
    return math.log(np.max(np.abs(np.linalg.eigvals(mat))))


def legendre_spectrum(branches, values, alpha: float, q_bounds, points: int = 600) -> float:
    """``min_q b(q)`` with ``P(-qφ - b log|f'|) + qα = 0`` for a finite digit set."""

    def b_of_q(q: float) -> float:
        return brentq(lambda b: nystrom_log_radius(branches, values, b, q, points) + q * alpha, -2.0, 3.0, xtol=1e-13)

    res = minimize_scalar(b_of_q, bounds=q_bounds, method="bounded", options={"xatol": 1e-7})
    return float(res.fun)


def plain_route_spectrum(alpha: float, nodes: int = 64) -> float:
    """Rényi ``log b_1`` spectrum through the non-induced operator of the package.

    This shares collocation code with the package but none of the inducing,
    excursion sums, ``s``-reduction or stationarity solve: ``b(q)`` is found
    by Brent's method on ``log ρ + qα`` and minimised numerically over ``q``.
    """
    from birkhoff_spectra.map_model import log_digit, renyi_model
    from birkhoff_spectra.transfer import Truncation, geometry_for

    model = renyi_model()
    phi = log_digit(model)
    geom = geometry_for(model, phi, None, Truncation(nodes=nodes), mode="plain")

    def b_of_q(q: float) -> float:
        return brentq(lambda b: geom.at(b, q).spectral(0.0).log_rho + q * alpha, 0.6, 1.0, xtol=1e-14)

    res = minimize_scalar(b_of_q, bounds=(-0.6, -0.01), method="bounded", options={"xatol": 1e-8})
    return float(res.fun)


# --------------------------------------------------------------------------
# digit oracles
# --------------------------------------------------------------------------


def exact_backward_digits(x: Fraction, n: int) -> list[int]:
    """Backward digits of a rational by exact iteration of ``1/(1-x) mod 1``."""
    out = []
    for _ in range(n):
        v = 1 / (1 - x)
        k = v.numerator // v.denominator
        out.append(k + 1)
        x = v - k
    return out


def high_precision_backward_digits(expr: str, n: int, dps: int) -> list[int]:
    """Backward digits of an ``mpmath`` expression iterated at ``dps`` decimal digits."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(mpmath.mpmathify(eval(expr, {"sqrt": mpmath.sqrt})))
        out = []
        for _ in range(n):
            v = 1 / (1 - x)
            k = int(mpmath.floor(v))
            out.append(k + 1)
            x = v - k
    return out


def main() -> None:
    print("gauss_12_dimension_ulam", repr(ulam_bowen_dimension(gauss_branches((1, 2)))))
    print("renyi_12_dimension_induced", repr(renyi_12_induced_dimension()))
    print("renyi_log_b1_spectrum_1p2", repr(plain_route_spectrum(1.2)))
    digits = range(1, 51)
    print(
        "gauss_1_50_log_a1_spectrum_2p0",
        repr(legendre_spectrum(gauss_branches(digits), [math.log(k) for k in digits], 2.0, (-3.0, -0.05))),
    )


if __name__ == "__main__":
    main()
