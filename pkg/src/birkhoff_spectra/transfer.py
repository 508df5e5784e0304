"""Chebyshev collocation of (induced) transfer operators.

For a potential ``ψ = -qφ - b·log|f'|`` the transfer operator acts by
``(L g)(z) = Σ_ω exp(ψ_ω(T_ω z))·g(T_ω z)``.  Over the induced alphabet the sum
splits by pieces: on the hyperbolic piece ``B``

    (L g)_B(z) = e^{-s} [ Σ_{j ∈ H} w_j(z) g_B(T_j z) + Σ_{i ∈ P} w_i(z) g_{A_i}(T_i z) ],

and on each parabolic piece ``A_i``

    (L g)_{A_i}(z) = Σ_{n ≥ 1} e^{-sn} W_{i,n}(z) (M_i g)(T_i^{n-1} z),

where ``M_i g(y) = Σ_{j ≠ i} w_j(y) g_{src(j)}(T_j y)`` is represented on a
grid over ``Δ_i``.  Every function is stored by its values at Chebyshev nodes,
so the operator becomes a dense matrix whose dominant eigenvalue is
``exp(𝒫(b, q, s))``.  Digit sums beyond ``j_max`` and excursion sums beyond
``n_max`` are added through Taylor expansions at the accumulation points and
the asymptotic series of :mod:`tails`.

Weighted copies of the matrix (each branch weight multiplied by the induced
potential, the induced log-derivative or the return time) give integrals
against the equilibrium measure through the eigenvector pair.
"""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .chebyshev import ChebyshevGrid
from .induced import HYPERBOLIC_PIECE, hyperbolic_piece_interval, parabolic_piece, parabolic_piece_interval
from .map_model import MapModel, Potential
from .tails import tail_sum

log = logging.getLogger(__name__)

TAYLOR_ORDERS = 4
_DIGIT_CHUNK = 2048


class InfinitePressureError(ArithmeticError):
    """A tail sum of the operator diverges at the requested parameters."""


class SpectralError(ArithmeticError):
    """No positive dominant eigenvalue was found."""


@dataclass(frozen=True)
class Truncation:
    """Truncation of the alphabet used by the operator.

    ``j_max`` bounds the explicitly summed digits, ``n_max`` the explicitly
    summed parabolic excursions; beyond them asymptotic tails are added when
    ``tails`` is true.  ``nodes`` is the number of collocation nodes per piece.
    ``depth`` is the word length used by the cylinder-sum cross-check and
    ``tail_estimate`` the first-order pressure share carried by the tails.
    """

    j_max: int = 400
    n_max: int = 400
    depth: int = 1
    tail_estimate: float = 0.0
    nodes: int = 24
    tails: bool = True

    def __post_init__(self) -> None:
        if self.depth not in (1, 2):
            raise ValueError("depth must be 1 or 2")
        if self.tail_estimate < 0:
            raise ValueError("tail_estimate must be non-negative")
        if self.j_max < 1 or self.n_max < 1:
            raise ValueError("j_max and n_max must be positive")
        if self.nodes < 4:
            raise ValueError("at least 4 collocation nodes are needed")


# --------------------------------------------------------------------------
# parameter-independent geometry
# --------------------------------------------------------------------------


@dataclass
class _DigitBlock:
    """Branches ``T_d`` for explicit digits ``d`` evaluated at row points ``z``."""

    z: np.ndarray
    digits: np.ndarray
    source: str
    rows: np.ndarray  # (m, n, K) interpolation rows of the source grid at T_d z
    phi: np.ndarray  # (m, n) potential at T_d z
    log_dt: np.ndarray  # (m, n) log|T_d'(z)|


@dataclass
class _DigitTail:
    """Digits beyond ``last`` summed asymptotically into ``source``."""

    z: np.ndarray
    last: int
    source: str
    taylor: np.ndarray  # (orders, K) Taylor rows of the source grid at the accumulation point


@dataclass
class _Excursion:
    """Parabolic excursions of branch ``i`` evaluated at the nodes of ``A_i``."""

    parabolic: int
    z: np.ndarray
    rows: np.ndarray  # (m, N, K_D) rows of the Δ_i grid at T_i^{n-1} z
    phi_sum: np.ndarray  # (m, N) Σ_{k=1}^{n-1} φ(T_i^k z)
    log_dt: np.ndarray  # (m, N) log|(T_i^{n-1})'(z)|
    steps: np.ndarray  # (N,) n = 1..N
    taylor: np.ndarray  # (orders, K_D) Taylor rows of the Δ_i grid at x_i
    tail_available: bool


class OperatorGeometry:
    """All parameter-independent data of the collocation scheme.

    ``digits=None`` selects the full alphabet with asymptotic digit tails;
    otherwise the finite digit set is summed exactly.  The induced scheme is
    used whenever parabolic digits are present, unless ``mode="plain"``.
    """

    def __init__(
        self,
        model: MapModel,
        phi: Potential,
        digits: Optional[Sequence[int]] = None,
        truncation: Truncation = Truncation(),
        mode: str = "auto",
    ) -> None:
        self.model = model
        self.phi = phi
        self.truncation = truncation
        self.full = digits is None
        K = truncation.nodes
        if self.full:
            if model.parabolic_set and max(model.parabolic_set) > truncation.j_max:
                raise ValueError("j_max must cover every parabolic index")
            alphabet = np.arange(1, truncation.j_max + 1)
        else:
            alphabet = np.array(sorted({int(d) for d in digits}), dtype=np.int64)
            if alphabet.size == 0 or alphabet[0] < 1:
                raise ValueError("digit set must be a nonempty set of positive integers")
        self.alphabet = alphabet
        self.parabolic = tuple(int(d) for d in alphabet if model.is_parabolic(int(d)))
        self.hyperbolic = np.array([d for d in alphabet if not model.is_parabolic(int(d))], dtype=np.int64)
        self.digit_tail = self.full and truncation.tails
        if mode not in ("auto", "plain", "induced"):
            raise ValueError(f"unknown mode {mode!r}")
        self.induced = bool(self.parabolic) and mode != "plain"
        if mode == "induced" and not self.parabolic:
            raise ValueError("the induced scheme needs a parabolic digit")

        self.grids: "OrderedDict[str, ChebyshevGrid]" = OrderedDict()
        if self.induced:
            lo, hi = hyperbolic_piece_interval(model)
            self.grids[HYPERBOLIC_PIECE] = ChebyshevGrid(lo, hi, K)
            for i in self.parabolic:
                a, b = parabolic_piece_interval(model, i)
                self.grids[parabolic_piece(i)] = ChebyshevGrid(a, b, K)
        else:
            self.grids["X"] = ChebyshevGrid(0.0, 1.0, K)
        self.slices: dict[str, slice] = {}
        start = 0
        for name, grid in self.grids.items():
            self.slices[name] = slice(start, start + grid.size)
            start += grid.size
        self.size = start

        # auxiliary grids on closure(Δ_i) for the inner sums M_i
        self.inner_grids: dict[int, ChebyshevGrid] = {}
        for i in self.parabolic if self.induced else ():
            lo, hi = (float(v) for v in model.domain_interval(i))
            self.inner_grids[i] = ChebyshevGrid(lo, hi, K)

        self._build()

    # -- construction --------------------------------------------------------
    def _source_piece(self, d: int) -> str:
        if not self.induced:
            return "X"
        return parabolic_piece(d) if self.model.is_parabolic(d) else HYPERBOLIC_PIECE

    def _digit_block(self, z: np.ndarray, digits: np.ndarray, source: str) -> _DigitBlock:
        grid = self.grids[source]
        d = digits.astype(float)[None, :]
        zz = z[:, None]
        x = self.model.inverse(d, zz)
        x = np.broadcast_to(x, (z.size, digits.size))
        log_dt = np.broadcast_to(self.model.log_inverse_derivative(d, zz), x.shape)
        phi = np.broadcast_to(self.phi.branch_value(d, x), x.shape)
        rows = grid.interpolation_rows(x)
        return _DigitBlock(z, digits, source, rows, np.array(phi), np.array(log_dt))

    def _digit_tail(self, z: np.ndarray, last: int, source: str) -> _DigitTail:
        grid = self.grids[source]
        return _DigitTail(z, last, source, grid.taylor_rows(self.model.accumulation_point, TAYLOR_ORDERS))

    def _excursion(self, i: int) -> _Excursion:
        grid_a = self.grids[parabolic_piece(i)]
        inner = self.inner_grids[i]
        N = self.truncation.n_max
        z = grid_a.nodes
        y = z.copy()
        phi_acc = np.zeros_like(z)
        log_acc = np.zeros_like(z)
        ys = np.empty((z.size, N))
        phis = np.empty((z.size, N))
        logs = np.empty((z.size, N))
        iterate = self.model.parabolic_iterate
        for n in range(1, N + 1):
            ys[:, n - 1] = y
            phis[:, n - 1] = phi_acc
            logs[:, n - 1] = log_acc
            log_acc = log_acc + self.model.log_inverse_derivative(i, y)
            y = self.model.inverse(i, y)
            phi_acc = phi_acc + self.phi.branch_value(i, y)
        if iterate is not None:
            # closed-form iterates are more accurate for long excursions
            n = np.arange(1, N + 1, dtype=float)[None, :]
            ys, logs = iterate(i, n - 1.0, z[:, None])
            exact_phi = self.phi.parabolic_sum(i, n, z[:, None])
            if exact_phi is not None:
                phis = np.broadcast_to(exact_phi, ys.shape).copy()
        tail_ok = iterate is not None and self.phi.parabolic_sum_fn is not None
        return _Excursion(
            parabolic=i,
            z=z,
            rows=inner.interpolation_rows(ys),
            phi_sum=phis,
            log_dt=logs,
            steps=np.arange(1, N + 1, dtype=float),
            taylor=inner.taylor_rows(self.model.fixed_point(i), TAYLOR_ORDERS),
            tail_available=tail_ok,
        )

    def _blocks_for(self, z: np.ndarray, digits: np.ndarray) -> list[_DigitBlock]:
        blocks = []
        by_source: dict[str, list[int]] = {}
        for d in digits:
            by_source.setdefault(self._source_piece(int(d)), []).append(int(d))
        for source, ds in by_source.items():
            ds = np.array(ds, dtype=np.int64)
            for start in range(0, ds.size, _DIGIT_CHUNK):
                blocks.append(self._digit_block(z, ds[start : start + _DIGIT_CHUNK], source))
        return blocks

    def _build(self) -> None:
        tail_last = int(self.alphabet[-1])
        if self.induced:
            z_b = self.grids[HYPERBOLIC_PIECE].nodes
            # rows of B: every digit i maps B into its own piece
            row_digits = np.concatenate([self.hyperbolic, np.array(self.parabolic, dtype=np.int64)])
            self.row_blocks = {HYPERBOLIC_PIECE: self._blocks_for(z_b, row_digits)}
            self.row_tails = {HYPERBOLIC_PIECE: [self._digit_tail(z_b, tail_last, HYPERBOLIC_PIECE)] if self.digit_tail else []}
            self.inner_blocks: dict[int, list[_DigitBlock]] = {}
            self.inner_tails: dict[int, list[_DigitTail]] = {}
            self.excursions: dict[int, _Excursion] = {}
            for i in self.parabolic:
                y = self.inner_grids[i].nodes
                inner_digits = np.array([d for d in row_digits if d != i], dtype=np.int64)
                self.inner_blocks[i] = self._blocks_for(y, inner_digits)
                self.inner_tails[i] = [self._digit_tail(y, tail_last, HYPERBOLIC_PIECE)] if self.digit_tail else []
                self.excursions[i] = self._excursion(i)
        else:
            z = self.grids["X"].nodes
            self.row_blocks = {"X": self._blocks_for(z, self.alphabet)}
            self.row_tails = {"X": [self._digit_tail(z, tail_last, "X")] if self.digit_tail else []}

    # -- parameterised operator ---------------------------------------------
    def at(self, b: float, q: float) -> "WeightedOperator":
        return WeightedOperator(self, float(b), float(q))

    def n_tail_available(self) -> bool:
        return all(e.tail_available for e in getattr(self, "excursions", {}).values())


def _split_divergent(sums: dict[str, list], message: str) -> tuple[dict[str, np.ndarray], set]:
    out = {key: np.array(v) for key, v in sums.items()}
    if not np.all(np.isfinite(out["base"])):
        raise InfinitePressureError(message)
    divergent = {key for key, v in out.items() if not np.all(np.isfinite(v))}
    for key in divergent:
        out[key] = np.zeros_like(out["base"])
    return out, divergent


# --------------------------------------------------------------------------
# weighted matrices
# --------------------------------------------------------------------------

_OBSERVABLES = ("base", "phi", "lam", "tail")


def _zero_set(m: int, n: int) -> dict[str, np.ndarray]:
    return {k: np.zeros((m, n)) for k in _OBSERVABLES}


class WeightedOperator:
    """Operator at fixed ``(b, q)``; the return-time weight ``e^{-s r}`` is applied in :meth:`spectral`."""

    def __init__(self, geometry: OperatorGeometry, b: float, q: float) -> None:
        self.geometry = geometry
        self.b = b
        self.q = q
        g = geometry
        if g.induced:
            self.row_sets = {HYPERBOLIC_PIECE: self._row_set(g.row_blocks[HYPERBOLIC_PIECE], g.row_tails[HYPERBOLIC_PIECE], g.grids[HYPERBOLIC_PIECE].size)}
            self.inner_sets = {i: self._row_set(g.inner_blocks[i], g.inner_tails[i], g.inner_grids[i].size) for i in g.parabolic}
        else:
            self.row_sets = {"X": self._row_set(g.row_blocks["X"], g.row_tails["X"], g.grids["X"].size)}
        self.row_divergent = frozenset().union(*(rs.pop("divergent") for rs in self.row_sets.values()))
        if g.induced:
            self.row_divergent |= frozenset().union(*(rs.pop("divergent") for rs in self.inner_sets.values()))

    # -- digit sums ------------------------------------------------------------
    def _row_set(self, blocks: list[_DigitBlock], tails: list[_DigitTail], m: int) -> dict[str, np.ndarray]:
        """Matrices (rows: points, columns: all nodes) for base, φ-weighted, λ-weighted and tail-only sums."""
        g = self.geometry
        out = _zero_set(m, g.size)
        divergent = set()
        with np.errstate(over="ignore", invalid="ignore"):
            for blk in blocks:
                w = np.exp(-self.q * blk.phi + self.b * blk.log_dt)
                cols = g.slices[blk.source]
                out["base"][:, cols] += np.einsum("mn,mnk->mk", w, blk.rows)
                out["phi"][:, cols] += np.einsum("mn,mnk->mk", w * blk.phi, blk.rows)
                out["lam"][:, cols] += np.einsum("mn,mnk->mk", w * -blk.log_dt, blk.rows)
        # weights beyond the float range count as divergence
        if not np.all(np.isfinite(out["base"])):
            raise InfinitePressureError(f"digit weights overflow at b={self.b:g}, q={self.q:g}")
        for key in ("phi", "lam"):
            if not np.all(np.isfinite(out[key])):
                divergent.add(key)
                out[key][:] = 0.0
        for tail in tails:
            sums, bad = self._digit_tail_sums(tail)
            divergent |= bad
            cols = g.slices[tail.source]
            for key, s in sums.items():
                mat = s.T @ tail.taylor  # (m, orders) @ (orders, K)
                out[key][:, cols] += mat
                if key == "base":
                    out["tail"][:, cols] += mat
        out["divergent"] = frozenset(divergent)
        return out

    def _digit_tail_sums(self, tail: _DigitTail) -> tuple[dict[str, np.ndarray], set]:
        """Arrays ``(orders, m)`` of ``Σ_{t > last} w_t(z) (T_t z - acc)^k`` and weighted variants.

        Also returns the weighted variants whose sums diverge although the
        base sum converges; those are dropped from the result.
        """
        model, phi = self.geometry.model, self.geometry.phi
        acc = model.accumulation_point
        z = tail.z[:, None]
        sample = model.inverse(float(tail.last + 1), tail.z) - acc
        sign = np.sign(sample)
        b, q = self.b, self.q

        def parts(t):
            x = model.inverse(t, z)
            return x, model.log_inverse_derivative(t, z)

        def log_term(k):
            def f(t):
                x, ldt = parts(t)
                with np.errstate(divide="ignore"):
                    return -q * phi.branch_value(t, x) + b * ldt + k * np.log(np.abs(x - acc))

            return f

        phi_mult = lambda t: phi.branch_value(t, parts(t)[0])
        lam_mult = lambda t: -parts(t)[1]
        res = {"base": [], "phi": [], "lam": []}
        for k in range(TAYLOR_ORDERS):
            lt = log_term(k)
            sk = sign**k
            res["base"].append(sk * tail_sum(lt, tail.last))
            res["phi"].append(sk * tail_sum(lt, tail.last, phi_mult))
            res["lam"].append(sk * tail_sum(lt, tail.last, lam_mult))
        return _split_divergent(res, f"digit tail diverges at b={b:g}, q={q:g}")

    # -- parabolic excursion sums -------------------------------------------
    def _excursion_set(self, exc: _Excursion, s: float) -> tuple[dict[str, np.ndarray], set]:
        """Matrices ``R`` (rows: nodes of ``A_i``, columns: nodes of the Δ_i grid)."""
        b, q = self.b, self.q
        logw = -s * exc.steps[None, :] - q * exc.phi_sum + b * exc.log_dt
        w = np.exp(logw)
        out = {
            "base": np.einsum("mn,mnk->mk", w, exc.rows),
            "phi": np.einsum("mn,mnk->mk", w * exc.phi_sum, exc.rows),
            "lam": np.einsum("mn,mnk->mk", w * -exc.log_dt, exc.rows),
            "r": np.einsum("mn,mnk->mk", w * exc.steps[None, :], exc.rows),
        }
        out["tail"] = np.zeros_like(out["base"])
        divergent: set = set()
        if self.geometry.truncation.tails and exc.tail_available:
            sums, divergent = self._excursion_tail_sums(exc, s)
            for key, val in sums.items():
                mat = val.T @ exc.taylor
                out[key] = out[key] + mat
                if key == "base":
                    out["tail"] = mat
        return out, divergent

    def _excursion_tail_sums(self, exc: _Excursion, s: float) -> tuple[dict[str, np.ndarray], set]:
        model, phi = self.geometry.model, self.geometry.phi
        i = exc.parabolic
        x0 = model.fixed_point(i)
        z = exc.z[:, None]
        b, q = self.b, self.q
        last = int(exc.steps[-1])
        probe, _ = model.parabolic_iterate(i, float(last), exc.z)
        sign = np.sign(probe - x0)

        def parts(t):
            y, ldt = model.parabolic_iterate(i, t - 1.0, z)
            return y, ldt, phi.parabolic_sum(i, t, z)

        def log_term(k):
            def f(t):
                y, ldt, ps = parts(t)
                with np.errstate(divide="ignore"):
                    return -s * t - q * ps + b * ldt + k * np.log(np.abs(y - x0))

            return f

        mults = {
            "phi": lambda t: parts(t)[2],
            "lam": lambda t: -parts(t)[1],
            "r": lambda t: t + 0.0 * z,
        }
        res = {"base": [], "phi": [], "lam": [], "r": []}
        for k in range(TAYLOR_ORDERS):
            lt = log_term(k)
            sk = sign**k
            res["base"].append(sk * tail_sum(lt, last))
            for key, mult in mults.items():
                res[key].append(sk * tail_sum(lt, last, mult))
        return _split_divergent(res, f"excursion tail diverges at b={b:g}, q={q:g}, s={s:g}")

    # -- assembly ----------------------------------------------------------------
    def matrices(self, s: float) -> tuple[dict[str, np.ndarray], frozenset]:
        """Collocation matrices ``base``, ``phi``, ``lam``, ``r`` and ``tail`` at return-time parameter ``s``.

        The second value names the weighted matrices whose tail sums diverge.
        """
        g = self.geometry
        divergent = set(self.row_divergent)
        mats = {k: np.zeros((g.size, g.size)) for k in ("base", "phi", "lam", "r", "tail")}
        es = np.exp(-s)
        if not g.induced:
            rs = self.row_sets["X"]
            for key in ("base", "phi", "lam", "tail"):
                mats[key][:] = es * rs[key]
            mats["r"][:] = mats["base"]
            return mats, frozenset(divergent)
        rows_b = g.slices[HYPERBOLIC_PIECE]
        rs = self.row_sets[HYPERBOLIC_PIECE]
        for key in ("base", "phi", "lam", "tail"):
            mats[key][rows_b] = es * rs[key]
        mats["r"][rows_b] = es * rs["base"]
        for i in g.parabolic:
            rows_a = g.slices[parabolic_piece(i)]
            inner = self.inner_sets[i]
            ex, bad = self._excursion_set(g.excursions[i], s)
            divergent |= bad
            mats["base"][rows_a] = ex["base"] @ inner["base"]
            mats["phi"][rows_a] = ex["phi"] @ inner["base"] + ex["base"] @ inner["phi"]
            mats["lam"][rows_a] = ex["lam"] @ inner["base"] + ex["base"] @ inner["lam"]
            mats["r"][rows_a] = ex["r"] @ inner["base"]
            mats["tail"][rows_a] = ex["tail"] @ inner["base"] + (ex["base"] - ex["tail"]) @ inner["tail"]
        if "base" in divergent:
            raise InfinitePressureError(f"operator diverges at b={self.b:g}, q={self.q:g}, s={s:g}")
        return mats, frozenset(divergent)

    def spectral(self, s: float = 0.0) -> "SpectralData":
        with np.errstate(over="ignore", invalid="ignore"):
            mats, divergent = self.matrices(s)
        if not np.all(np.isfinite(mats["base"])):
            raise InfinitePressureError(f"operator overflows at b={self.b:g}, q={self.q:g}, s={s:g}")
        for key in set(mats) - {"base"} - set(divergent):
            if not np.all(np.isfinite(mats[key])):
                divergent = divergent | {key}
                mats[key] = np.zeros_like(mats["base"])
        return SpectralData.from_matrices(self, s, mats, divergent)


def dominant_pair(mat: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Leading eigenvalue with its right and left eigenvectors, both normalised positive."""
    vals, right = np.linalg.eig(mat)
    k = int(np.argmax(vals.real))
    rho = vals[k]
    if abs(rho.imag) > 1e-9 * max(1.0, abs(rho.real)) or rho.real <= 0:
        raise SpectralError(f"dominant eigenvalue {rho} is not positive real")
    lvals, left = np.linalg.eig(mat.T)
    kl = int(np.argmin(np.abs(lvals - rho)))
    u = right[:, k].real
    v = left[:, kl].real
    u = u / (np.sum(u) if np.sum(u) != 0 else 1.0)
    v = v / (np.sum(v) if np.sum(v) != 0 else 1.0)
    return float(rho.real), u, v


@dataclass
class SpectralData:
    """Dominant eigen-triple of the collocation matrix and derived integrals.

    ``mean(key)`` returns ``μ̃(χ)`` for the induced observable selected by
    ``key``: ``"phi"`` (induced potential), ``"lam"`` (induced log-derivative),
    ``"r"`` (return time) or ``"tail"`` (indicator of truncated symbols).
    """

    operator: WeightedOperator
    s: float
    rho: float
    u: np.ndarray
    v: np.ndarray
    mats: dict[str, np.ndarray] = field(repr=False)
    divergent: frozenset = frozenset()

    @classmethod
    def from_matrices(cls, op: WeightedOperator, s: float, mats: dict[str, np.ndarray], divergent=frozenset()) -> "SpectralData":
        rho, u, v = dominant_pair(mats["base"])
        return cls(op, s, rho, u, v, mats, frozenset(divergent))

    @property
    def log_rho(self) -> float:
        return float(np.log(self.rho))

    @property
    def geometry(self) -> OperatorGeometry:
        return self.operator.geometry

    def mean(self, key: str) -> float:
        """``μ̃(χ)``; ``inf`` when the weighted tail sum diverges."""
        if key in self.divergent:
            return float("inf")
        mat = self.mats[key]
        return float(self.v @ mat @ self.u / (self.rho * (self.v @ self.u)))

    def piece_mass(self, piece: str) -> float:
        sl = self.geometry.slices[piece]
        return float(self.v[sl] @ self.u[sl] / (self.v @ self.u))

    def density(self, piece: str, x) -> np.ndarray:
        """Eigenfunction ``u`` (normalised by ``ν(u) = 1``) interpolated on ``piece``."""
        grid = self.geometry.grids[piece]
        sl = self.geometry.slices[piece]
        return grid.interpolation_rows(np.asarray(x, dtype=float)) @ (self.u[sl] / (self.v @ self.u))

    def conformal(self, piece: str) -> np.ndarray:
        """Node weights of the conformal functional restricted to ``piece``."""
        return self.v[self.geometry.slices[piece]]

    @property
    def entropy_induced(self) -> float:
        """Induced entropy ``log ρ - μ̃(ψ̃)`` of the equilibrium state."""
        op = self.operator
        return self.log_rho + op.q * self.mean("phi") + op.b * self.mean("lam") + self.s * self.mean("r")


# --------------------------------------------------------------------------
# geometry cache
# --------------------------------------------------------------------------

_CACHE: "OrderedDict[tuple, OperatorGeometry]" = OrderedDict()
_CACHE_SIZE = 24


def geometry_for(
    model: MapModel,
    phi: Potential,
    digits: Optional[Sequence[int]] = None,
    truncation: Truncation = Truncation(),
    mode: str = "auto",
) -> OperatorGeometry:
    """Cached :class:`OperatorGeometry` (keyed by object identity of model and potential)."""
    key_digits = None if digits is None else tuple(sorted({int(d) for d in digits}))
    trunc_key = (truncation.j_max, truncation.n_max, truncation.nodes, truncation.tails)
    key = (id(model), id(phi), key_digits, trunc_key, mode)
    hit = _CACHE.get(key)
    if hit is not None and hit.model is model and hit.phi is phi:
        _CACHE.move_to_end(key)
        return hit
    geom = OperatorGeometry(model, phi, digits, truncation, mode)
    _CACHE[key] = geom
    while len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return geom
