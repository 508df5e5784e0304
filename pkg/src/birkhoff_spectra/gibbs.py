"""Gibbs measures of the induced system as stationary Markov chains.

The equilibrium measure ``μ̃`` of the induced potential is recovered from the
collocated operator: with right eigenfunction ``u`` and conformal functional
``ν`` (the left eigenvector),

    μ̃[ω]    = ν(W_ω · u∘T_ω) / ρ,
    μ̃[ω ω'] = ν(W_ω' · W_ω∘T_ω' · u∘T_ω∘T_ω') / ρ²,

where ``W_ω = exp(ψ̃∘T_ω)`` is the branch weight.  The chain keeps these
symbol masses exactly and moves between symbols through the pieces of the
induced domain: after a symbol landing in piece ``P`` the next symbol is drawn
from the symbols starting in ``P`` in proportion to their masses.  Symbols
beyond the truncation are collected into tail lumps that emit concrete
symbols from fitted asymptotic laws.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .induced import InducedSymbol, parabolic_piece
from .map_model import MapModel, Potential
from .pressure import EquilibriumObservables, lower_bound, observables_from_spectral
from .transfer import InfinitePressureError, SpectralData, Truncation, geometry_for

log = logging.getLogger(__name__)

_CHUNK = 250_000


class ReducibleChainError(RuntimeError):
    """The truncated induced incidence is not irreducible."""


# --------------------------------------------------------------------------
# branch evaluation
# --------------------------------------------------------------------------


def _run_orbit(model: MapModel, phi: Potential, i: int, n, z):
    """``T_i^{n-1} z`` with ``log|(T_i^{n-1})'(z)|`` and ``Σ_{m=1}^{n-1} φ(T_i^m z)`` (broadcasting)."""
    n = np.asarray(n, dtype=float)
    z = np.asarray(z, dtype=float)
    if model.parabolic_iterate is not None and phi.parabolic_sum_fn is not None:
        y, ldt = model.parabolic_iterate(i, n - 1.0, z)
        return y, ldt, np.broadcast_to(phi.parabolic_sum(i, n, z), np.broadcast(y, n).shape)
    shape = np.broadcast(n, z).shape
    y = np.broadcast_to(z, shape).copy()
    ldt = np.zeros(shape)
    psum = np.zeros(shape)
    steps = np.broadcast_to(n, shape)
    for m in range(1, int(steps.max())):
        live = steps > m
        ldt = np.where(live, ldt + model.log_inverse_derivative(i, y), ldt)
        y_next = model.inverse(i, y)
        y = np.where(live, y_next, y)
        psum = np.where(live, psum + phi.branch_value(i, y), psum)
    return y, ldt, psum


@dataclass(frozen=True)
class _Branches:
    """Images ``T_ω z`` and induced sums for a family of symbols."""

    x: np.ndarray
    phi_sum: np.ndarray
    lam_sum: np.ndarray  # -log|T_ω'(z)|, i.e. the induced log-derivative at T_ω z
    steps: np.ndarray

    def log_weight(self, b: float, q: float, s: float) -> np.ndarray:
        return -s * self.steps - q * self.phi_sum - b * self.lam_sum


def _hyp_branches(model: MapModel, phi: Potential, d, z) -> _Branches:
    d = np.asarray(d, dtype=float)
    x = model.inverse(d, z)
    ldt = model.log_inverse_derivative(d, z)
    shape = np.broadcast(x, ldt).shape
    return _Branches(
        np.broadcast_to(x, shape),
        np.broadcast_to(phi.branch_value(d, x), shape),
        np.broadcast_to(-ldt, shape),
        np.ones(shape),
    )


def _run_branches(model: MapModel, phi: Potential, j, i: int, n, z) -> _Branches:
    j = np.asarray(j, dtype=float)
    y, ldt_run, psum = _run_orbit(model, phi, i, n, z)
    x = model.inverse(j, y)
    ldt = ldt_run + model.log_inverse_derivative(j, y)
    shape = np.broadcast(x, ldt, np.asarray(n)).shape
    return _Branches(
        np.broadcast_to(x, shape),
        np.broadcast_to(psum + phi.branch_value(j, x), shape),
        np.broadcast_to(-ldt, shape),
        np.broadcast_to(np.asarray(n, dtype=float), shape),
    )


# --------------------------------------------------------------------------
# tail lumps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TailLaw:
    """Continuous law with density ``∝ t^{-decay} e^{-rate t}`` on ``(start, ∞)``, sampled by inverse CDF."""

    start: float
    decay: float
    rate: float = 0.0

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        t = self.start * np.geomspace(1.0, 1e12, 4001)
        log_density = -self.decay * np.log(t) - self.rate * t
        weights = np.exp(log_density - log_density[0]) * t  # density in log t
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (weights[1:] + weights[:-1]) * np.diff(np.log(t)))])
        cdf /= cdf[-1]
        draws = np.exp(np.interp(rng.random(count), cdf, np.log(t)))
        return np.maximum(np.floor(draws + 0.5), math.ceil(self.start)).astype(np.int64)

    @classmethod
    def fit(cls, start: float, points: Sequence[float], masses: Sequence[float]) -> "TailLaw":
        """Fit ``log m = a - decay·log t - rate·t`` through two or three marginal masses."""
        t = np.asarray(points, dtype=float)
        m = np.log(np.maximum(np.asarray(masses, dtype=float), 1e-300))
        if t.size >= 3:
            design = np.column_stack([np.ones_like(t), -np.log(t), -t])
            coef = np.linalg.lstsq(design, m, rcond=None)[0]
            decay, rate = float(coef[1]), float(coef[2])
            if rate < 0:
                rate = 0.0
                decay = float(-(m[-1] - m[0]) / (np.log(t[-1]) - np.log(t[0])))
        else:
            decay = float(-(m[-1] - m[0]) / (np.log(t[-1]) - np.log(t[0])))
            rate = 0.0
        if rate == 0.0 and decay <= 1.0:
            decay = 1.0 + 1e-3
        return cls(start, decay, rate)


@dataclass(frozen=True)
class TailLump:
    """Mass of the symbols beyond the truncation that land in ``target``.

    ``digit_law`` draws first digits above ``j_max``; ``run_law`` draws return
    times above ``n_max``.  The other coordinate of a drawn symbol comes from
    the explicit conditional distribution at the truncation edge.
    """

    label: str
    mass: float
    source: int
    target: int
    parabolic: int  # 0 for the hyperbolic-target lump
    digit_share: float
    digit_law: Optional[TailLaw]
    run_law: Optional[TailLaw]
    edge_digits: np.ndarray
    edge_digit_probs: np.ndarray
    edge_steps: np.ndarray
    edge_step_probs: np.ndarray

    def draw(self, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
        """``count`` concrete symbols as (first digit, steps)."""
        if self.parabolic == 0:
            return self.digit_law.sample(rng, count), np.ones(count, dtype=np.int64)
        use_digit = rng.random(count) < self.digit_share
        first = np.empty(count, dtype=np.int64)
        steps = np.empty(count, dtype=np.int64)
        k = int(use_digit.sum())
        if k:
            first[use_digit] = self.digit_law.sample(rng, k)
            steps[use_digit] = rng.choice(self.edge_steps, size=k, p=self.edge_step_probs)
        if count - k:
            steps[~use_digit] = self.run_law.sample(rng, count - k)
            first[~use_digit] = rng.choice(self.edge_digits, size=count - k, p=self.edge_digit_probs)
        return first, steps


# --------------------------------------------------------------------------
# the chain
# --------------------------------------------------------------------------


@dataclass
class GibbsChain:
    """Stationary Markov chain over a truncated induced alphabet.

    Explicit symbols are stored column-wise: ``first``, ``parabolic`` (0 for
    ``Hyp``), ``steps`` (return time), ``source``/``target`` piece indices and
    equilibrium ``mass``.  States beyond the explicit symbols are
    :class:`TailLump` entries.  ``stationary`` holds the stationary
    distribution of the chain over explicit symbols followed by lumps.
    """

    model: MapModel
    phi: Potential
    b: float
    q: float
    s: float
    truncation: Truncation
    spectral: SpectralData
    pieces: tuple[str, ...]
    first: np.ndarray
    parabolic: np.ndarray
    steps: np.ndarray
    source: np.ndarray
    target: np.ndarray
    mass: np.ndarray
    sup_log_weight: np.ndarray
    inf_log_weight: np.ndarray
    lumps: list[TailLump]
    stationary: np.ndarray
    gibbs_constant: float
    diagnostics: dict = field(default_factory=dict)

    # -- basic structure -------------------------------------------------------
    @property
    def size(self) -> int:
        return self.first.size + len(self.lumps)

    @property
    def explicit_count(self) -> int:
        return self.first.size

    @property
    def pressure(self) -> float:
        """Induced pressure ``𝒫(b, q, s) = log ρ``."""
        return self.spectral.log_rho

    def symbol(self, k: int) -> InducedSymbol:
        if self.parabolic[k] == 0:
            return InducedSymbol.hyp(int(self.first[k]))
        return InducedSymbol.para(int(self.first[k]), int(self.parabolic[k]), int(self.steps[k]))

    def labels(self) -> list[str]:
        return [self.symbol(k).label for k in range(self.explicit_count)] + [lump.label for lump in self.lumps]

    def state_sources(self) -> np.ndarray:
        return np.concatenate([self.source, [lump.source for lump in self.lumps]]).astype(int)

    def state_targets(self) -> np.ndarray:
        return np.concatenate([self.target, [lump.target for lump in self.lumps]]).astype(int)

    def state_masses(self) -> np.ndarray:
        return np.concatenate([self.mass, [lump.mass for lump in self.lumps]])

    def _conditional(self) -> list[np.ndarray]:
        """Per piece, the distribution of the next state among states starting there."""
        masses, sources = self.state_masses(), self.state_sources()
        out = []
        for p in range(len(self.pieces)):
            w = np.where(sources == p, masses, 0.0)
            total = w.sum()
            out.append(w / total if total > 0 else w)
        return out

    def transition_matrix(self, max_states: int = 5000) -> np.ndarray:
        """Dense row-stochastic transition matrix (for small truncations)."""
        if self.size > max_states:
            raise ValueError(f"{self.size} states exceed max_states={max_states}")
        cond = self._conditional()
        return np.stack([cond[t] for t in self.state_targets()])

    # -- averages --------------------------------------------------------------
    @property
    def mean_return(self) -> float:
        """``μ̃(r)`` including the asymptotic tails (``inf`` when it diverges)."""
        return self.spectral.mean("r")

    @property
    def truncated_mean_return(self) -> float:
        """Mass-weighted return time over the explicit symbols only."""
        return float(np.sum(self.mass * self.steps) / np.sum(self.mass))

    @property
    def lump_mass(self) -> float:
        return float(sum(lump.mass for lump in self.lumps))

    def entropy_rate(self) -> float:
        """Entropy rate of the chain itself (lumps count as single states).

        The chain forgets everything except the current piece, so this rate
        overestimates the equilibrium entropy; it is a diagnostic only.
        """
        cond = self._conditional()
        piece_weight = np.zeros(len(self.pieces))
        np.add.at(piece_weight, self.state_targets(), self.stationary)
        rate = 0.0
        for p, probs in enumerate(cond):
            nz = probs[probs > 0]
            rate -= piece_weight[p] * float(np.sum(nz * np.log(nz)))
        return rate

    # -- cylinder masses -------------------------------------------------------
    def _branches(self, k: np.ndarray, z: np.ndarray) -> _Branches:
        """Branch data of explicit symbols ``k`` at points ``z`` (same trailing shape)."""
        k = np.asarray(k)
        first = self.first[k].astype(float)
        par = self.parabolic[k]
        n = self.steps[k].astype(float)
        hyp = _hyp_branches(self.model, self.phi, first, z)
        if not np.any(par):
            return hyp
        x, ps, ls, st = (np.array(a) for a in (hyp.x, hyp.phi_sum, hyp.lam_sum, hyp.steps))
        for i in np.unique(par[par > 0]):
            sel = np.broadcast_to(par == i, x.shape)
            run = _run_branches(self.model, self.phi, first, int(i), n, z)
            x = np.where(sel, run.x, x)
            ps = np.where(sel, run.phi_sum, ps)
            ls = np.where(sel, run.lam_sum, ls)
            st = np.where(sel, run.steps, st)
        return _Branches(x, ps, ls, st)

    def _density(self, piece: np.ndarray, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape)
        for p, name in enumerate(self.pieces):
            sel = piece == p
            if np.any(sel):
                out[sel] = _interpolate(self.spectral, name, x[sel])
        return out

    def _functional(self, piece: int) -> tuple[np.ndarray, np.ndarray]:
        name = self.pieces[piece]
        grid = self.spectral.geometry.grids[name]
        sd = self.spectral
        return grid.nodes, sd.conformal(name)

    def cylinder_masses(self, words: np.ndarray) -> np.ndarray:
        """``μ̃`` of depth-1 (shape ``(m,)``) or depth-2 (shape ``(m, 2)``) explicit cylinders."""
        words = np.asarray(words, dtype=np.int64)
        if words.ndim == 1:
            words = words[:, None]
        rho = self.spectral.rho
        out = np.empty(words.shape[0])
        last = words[:, -1]
        for p in range(len(self.pieces)):
            rows = np.nonzero(self.target[last] == p)[0]
            if rows.size == 0:
                continue
            nodes, weights = self._functional(p)
            z = np.broadcast_to(nodes[:, None], (nodes.size, rows.size))
            log_w = np.zeros(z.shape)
            point = z
            for depth in range(words.shape[1] - 1, -1, -1):
                k = words[rows, depth]
                if depth < words.shape[1] - 1:
                    follow = words[rows, depth + 1]
                    if np.any(self.source[follow] != self.target[k]):
                        raise ValueError("inadmissible word")
                br = self._branches(k, point)
                log_w = log_w + br.log_weight(self.b, self.q, self.s)
                point = br.x
            src = np.broadcast_to(self.source[words[rows, 0]], point.shape)
            dens = self._density(src, point)
            out[rows] = weights @ (np.exp(log_w) * dens) / rho ** words.shape[1]
        return out

    def birkhoff_sup(self, words: np.ndarray) -> np.ndarray:
        """Sup over each cylinder of the induced Birkhoff sum ``S_n ψ̃`` (endpoints and midpoint)."""
        words = np.asarray(words, dtype=np.int64)
        if words.ndim == 1:
            words = words[:, None]
        out = np.empty(words.shape[0])
        last = words[:, -1]
        geom = self.spectral.geometry
        for p, name in enumerate(self.pieces):
            rows = np.nonzero(self.target[last] == p)[0]
            if rows.size == 0:
                continue
            grid = geom.grids[name]
            pts = np.array([grid.lo, 0.5 * (grid.lo + grid.hi), grid.hi])
            point = np.broadcast_to(pts[:, None], (3, rows.size))
            total = np.zeros(point.shape)
            for depth in range(words.shape[1] - 1, -1, -1):
                br = self._branches(words[rows, depth], point)
                total = total + br.log_weight(self.b, self.q, self.s)
                point = br.x
            out[rows] = total.max(axis=0)
        return out

    def gibbs_ratios(self, words: np.ndarray) -> np.ndarray:
        """``μ̃[ω] / exp(sup S_n ψ̃ - n·𝒫)`` for explicit words of length ``n``."""
        words = np.asarray(words, dtype=np.int64)
        depth = 1 if words.ndim == 1 else words.shape[1]
        return self.cylinder_masses(words) / np.exp(self.birkhoff_sup(words) - depth * self.pressure)

    def random_words(self, rng: np.random.Generator, count: int, depth: int = 2) -> np.ndarray:
        """Admissible explicit words drawn uniformly symbol by symbol."""
        words = np.empty((count, depth), dtype=np.int64)
        words[:, 0] = rng.integers(0, self.explicit_count, size=count)
        by_source = [np.nonzero(self.source == p)[0] for p in range(len(self.pieces))]
        for d in range(1, depth):
            for m in range(count):
                options = by_source[self.target[words[m, d - 1]]]
                words[m, d] = options[rng.integers(0, options.size)]
        return words

    # -- sampling --------------------------------------------------------------
    def sample_symbols(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stationary-start path of ``count`` induced symbols as (first, parabolic, steps) arrays."""
        first = np.empty(count, dtype=np.int64)
        par = np.empty(count, dtype=np.int64)
        steps = np.empty(count, dtype=np.int64)
        if count == 0:
            return first, par, steps
        cond = self._conditional()
        targets = self.state_targets()
        n_exp = self.explicit_count
        start = int(rng.choice(self.size, p=self.stationary))
        # pre-draw per-piece successor queues and consume them along the path
        queues = [rng.choice(self.size, size=count, p=c) if c.sum() > 0 else np.empty(0, int) for c in cond]
        used = [0] * len(cond)
        states = np.empty(count, dtype=np.int64)
        state = start
        for m in range(count):
            states[m] = state
            p = targets[state]
            state = queues[p][used[p]]
            used[p] += 1
        explicit = states < n_exp
        first[explicit] = self.first[states[explicit]]
        par[explicit] = self.parabolic[states[explicit]]
        steps[explicit] = self.steps[states[explicit]]
        for li, lump in enumerate(self.lumps):
            sel = states == n_exp + li
            k = int(sel.sum())
            if k:
                f, n = lump.draw(rng, k)
                first[sel], steps[sel], par[sel] = f, n, lump.parabolic
        return first, par, steps


def _interpolate(sd: SpectralData, piece: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, _CHUNK):
        out[start : start + _CHUNK] = sd.density(piece, flat[start : start + _CHUNK])
    return out.reshape(x.shape)


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------


def _piece_index(pieces: Sequence[str]) -> dict[str, int]:
    return {name: k for k, name in enumerate(pieces)}


def _family_masses(sd: SpectralData, piece: str, br: _Branches, sources: np.ndarray, b, q, s) -> np.ndarray:
    """Masses of a symbol family evaluated at the nodes of ``piece`` (axis 0)."""
    weights = sd.conformal(piece)
    w = np.exp(br.log_weight(b, q, s))
    dens = np.empty(br.x.shape)
    for src in np.unique(sources):
        sel = np.broadcast_to(sources == src, br.x.shape)
        dens[sel] = _interpolate(sd, src, br.x[sel])
    return np.tensordot(weights, w * dens, axes=(0, 0)) / sd.rho


def _endpoint_range(br: _Branches, b, q, s) -> tuple[np.ndarray, np.ndarray]:
    lw = br.log_weight(b, q, s)
    return lw.max(axis=0), lw.min(axis=0)


def gibbs_chain(
    model: MapModel,
    phi: Potential,
    b: float,
    q: float,
    s: float,
    trunc: Truncation = Truncation(),
    digits: Optional[Sequence[int]] = None,
) -> GibbsChain:
    """Markov chain of the equilibrium measure of ``-qφ - b·log|f'| - s·r`` on the induced shift."""
    lb = lower_bound(model, phi, q, digits)
    if s < lb:
        raise InfinitePressureError(f"s = {s:g} is below LB(q) = {lb:g}")
    geom = geometry_for(model, phi, digits, trunc)
    sd = geom.at(b, q).spectral(s if geom.induced else 0.0)
    if not geom.induced:
        s = 0.0
    pieces = tuple(geom.grids)
    index = _piece_index(pieces)
    src_of = lambda d: np.array([index[geom._source_piece(int(v))] for v in d], dtype=np.int64)

    cols = {k: [] for k in ("first", "parabolic", "steps", "source", "target", "mass", "sup", "inf")}

    def add(first, par, steps, source, target, mass, sup, inf):
        for key, val in zip(cols, (first, par, steps, source, target, mass, sup, inf)):
            cols[key].append(np.asarray(val).ravel())

    # symbols landing in the hyperbolic piece (or the whole interval)
    row_piece = pieces[0]
    row_grid = geom.grids[row_piece]
    row_digits = geom.alphabet if not geom.induced else np.concatenate([geom.hyperbolic, np.array(geom.parabolic, dtype=np.int64)])
    sources = src_of(row_digits)
    br = _hyp_branches(model, phi, row_digits[None, :], row_grid.nodes[:, None])
    mass_hyp = _family_masses(sd, row_piece, br, np.broadcast_to(np.array(pieces)[sources], br.x.shape), b, q, s)
    ends = np.array([row_grid.lo, 0.5 * (row_grid.lo + row_grid.hi), row_grid.hi])
    sup, inf = _endpoint_range(_hyp_branches(model, phi, row_digits[None, :], ends[:, None]), b, q, s)
    n_d = row_digits.size
    add(row_digits, np.zeros(n_d), np.ones(n_d), sources, np.zeros(n_d), mass_hyp, sup, inf)

    run_marginals = {}
    if geom.induced:
        N = trunc.n_max
        n_vals = np.arange(1, N + 1, dtype=float)
        for i in geom.parabolic:
            piece = parabolic_piece(i)
            grid = geom.grids[piece]
            inner = np.array([d for d in row_digits if d != i], dtype=np.int64)
            inner_src = src_of(inner)
            masses = np.empty((N, inner.size))
            sups = np.empty((N, inner.size))
            infs = np.empty((N, inner.size))
            ends = np.array([grid.lo, 0.5 * (grid.lo + grid.hi), grid.hi])
            chunk = max(1, _CHUNK // max(1, grid.size * inner.size))
            for start in range(0, N, chunk):
                nn = n_vals[start : start + chunk]
                brr = _run_branches(model, phi, inner[None, None, :], i, nn[None, :, None], grid.nodes[:, None, None])
                srcs = np.broadcast_to(np.array(pieces)[inner_src][None, None, :], brr.x.shape)
                masses[start : start + chunk] = _family_masses(sd, piece, brr, srcs, b, q, s)
                bre = _run_branches(model, phi, inner[None, None, :], i, nn[None, :, None], ends[:, None, None])
                sups[start : start + chunk], infs[start : start + chunk] = _endpoint_range(bre, b, q, s)
            nn_grid, jj_grid = np.meshgrid(n_vals, inner, indexing="ij")
            add(jj_grid, np.full(masses.size, i), nn_grid, np.broadcast_to(inner_src, masses.shape),
                np.full(masses.size, index[piece]), masses, sups, infs)
            run_marginals[i] = (inner, masses)

    first = np.concatenate(cols["first"]).astype(np.int64)
    parabolic = np.concatenate(cols["parabolic"]).astype(np.int64)
    steps = np.concatenate(cols["steps"]).astype(np.int64)
    source = np.concatenate(cols["source"]).astype(np.int64)
    target = np.concatenate(cols["target"]).astype(np.int64)
    mass = np.concatenate(cols["mass"])
    sup_lw = np.concatenate(cols["sup"])
    inf_lw = np.concatenate(cols["inf"])
    if np.any(mass < 0):
        log.debug("clipping %d slightly negative symbol masses", int(np.sum(mass < 0)))
        mass = np.maximum(mass, 0.0)

    lumps = _tail_lumps(geom, sd, pieces, index, first, parabolic, steps, target, mass, run_marginals, trunc)
    chain = GibbsChain(
        model=model, phi=phi, b=b, q=q, s=s, truncation=trunc, spectral=sd, pieces=pieces,
        first=first, parabolic=parabolic, steps=steps, source=source, target=target, mass=mass,
        sup_log_weight=sup_lw, inf_log_weight=inf_lw, lumps=lumps,
        stationary=np.empty(0), gibbs_constant=math.nan,
    )
    _check_irreducible(chain)
    chain.stationary = _stationary(chain)
    chain.gibbs_constant, parts = _gibbs_constant(chain)
    chain.diagnostics.update(parts)
    chain.diagnostics["mass_defect"] = abs(float(chain.state_masses().sum()) - 1.0)
    return chain


def _tail_lumps(geom, sd, pieces, index, first, parabolic, steps, target, mass, run_marginals, trunc) -> list[TailLump]:
    """Lumps carrying the mass of symbols beyond ``j_max`` / ``n_max`` in each target piece."""
    lumps: list[TailLump] = []
    totals = {p: sd.piece_mass(name) * 0.0 for p, name in enumerate(pieces)}
    # mass landing in a piece is ν_P(L u)/ρ restricted to that piece
    lu = sd.mats["base"] @ sd.u
    norm = sd.rho * (sd.v @ sd.u)
    for p, name in enumerate(pieces):
        sl = sd.geometry.slices[name]
        totals[p] = float(sd.v[sl] @ lu[sl] / norm)
    hyp_src = index[pieces[0]] if not geom.induced else index["B"]
    empty = np.zeros(0, dtype=np.int64)

    if geom.digit_tail:
        sel = (parabolic == 0) & (target == 0) & (first > max(geom.parabolic, default=0))
        d, m = first[sel], mass[sel]
        remainder = totals[0] - float(mass[target == 0].sum())
        if remainder > 0 and d.size >= 4:
            law = _digit_law(d, m, trunc.j_max)
            lumps.append(TailLump(f"HypTail(>{trunc.j_max})", remainder, hyp_src, 0, 0, 1.0, law, None, empty, empty, empty, empty))

    for i, (inner, masses) in run_marginals.items():
        p = index[parabolic_piece(i)]
        remainder = totals[p] - float(masses.sum())
        if remainder <= 0:
            continue
        n_marg = masses.sum(axis=1)
        j_marg = masses.sum(axis=0)
        hyper = inner > max(geom.parabolic)
        digit_law, digit_part = None, 0.0
        if geom.digit_tail and hyper.sum() >= 4:
            digit_law = _digit_law(inner[hyper], j_marg[hyper], trunc.j_max)
            digit_part = _power_tail_mass(inner[hyper], j_marg[hyper], digit_law.decay)
        run_law = None
        N = masses.shape[0]
        if geom.n_tail_available() and trunc.tails and N >= 8:
            pts = [N // 4, N // 2, N]
            run_law = TailLaw.fit(N + 0.5, pts, [n_marg[k - 1] for k in pts])
        digit_share = 1.0 if run_law is None else (0.0 if digit_law is None else min(1.0, digit_part / remainder))
        edge_j = masses[-1] / masses[-1].sum() if masses[-1].sum() > 0 else np.full(inner.size, 1.0 / inner.size)
        edge_n = masses[:, -1] / masses[:, -1].sum() if masses[:, -1].sum() > 0 else np.full(N, 1.0 / N)
        if digit_law is None and run_law is None:
            continue
        lumps.append(
            TailLump(
                f"RunTail({i})", remainder, hyp_src, p, i, digit_share, digit_law, run_law,
                inner, edge_j, np.arange(1, N + 1), edge_n,
            )
        )
    return lumps


def _digit_law(digits: np.ndarray, masses: np.ndarray, j_max: int) -> TailLaw:
    half = digits >= digits.max() // 2
    lo = masses[half][:4].mean()
    hi = masses[-4:].mean()
    d_lo = digits[half][:4].mean()
    d_hi = digits[-4:].mean()
    return TailLaw.fit(j_max + 0.5, [d_lo, d_hi], [lo, hi])


def _power_tail_mass(digits: np.ndarray, masses: np.ndarray, decay: float) -> float:
    """``Σ_{d > max} C d^{-decay}`` matched to the last explicit mass."""
    last = float(digits[-1])
    return float(masses[-1] * last**decay * (last + 0.5) ** (1.0 - decay) / (decay - 1.0))


def _check_irreducible(chain: GibbsChain) -> None:
    k = len(chain.pieces)
    reach = np.zeros((k, k), dtype=bool)
    for s, t in zip(chain.state_sources(), chain.state_targets()):
        reach[s, t] = True
    closure = reach | np.eye(k, dtype=bool)
    for _ in range(k):
        closure = closure | ((closure.astype(int) @ closure.astype(int)) > 0)
    if not closure.all():
        raise ReducibleChainError("truncated induced incidence is reducible")


def _stationary(chain: GibbsChain) -> np.ndarray:
    """Exact stationary law: piece-level stationary weights times within-piece conditionals."""
    k = len(chain.pieces)
    masses, sources, targets = chain.state_masses(), chain.state_sources(), chain.state_targets()
    cond = chain._conditional()
    flow = np.zeros((k, k))
    for p in range(k):
        np.add.at(flow[p], targets, cond[p])
    vals, vecs = np.linalg.eig(flow.T)
    sigma = np.abs(vecs[:, np.argmin(np.abs(vals - 1.0))].real)
    sigma /= sigma.sum()
    stat = np.array([sigma[sources[m]] * cond[sources[m]][m] for m in range(masses.size)])
    return stat / stat.sum()


def _gibbs_constant(chain: GibbsChain) -> tuple[float, dict]:
    """``Q = Q₁ · e^V · (max u / min u)``, a bound for depth-2 Gibbs ratios.

    ``Q₁`` bounds the depth-1 ratios and ``V`` the oscillation of ``ψ̃`` over
    a single cylinder; splitting a depth-2 mass at its first symbol gives the
    bound.
    """
    keep = chain.mass > 0
    ratios = chain.mass[keep] / np.exp(chain.sup_log_weight[keep] - chain.pressure)
    q1 = float(np.max(np.maximum(ratios, 1.0 / ratios)))
    osc = float(np.max(chain.sup_log_weight - chain.inf_log_weight))
    dens = []
    geom = chain.spectral.geometry
    for name in chain.pieces:
        grid = geom.grids[name]
        dens.append(chain.spectral.density(name, np.linspace(grid.lo, grid.hi, 201)))
    dens = np.concatenate(dens)
    spread = float(dens.max() / dens.min()) if dens.min() > 0 else math.inf
    return q1 * math.exp(osc) * spread, {"Q1": q1, "oscillation": osc, "density_spread": spread}


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------


def lift_observables(chain: GibbsChain, phi: Optional[Potential] = None) -> EquilibriumObservables:
    """Entropy, Lyapunov exponent and ``μ(φ)`` of the lifted equilibrium measure.

    Induced integrals come from the chain's operator data; the entropy is the
    Rokhlin entropy ``log ρ + q·μ̃(φ̄) + b·μ̃(log|F'|) + s·μ̃(r)``.  Raises
    :class:`InfinitePressureError` when the mean return time diverges.
    """
    if phi is not None and phi is not chain.phi:
        raise ValueError("observables are available for the chain's own potential only")
    if not math.isfinite(chain.mean_return):
        raise InfinitePressureError("mean return time is infinite")
    # with return time 1 the pressure is s + log ρ; induced chains sit at the root
    value = chain.s if chain.spectral.geometry.induced else chain.s + chain.pressure
    return observables_from_spectral(chain.spectral, value)


def truncated_mean_return(model: MapModel, phi: Potential, b: float, q: float, s: float, n_max: int, j_max: int = 400) -> float:
    """Mean return time of the equilibrium measure of the induced system truncated at ``n_max`` (no tails)."""
    trunc = Truncation(j_max=j_max, n_max=n_max, tails=False)
    return geometry_for(model, phi, None, trunc).at(b, q).spectral(s).mean("r")
