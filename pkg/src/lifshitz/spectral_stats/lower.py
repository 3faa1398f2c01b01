"""Lower-bound machinery: cutoff test functions, the witness probability,
identification of the spectral bottom and the decay margin of long-range
single-site potentials."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from ..eigensolve import SolverConfig, ground_energy
from ..errors import DomainError
from ..lattice import BoxGrid
from ..operators import DIRICHLET, MEZINCESCU, PeriodicGroundState
from ..potential import PotentialModel, evaluate_on_grid
from ..sampling import wilson_interval
from .common import (
    MapFn,
    SampleContext,
    check_energy_above,
    cutoff_continuum_norms,
    cutoff_on_grid,
    require_diagonal,
    run_map,
)

DECOMPOSITION_SLACK = 1e-8


@dataclass(frozen=True)
class LowerBoundConfig:
    """Decay constants ``(C, eps)``, small-value exponents ``(alpha0, eta)``,
    the cutoff constant ``cblubb`` and the ``L^p`` exponent of the diagnostics."""

    cblubb: float
    decay_C: float = 1.0
    decay_eps: float = 2.0
    alpha0: float = 1.0
    eta: float = 1.0
    p: float = 4.0

    def __post_init__(self):
        if self.decay_eps <= 0:
            raise DomainError("decay exponent eps must be positive")
        if self.eta <= 0:
            raise DomainError("eta must be positive")
        if not 0 < self.alpha0 <= 1:
            raise DomainError("alpha0 must lie in (0, 1]")
        if self.cblubb <= 0 or self.decay_C < 0:
            raise DomainError("cblubb must be positive and C non-negative")

    @property
    def eps_bar(self) -> float:
        return min(2.0, self.decay_eps)

    def critical_length(self, E: float, E0: float) -> int:
        """``ceil(sqrt(2 cblubb / (E - E0)))``."""
        check_energy_above(E, E0)
        return int(math.ceil(math.sqrt(2.0 * self.cblubb / (E - E0)) - 1e-12))

    @classmethod
    def calibrated(cls, gs: PeriodicGroundState, **kwargs) -> "LowerBoundConfig":
        """``cblubb = (||grad chi|| Psi_+ / (||chi|| Psi_-))^2`` from the continuum cutoff and the discrete ``Psi``."""
        require_diagonal(BoxGrid(gs.geometry, 0, gs.n_h), "cutoff constants")
        norms = cutoff_continuum_norms(np.diag(gs.geometry.matrix))
        c = (norms["grad"] * gs.psi_max / (norms["chi"] * gs.psi_min)) ** 2
        return cls(cblubb=float(c), **kwargs)


def _edge_energy(f: np.ndarray, weight_pairs: np.ndarray | None, spacings, h: float) -> float:
    """``sum over nearest-neighbour edges of w_ij (f_i - f_j)^2 / (h s_a)^2``."""
    total = 0.0
    for a in range(f.ndim):
        diff = np.diff(f, axis=a)
        if weight_pairs is None:
            total += float(np.sum(diff**2)) / (h * spacings[a]) ** 2
        else:
            lo = [slice(None)] * f.ndim
            hi = [slice(None)] * f.ndim
            lo[a], hi[a] = slice(0, -1), slice(1, None)
            total += float(np.sum(weight_pairs[tuple(lo)] * weight_pairs[tuple(hi)] * diff**2)) / (h * spacings[a]) ** 2
    return total


@dataclass(frozen=True)
class CutoffState:
    """``chi_L Psi`` on the box grid with its free quotient and discrete constant."""

    grid: BoxGrid
    chi: np.ndarray
    state: np.ndarray
    free_quotient: float
    cblubb_discrete: float

    @property
    def scale(self) -> int:
        return self.grid.L


def cutoff_state(ctx: SampleContext, L: int) -> CutoffState:
    """Smoothly truncated periodic ground state ``chi(./L) Psi`` and the exact edge form of its energy.

    ``free_quotient`` equals ``<f, (H_per^{L,D} - E0) f>/||f||^2``; the
    discrete ``cblubb`` bounds ``L^2`` times it.
    """
    grid = ctx.grid(L)
    require_diagonal(grid, "the cutoff test function")
    s = np.diag(grid.geometry.matrix)
    chi = cutoff_on_grid(grid, float(L))
    psi = ctx.ground_state.on_grid(grid)
    f = chi * psi
    free = _edge_energy(chi, psi, s, grid.h) / float(np.sum(f * f))
    gs = ctx.ground_state
    cb = L * L * _edge_energy(chi, None, s, grid.h) / float(np.sum(chi * chi)) * (gs.psi_max / gs.psi_min) ** 2
    return CutoffState(grid, chi, f, free, cb)


@dataclass
class WitnessResult:
    L: int
    energy: float
    E0: float
    n_samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    ids_lower: float
    free_quotient: float
    cblubb_discrete: float
    quotients: np.ndarray = field(repr=False)
    potential_terms: np.ndarray = field(repr=False)
    decomposition_gap: float = 0.0

    @property
    def decomposition_ok(self) -> bool:
        return self.decomposition_gap <= DECOMPOSITION_SLACK


def witness_sample(ctx: SampleContext, cut: CutoffState, master_seed: int, index: int) -> tuple[float, float]:
    """Rayleigh quotient of ``chi_L Psi`` in ``H^{L,D}`` and its potential part."""
    grid = cut.grid
    W = ctx.potential(grid.L, master_seed, index)
    H = ctx.hamiltonian(W, grid, DIRICHLET)
    f = cut.state
    nn = float(np.sum(f * f))
    return H.rayleigh_quotient(f), float(np.sum(W * f * f)) / nn


def lower_bound_witness(
    model: PotentialModel,
    L: int | None,
    E: float,
    n_samples: int,
    seed: int,
    cfg: LowerBoundConfig | None = None,
    n_h: int = 8,
    map_fn: MapFn | None = None,
    ctx: SampleContext | None = None,
) -> WitnessResult:
    """Fraction of samples whose cutoff quotient in ``H^{L,D}`` is at most ``E``.

    ``L=None`` picks ``cfg.critical_length(E, E0)``.  Every sample is also
    checked against ``quotient - E0 <= <f, W f>/||f||^2 + cblubb_L / L^2``.
    """
    ctx = ctx or SampleContext.build(model, n_h)
    E0 = ctx.E0
    check_energy_above(E, E0)
    if L is None:
        if cfg is None:
            cfg = LowerBoundConfig.calibrated(ctx.ground_state)
        L = cfg.critical_length(E, E0)
    cut = cutoff_state(ctx, L)
    data = np.array(run_map(partial(witness_sample, ctx, cut, seed), range(n_samples), map_fn)).reshape(-1, 2)
    q, wt = data[:, 0], data[:, 1]
    hits = int(np.sum(q <= E))
    lo, hi = wilson_interval(hits, n_samples)
    p = hits / n_samples
    gap = float(np.max((q - E0) - (wt + cut.cblubb_discrete / L**2))) if n_samples else 0.0
    return WitnessResult(
        L, E, E0, n_samples, hits, p, lo, hi, p / cut.grid.volume, cut.free_quotient, cut.cblubb_discrete, q, wt, gap
    )


# --------------------------------------------------------------------------
# spectral bottom


def gradient_norm_in_cell(gs: PeriodicGroundState) -> float:
    """``||1_D grad Psi||_2`` by periodic forward differences."""
    s = np.diag(gs.geometry.matrix)
    h = 1.0 / gs.n_h
    w = gs.geometry.det / gs.n_h**gs.geometry.dimension
    total = 0.0
    for a in range(gs.psi.ndim):
        total += float(np.sum((np.roll(gs.psi, -1, axis=a) - gs.psi) ** 2)) / (h * s[a]) ** 2
    return math.sqrt(w * total)


def approximation_constant(gs: PeriodicGroundState) -> float:
    """``2 3^{d/2} ||1_D grad Psi|| ||grad chi||_inf + Psi_+ ||Laplace chi||_2``."""
    s = np.diag(gs.geometry.matrix)
    norms = cutoff_continuum_norms(s)
    d = gs.geometry.dimension
    return 2.0 * 3 ** (d / 2) * gradient_norm_in_cell(gs) * norms["grad_sup"] + gs.psi_max * norms["laplace"]


def e0_sample(ctx: SampleContext, L: int, cut: CutoffState, master_seed: int, cfg: SolverConfig, index: int):
    """``(max lambda over I_L, quotient - E0, ||(H - E0) psi||, E_1(H^{L,M}) - E0)`` for one sample."""
    grid = cut.grid
    real = ctx.realization(L, master_seed, index)
    inside = np.all(np.abs(real.sites) <= L, axis=1)
    sup_lam = float(np.max(real.values[inside]))
    W = evaluate_on_grid(ctx.model, real, grid)
    HD = ctx.hamiltonian(W, grid, DIRICHLET)
    f = cut.state.ravel() / grid.norm(cut.state)
    r = HD.matrix @ f - ctx.E0 * f
    e1 = ground_energy(ctx.hamiltonian(W, grid, MEZINCESCU), cfg)
    return sup_lam, float(f @ (HD.matrix @ f)) / float(f @ f) - ctx.E0, math.sqrt(grid.weight) * float(np.linalg.norm(r)), e1 - ctx.E0


@dataclass
class E0Row:
    L: int
    alpha: float
    n_samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    exact: float | None
    max_quotient: float | None
    max_residual: float | None
    residual_bound: float
    min_gap: float
    unresolved: bool


def e0_identification(
    model: PotentialModel,
    L_list,
    alpha_list,
    n_samples: int,
    seed: int,
    n_h: int = 8,
    cfg: SolverConfig | None = None,
    map_fn: MapFn | None = None,
    ctx: SampleContext | None = None,
) -> list[E0Row]:
    """Probability of ``{max_{k in I_L} lambda_k <= alpha}`` and the test-function data on that event.

    Rows carry the exact probability ``F(alpha)^{|I_L|}`` for i.i.d.
    couplings, the worst quotient and residual on the event, the bound
    ``(Cperp + 1)/L`` and the smallest observed ``E_1(H^{L,M}) - E0``.
    The samples use the keys ``(seed, i)`` for every ``L``.
    """
    ctx = ctx or SampleContext.build(model, n_h)
    cfg = cfg or SolverConfig(vectors=False)
    cperp = approximation_constant(ctx.ground_state)
    law = model.law
    rows = []
    for L in L_list:
        cut = cutoff_state(ctx, int(L))
        data = np.array(run_map(partial(e0_sample, ctx, int(L), cut, seed, cfg), range(n_samples), map_fn)).reshape(-1, 4)
        n_sites = model.geometry.n_sites(int(L))
        for alpha in alpha_list:
            ev = data[:, 0] <= alpha
            hits = int(ev.sum())
            lo, hi = wilson_interval(hits, n_samples)
            exact = float(law.laws[0].cdf(alpha)) ** n_sites if law.iid else None
            rows.append(
                E0Row(
                    int(L),
                    float(alpha),
                    n_samples,
                    hits,
                    hits / n_samples,
                    lo,
                    hi,
                    exact,
                    float(data[ev, 1].max()) if hits else None,
                    float(data[ev, 2].max()) if hits else None,
                    (cperp + 1.0) / L,
                    float(data[:, 3].min()),
                    hits == 0,
                )
            )
    return rows


# --------------------------------------------------------------------------
# decay of long-range single-site potentials


@dataclass
class DecayMargin:
    R: float
    tail_bound: float
    compact: bool
    support_radius: float
    near_sum: float
    direct_tail: float | None = None
    minimal_R: float | None = None


def shell_sizes(r: np.ndarray, d: int) -> np.ndarray:
    """Number of lattice sites with sup-norm exactly ``r``."""
    r = np.asarray(r)
    return np.where(r == 0, 1, (2 * r + 1) ** d - (2 * r - 1) ** d)


def summable_decay_margin(
    cfg: LowerBoundConfig,
    model: PotentialModel,
    R: float,
    tolerance: float | None = None,
    shell_norm: Callable[[np.ndarray], np.ndarray] | None = None,
    far: int = 1_000_000,
) -> DecayMargin:
    """Bound ``C_decay / (eps R^eps)`` on the contribution of sites beyond sup-distance ``R``.

    ``C_decay = C 2d 2^{d-1}`` for the decay ``C (1 + |k|)^{-(d+eps)}``.
    For compactly supported potentials the tail vanishes once ``R`` reaches
    the support radius.  ``shell_norm(r)`` (per-site norm at distance ``r``)
    enables the direct tail sum and the near-field sum.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    d = model.dimension
    hw = np.asarray(model.single_site.halfwidths(model.geometry), dtype=float)
    per_site = shell_norm or (lambda r: cfg.decay_C * (1.0 + np.asarray(r, float)) ** (-(d + cfg.decay_eps)))
    near_r = np.arange(0, int(math.floor(R)) + 1)
    near = float(np.sum(shell_sizes(near_r, d) * per_site(near_r)))
    if np.all(np.isfinite(hw)):
        radius = float(max(0, math.ceil(float(np.max(hw)) - 0.5 - 1e-12)))
        if R >= radius:
            return DecayMargin(R, 0.0, True, radius, near, 0.0, radius)
    cdecay = cfg.decay_C * 2 * d * 2 ** (d - 1)
    eps = cfg.decay_eps
    bound = cdecay / (eps * R**eps)
    direct = None
    if shell_norm is not None:
        r = np.arange(int(math.floor(R)) + 1, far + 1, dtype=float)
        direct = float(np.sum(shell_sizes(r, d) * shell_norm(r)))
    minimal = (cdecay / (eps * tolerance)) ** (1.0 / eps) if tolerance else None
    return DecayMargin(R, bound, False, float("inf"), near, direct, minimal)
