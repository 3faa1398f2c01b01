"""Off-diagonal resolvent decay and the initial length scale estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..eigensolve import SolverConfig, ground_energy
from ..errors import ConfigurationError, DomainError, HypothesisError
from ..lattice import BoxGrid
from ..operators import DIRICHLET, MEZINCESCU, DiscreteHamiltonian
from ..potential import PotentialModel
from ..sampling import wilson_interval
from .common import MapFn, SampleContext, run_map


def slab(grid: BoxGrid, lo: float, hi: float, axis: int = 0) -> np.ndarray:
    """Flat indices of the nodes whose reference coordinate along ``axis`` lies in ``[lo, hi)``."""
    y = grid.reference_nodes()[:, axis]
    return np.flatnonzero((y >= lo) & (y < hi))


def reference_distance(grid: BoxGrid, a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance of two node sets in reference coordinates."""
    y = grid.reference_nodes()
    return float(np.min(np.linalg.norm(y[a][:, None, :] - y[b][None, :, :], axis=-1)))


def slab_blocks(grid: BoxGrid, width: float, offsets) -> tuple[np.ndarray, list[np.ndarray], list[float]]:
    """A source slab of ``width`` cells at the left face and target slabs starting ``offsets`` cells after it.

    Returns ``(source, targets, distances)``; distances are node-set
    distances in reference coordinates.
    """
    left = -(grid.L + 0.5)
    source = slab(grid, left, left + width)
    targets, dists = [], []
    for off in offsets:
        start = left + width + off
        t = slab(grid, start, start + width)
        if t.size == 0:
            raise ConfigurationError(f"target slab at offset {off} lies outside the box")
        targets.append(t)
        dists.append(0.0 if off < 0 else reference_distance(grid, source, t))
    return source, targets, dists


def _block_norms(m, E: float, source: np.ndarray, targets: list[np.ndarray], dense_cutoff: int) -> np.ndarray:
    n = m.shape[0]
    cols = np.unique(np.concatenate(targets))
    if n <= dense_cutoff:
        A = E * np.eye(n) - (m.toarray() if sp.issparse(m) else np.asarray(m))
        G = la.solve(A, np.eye(n)[:, cols], assume_a="sym")
    else:
        lu = spla.splu(sp.csc_matrix(E * sp.identity(n) - m))
        rhs = np.zeros((n, cols.size))
        rhs[cols, np.arange(cols.size)] = 1.0
        G = lu.solve(rhs)
    where = {c: i for i, c in enumerate(cols)}
    out = []
    for t in targets:
        block = G[np.ix_(source, [where[c] for c in t])]
        out.append(float(np.linalg.norm(block, 2)))
    return np.array(out)


@dataclass
class CtDecay:
    energy: float
    E1: float
    distances: np.ndarray
    norms: np.ndarray
    rate: float
    intercept: float
    fit_residual: float

    @property
    def gap(self) -> float:
        return self.E1 - self.energy

    @property
    def rate_ratio(self) -> float:
        return self.rate / self.gap


def ct_decay(
    H: DiscreteHamiltonian,
    E: float,
    source: np.ndarray,
    targets: list[np.ndarray],
    distances,
    cfg: SolverConfig | None = None,
    E1: float | None = None,
) -> CtDecay:
    """Norms ``||1_B (E - H)^{-1} 1_{B'}||`` against distance, with a log-linear fit.

    ``fit_residual`` is ``1 - R^2`` of the fit of ``log norm`` on distance.
    """
    if H.bc.kind != DIRICHLET:
        raise ConfigurationError("resolvent decay is defined for Dirichlet operators")
    cfg = cfg or SolverConfig(vectors=False)
    E1 = ground_energy(H, cfg) if E1 is None else E1
    if not E < E1:
        raise HypothesisError(f"energy {E:.6g} is not below E1 = {E1:.6g}")
    dist = np.asarray(distances, dtype=float)
    if len(targets) != dist.size:
        raise DomainError("one distance per target block is required")
    norms = _block_norms(H.matrix, E, np.asarray(source), [np.asarray(t) for t in targets], cfg.dense_cutoff)
    if dist.size >= 2 and np.ptp(dist) > 0:
        logn = np.log(norms)
        slope, intercept = np.polyfit(dist, logn, 1)
        pred = slope * dist + intercept
        ss = float(np.sum((logn - logn.mean()) ** 2))
        resid = float(np.sum((logn - pred) ** 2)) / ss if ss > 0 else 0.0
    else:
        slope, intercept, resid = float("nan"), float("nan"), float("nan")
    return CtDecay(E, E1, dist, norms, float(-slope), float(intercept), resid)


@dataclass(frozen=True)
class CtConstants:
    """Combes-Thomas constants and the ILSE exponent ``c_prime`` (a fitted input)."""

    C1: float
    C2: float
    c_prime: float = 0.0

    def __post_init__(self):
        if self.C1 <= 0 or self.C2 <= 0 or self.c_prime < 0:
            raise DomainError("C1, C2 must be positive and c_prime non-negative")

    def bound(self, gap: float, distance: float) -> float:
        return self.C1 / gap * math.exp(-self.C2 * gap * distance)


def calibrate_combes_thomas(H: DiscreteHamiltonian, gaps, width: float, offsets, c_prime: float = 0.0, cfg: SolverConfig | None = None) -> tuple[CtConstants, list[CtDecay]]:
    """Smallest ``C2`` and matching ``C1`` such that ``C1/g exp(-C2 g delta)`` dominates every computed norm.

    ``C2`` is the minimum fitted rate divided by the gap ``g = E1 - E``;
    ``C1`` the maximum of ``norm g exp(C2 g delta)`` over gaps and distances.
    """
    cfg = cfg or SolverConfig(vectors=False)
    E1 = ground_energy(H, cfg)
    source, targets, dists = slab_blocks(H.grid, width, offsets)
    runs = [ct_decay(H, E1 - g, source, targets, dists, cfg, E1) for g in gaps]
    C2 = float(min(r.rate_ratio for r in runs))
    if not C2 > 0:
        raise DomainError("calibration produced a non-positive decay rate")
    C1 = max(float(np.max(r.norms * r.gap * np.exp(C2 * r.gap * r.distances))) for r in runs)
    return CtConstants(C1, C2, c_prime), runs


# --------------------------------------------------------------------------
# initial length scale estimate


@dataclass
class IlseResult:
    ell: int
    kappa: int
    L: int
    energy: float
    distance: float
    threshold: float
    n_samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    lower_bound: float
    ct_hypothesis_fraction: float
    norms: np.ndarray = field(repr=False)
    ground_energies: np.ndarray = field(repr=False)


def ilse_blocks(grid: BoxGrid) -> tuple[np.ndarray, np.ndarray, float]:
    """Left and right thirds of the box along the first axis and their distance."""
    a = -(grid.L + 0.5)
    third = (2 * grid.L + 1) / 3.0
    B = slab(grid, a, a + third)
    Bt = slab(grid, -a - third, -a + 1e-12)
    return B, Bt, reference_distance(grid, B, Bt)


def ilse_sample(ctx: SampleContext, L: int, E: float, blocks, master_seed: int, cfg: SolverConfig, index: int):
    grid = ctx.grid(L)
    W = ctx.potential(L, master_seed, index)
    H = ctx.hamiltonian(W, grid, DIRICHLET)
    B, Bt = blocks
    try:
        norm = float(_block_norms(H.matrix, E, B, [Bt], cfg.dense_cutoff)[0])
    except (la.LinAlgError, RuntimeError):
        norm = float("inf")
    return norm, ground_energy(H, cfg)


def ilse_probability(
    model: PotentialModel,
    ell: int,
    kappa: int,
    constants: CtConstants,
    n_samples: int,
    seed: int,
    n_h: int = 8,
    max_dof: int = 20_000,
    cfg: SolverConfig | None = None,
    map_fn: MapFn | None = None,
    ctx: SampleContext | None = None,
) -> IlseResult:
    """Frequency of ``||1_B (E0 + L^{-2/kappa} - H^{L,D})^{-1} 1_{B'}|| <= C1 L^{2/kappa} exp(-C2 delta / L^{2/kappa})``.

    ``L = ell^kappa``; ``B`` and ``B'`` are the outer thirds of the box.
    Also reports ``1 - 2^d L^{(1-1/kappa)d} exp(-c' L^{d/kappa})`` and the
    fraction of samples with ``E_1 >= E0 + 2 L^{-2/kappa}``.
    """
    if ell < 1 or kappa < 1:
        raise DomainError("ell and kappa must be positive integers")
    L = ell**kappa
    d = model.dimension
    dof = ((2 * L + 1) * n_h) ** d
    if dof > max_dof:
        raise ConfigurationError(f"L = {ell}^{kappa} = {L} needs {dof} unknowns (> {max_dof}); reduce ell or kappa")
    ctx = ctx or SampleContext.build(model, n_h)
    cfg = cfg or SolverConfig(vectors=False)
    scale = L ** (2.0 / kappa)
    E = ctx.E0 + 1.0 / scale
    B, Bt, delta = ilse_blocks(ctx.grid(L))
    threshold = constants.C1 * scale * math.exp(-constants.C2 * delta / scale)
    data = np.array(run_map(partial(ilse_sample, ctx, L, E, (B, Bt), seed, cfg), range(n_samples), map_fn)).reshape(-1, 2)
    norms, e1 = data[:, 0], data[:, 1]
    hits = int(np.sum(norms <= threshold))
    lo, hi = wilson_interval(hits, n_samples)
    lower = 1.0 - 2**d * L ** ((1 - 1 / kappa) * d) * math.exp(-constants.c_prime * L ** (d / kappa))
    ct_frac = float(np.mean(e1 >= ctx.E0 + 2.0 / scale))
    return IlseResult(ell, kappa, L, E, delta, threshold, n_samples, hits, hits / n_samples, lo, hi, lower, ct_frac, norms, e1)


def estimate_c_prime(
    model: PotentialModel,
    ell: int,
    n_samples: int,
    seed: int,
    n_h: int = 8,
    cfg: SolverConfig | None = None,
    map_fn: MapFn | None = None,
    ctx: SampleContext | None = None,
) -> float:
    """Fitted exponent ``c' = -ln(p_up) / ell^d``.

    ``p_up`` is the upper Wilson endpoint of ``P{E_1(H^{ell,M}) <= E0 + 2/ell^2}``,
    so the value errs towards a smaller (weaker) ``c'``.
    """
    ctx = ctx or SampleContext.build(model, n_h)
    cfg = cfg or SolverConfig(vectors=False)
    E = ctx.E0 + 2.0 / ell**2
    e1 = np.array(run_map(partial(_mezincescu_ground, ctx, ell, seed, cfg), range(n_samples), map_fn))
    _, hi = wilson_interval(int(np.sum(e1 <= E)), n_samples)
    return float(max(0.0, -math.log(hi)) / ell**model.dimension)


def _mezincescu_ground(ctx: SampleContext, L: int, master_seed: int, cfg: SolverConfig, index: int) -> float:
    grid = ctx.grid(L)
    return ground_energy(ctx.hamiltonian(ctx.potential(L, master_seed, index), grid, MEZINCESCU), cfg)
