"""Tail probabilities of the lowest box eigenvalue and Lifshitz-exponent fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ..bounds import ProofConstants, crude_critical_length
from ..eigensolve import SolverConfig, ground_energy
from ..errors import DomainError, OutOfRegimeError
from ..operators import BC_KINDS, MEZINCESCU
from ..potential import PotentialModel
from ..sampling import derive_seed, wilson_interval
from .common import MapFn, SampleContext, run_map

CRITICAL = "critical"
GAP = "gap"


@dataclass(frozen=True)
class EnergyGrid:
    """Energies ``E0 + offset`` with strictly increasing positive offsets."""

    E0: float
    offsets: tuple[float, ...]

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=float)
        if off.ndim != 1 or off.size == 0:
            raise DomainError("energy grid needs at least one offset")
        if np.any(off <= 0) or np.any(np.diff(off) <= 0):
            raise DomainError("offsets must be positive and strictly increasing")
        object.__setattr__(self, "offsets", tuple(float(v) for v in off))

    @classmethod
    def geometric(cls, E0: float, smallest: float, count: int, ratio: float = 2.0) -> "EnergyGrid":
        if ratio <= 1 or count < 1:
            raise DomainError("geometric grid needs ratio > 1 and count >= 1")
        return cls(E0, tuple(smallest * ratio**j for j in range(count)))

    @property
    def count(self) -> int:
        return len(self.offsets)

    @property
    def energies(self) -> np.ndarray:
        return self.E0 + np.asarray(self.offsets)


@dataclass
class TailEstimate:
    offset: float
    energy: float
    L: int | None
    n_samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    bound: float | None = None
    skipped: bool = False
    reason: str = ""
    ground_energies: np.ndarray | None = field(default=None, repr=False)


def box_length(E: float, E0: float, constants: ProofConstants, rule: str = CRITICAL) -> int:
    """Box radius tied to the energy: the proof's ``L_E`` or the gap length ``floor(sqrt(Cgap / (2(E-E0))))``."""
    if rule == CRITICAL:
        return constants.critical_length(E, E0)
    if rule == GAP:
        L = crude_critical_length(E, E0, constants.cgap)
        if L < max(1, constants.L0):
            raise OutOfRegimeError(f"gap length {L} below max(1, L0 = {constants.L0})")
        return L
    raise DomainError(f"unknown length rule {rule!r}")


def sample_ground_energy(ctx: SampleContext, L: int, bc: str, master_seed: int, cfg: SolverConfig, index: int) -> float:
    """``E_1`` of one sampled box operator."""
    grid = ctx.grid(L)
    W = ctx.potential(L, master_seed, index)
    return ground_energy(ctx.hamiltonian(W, grid, bc), cfg)


def tail_probability(
    model: PotentialModel,
    energy_grid: EnergyGrid,
    constants: ProofConstants,
    n_samples: int,
    seed: int,
    bc: str = MEZINCESCU,
    n_h: int = 8,
    length_rule: str = CRITICAL,
    rate: float | None = None,
    cfg: SolverConfig | None = None,
    map_fn: MapFn | None = None,
    ctx: SampleContext | None = None,
) -> list[TailEstimate]:
    """Estimate ``P{E_1(H^{L_E}) <= E}`` for every energy of the grid.

    Energy ``j`` uses the sample keys ``(derive_seed(seed, j), i)``.  With a
    Chernoff ``rate`` the bound ``exp(-rate |I_{L_E}|)`` is attached (only
    meaningful for the critical length rule).
    """
    if bc not in BC_KINDS:
        raise DomainError(f"unknown boundary condition {bc!r}")
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    ctx = ctx or SampleContext.build(model, n_h)
    cfg = cfg or SolverConfig(vectors=False)
    d = model.dimension
    out = []
    for j, (off, E) in enumerate(zip(energy_grid.offsets, energy_grid.energies)):
        try:
            L = box_length(E, energy_grid.E0, constants, length_rule)
        except OutOfRegimeError as exc:
            out.append(TailEstimate(off, E, None, 0, 0, float("nan"), float("nan"), float("nan"), None, True, str(exc)))
            continue
        fn = partial(sample_ground_energy, ctx, L, bc, derive_seed(seed, j), cfg)
        e1 = np.array(run_map(fn, range(n_samples), map_fn))
        hits = int(np.sum(e1 <= E))
        lo, hi = wilson_interval(hits, n_samples)
        bound = math.exp(-rate * (2 * L + 1) ** d) if rate is not None and length_rule == CRITICAL else None
        out.append(TailEstimate(off, E, L, n_samples, hits, hits / n_samples, lo, hi, bound, False, "", e1))
    return out


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    residual: float
    n_points: int


def fit_lifshitz_exponent(points) -> ExponentFit:
    """Least-squares line of ``ln(-ln value)`` against ``ln(E - E0)``.

    ``points`` is a sequence of ``(offset, value)`` pairs.  ``residual`` is
    the root mean square deviation from the line.
    """
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise DomainError("need at least two (offset, value) pairs")
    x, v = arr[:, 0], arr[:, 1]
    if np.any(x <= 0):
        raise DomainError("offsets must be positive")
    if np.any((v <= 0) | (v >= 1)):
        raise DomainError("values must lie strictly inside (0, 1) for the double logarithm")
    lx, ly = np.log(x), np.log(-np.log(v))
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + intercept)
    return ExponentFit(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))), len(x))


def fit_tail(estimates: list[TailEstimate]) -> ExponentFit:
    """Exponent fit over the resolved estimates (``0 < p_hat < 1``)."""
    pts = [(t.offset, t.p_hat) for t in estimates if not t.skipped and 0 < t.p_hat < 1]
    return fit_lifshitz_exponent(pts)
