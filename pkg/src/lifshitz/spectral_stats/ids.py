"""Finite-volume integrated density of states by Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from ..eigensolve import SolverConfig, counting_function, dense_spectrum, lowest_eigenpairs
from ..errors import DomainError
from ..operators import BC_KINDS
from ..potential import PotentialModel
from ..sampling import mean_interval
from .common import MapFn, SampleContext, run_map


@dataclass
class IdsCurve:
    energies: np.ndarray
    L: int
    n_samples: int
    volume: float
    bcs: tuple[str, ...]
    counts: dict[str, np.ndarray]
    mean: dict[str, np.ndarray]
    ci_low: dict[str, np.ndarray]
    ci_high: dict[str, np.ndarray]

    def rows(self):
        for bc in self.bcs:
            for j, E in enumerate(self.energies):
                yield bc, float(E), float(self.mean[bc][j]), float(self.ci_low[bc][j]), float(self.ci_high[bc][j])


def sample_counts(ctx: SampleContext, L: int, bcs: tuple[str, ...], energies: np.ndarray, master_seed: int, cfg: SolverConfig, index: int) -> np.ndarray:
    """Eigenvalue counts ``n_L(E)`` for every boundary condition and energy; shape ``(len(bcs), len(energies))``."""
    grid = ctx.grid(L)
    W = ctx.potential(L, master_seed, index)
    out = np.empty((len(bcs), len(energies)), dtype=np.int64)
    for b, bc in enumerate(bcs):
        H = ctx.hamiltonian(W, grid, bc)
        if H.dof <= cfg.dense_cutoff:
            spectrum = dense_spectrum(H, cfg.dense_cutoff, vectors=False)
        else:
            spectrum = lowest_eigenpairs(H, cfg)
        out[b] = [counting_function(spectrum, E) for E in energies]
    return out


def ids_curve(
    model: PotentialModel,
    bcs,
    L: int,
    energies,
    n_samples: int,
    seed: int,
    n_h: int = 8,
    cfg: SolverConfig | None = None,
    map_fn: MapFn | None = None,
    ctx: SampleContext | None = None,
) -> IdsCurve:
    """Mean normalised counting function ``|Lambda_L|^{-1} n_L(E)`` per boundary condition.

    Sample ``i`` uses the key ``(seed, i)``, the same key as
    :func:`lower_bound_witness`, so the two are directly comparable.
    ``energies`` may be absolute values or an :class:`EnergyGrid`.
    """
    bcs = tuple(bcs)
    if not bcs or any(b not in BC_KINDS for b in bcs):
        raise DomainError(f"boundary conditions must be drawn from {BC_KINDS}")
    E = np.asarray(getattr(energies, "energies", energies), dtype=float)
    if E.ndim != 1 or E.size == 0:
        raise DomainError("need at least one energy")
    ctx = ctx or SampleContext.build(model, n_h)
    cfg = cfg or SolverConfig(vectors=False)
    fn = partial(sample_counts, ctx, L, bcs, E, seed, cfg)
    counts = np.stack(run_map(fn, range(n_samples), map_fn))
    volume = ctx.grid(L).volume
    per_bc, mean, lo, hi = {}, {}, {}, {}
    for b, bc in enumerate(bcs):
        c = counts[:, b, :]
        per_bc[bc] = c
        stats = [mean_interval(c[:, j] / volume) for j in range(E.size)]
        mean[bc] = np.array([s[0] for s in stats])
        lo[bc] = np.array([s[1] for s in stats])
        hi[bc] = np.array([s[2] for s in stats])
    return IdsCurve(E, L, n_samples, volume, bcs, per_bc, mean, lo, hi)
