"""Shared pieces: per-sample Hamiltonians, the smooth cutoff, sample mapping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from ..errors import ConfigurationError, DomainError
from ..lattice import BoxGrid
from ..operators import (
    DiscreteHamiltonian,
    PeriodicGroundState,
    assemble_hamiltonian,
    boundary_condition,
    periodic_ground_state,
)
from ..potential import PotentialModel, Realization, evaluate_on_grid, sample_for_box

MapFn = Callable[..., Iterable]


@dataclass(frozen=True)
class SampleContext:
    """Everything a worker needs to rebuild one sample's operator."""

    model: PotentialModel
    ground_state: PeriodicGroundState
    n_h: int

    @classmethod
    def build(cls, model: PotentialModel, n_h: int) -> "SampleContext":
        return cls(model, periodic_ground_state(model.background, model.geometry, n_h), n_h)

    @property
    def E0(self) -> float:
        return self.ground_state.energy

    def grid(self, L: int) -> BoxGrid:
        return BoxGrid(self.model.geometry, L, self.n_h)

    def realization(self, L: int, master_seed: int, index: int) -> Realization:
        return sample_for_box(self.model, L, master_seed, index)

    def potential(self, L: int, master_seed: int, index: int) -> np.ndarray:
        return evaluate_on_grid(self.model, self.realization(L, master_seed, index), self.grid(L))

    def hamiltonian(self, W: np.ndarray | None, grid: BoxGrid, bc: str) -> DiscreteHamiltonian:
        return assemble_hamiltonian(self.model.background, W, grid, boundary_condition(bc, self.ground_state, grid))


def run_map(fn, items, map_fn: MapFn | None) -> list:
    """Apply ``fn`` to ``items`` through ``map_fn`` and keep the input order."""
    return list((map_fn or map)(fn, items))


# --------------------------------------------------------------------------
# smooth cutoff


def smoothstep_cutoff(t: np.ndarray) -> np.ndarray:
    """C^2 bump on the real line: 1 on ``|t| <= 1/2``, 0 on ``|t| >= 1``, quintic in between."""
    a = np.abs(np.asarray(t, dtype=float))
    s = np.clip((a - 0.5) / 0.5, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def cutoff_derivatives(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivative of :func:`smoothstep_cutoff`."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    s = np.clip((a - 0.5) / 0.5, 0.0, 1.0)
    inside = (a > 0.5) & (a < 1.0)
    d1 = np.where(inside, -2.0 * 30.0 * s * s * (1 - s) ** 2 * np.sign(t), 0.0)
    d2 = np.where(inside, -4.0 * 60.0 * s * (1 - s) * (1 - 2 * s), 0.0)
    return d1, d2


def cutoff_on_grid(grid: BoxGrid, scale: float, center=None) -> np.ndarray:
    """``chi((y - x)/scale)`` as a product over axes, in reference coordinates."""
    d = grid.dimension
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    factors = [smoothstep_cutoff((grid.axis_coords - center[j]) / scale) for j in range(d)]
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def cutoff_continuum_norms(spacings, n_quad: int = 20001) -> dict:
    """``||chi||_2``, ``||grad chi||_2``, a bound on ``||grad chi||_inf`` and ``||Laplace chi||_2``.

    ``chi`` lives on ``M(-1, 1)^d`` for the diagonal generator ``M = diag(spacings)``.
    """
    s = np.asarray(spacings, dtype=float)
    d = s.size
    det = float(np.prod(s))
    t = np.linspace(-1.0, 1.0, n_quad)
    w = np.full(n_quad, t[1] - t[0])
    w[[0, -1]] *= 0.5
    f = smoothstep_cutoff(t)
    d1, d2 = cutoff_derivatives(t)
    f2, g2, l2, fl = np.dot(w, f * f), np.dot(w, d1 * d1), np.dot(w, d2 * d2), np.dot(w, f * d2)
    inv2 = 1.0 / s**2
    lap_sq = l2 * np.sum(inv2**2) * f2 ** (d - 1)
    if d > 1:
        cross = np.sum(np.outer(inv2, inv2)) - np.sum(inv2**2)
        lap_sq += cross * fl**2 * f2 ** (d - 2)
    return {
        "chi": float(np.sqrt(det * f2**d)),
        "grad": float(np.sqrt(det * g2 * np.sum(inv2) * f2 ** (d - 1))),
        "grad_sup": float(np.max(np.abs(d1)) * np.sqrt(np.sum(inv2))),
        "laplace": float(np.sqrt(det * lap_sq)),
    }


def check_energy_above(E: float, E0: float) -> None:
    if not E > E0:
        raise DomainError(f"energy {E} must exceed E0 = {E0}")


def require_diagonal(grid: BoxGrid, what: str) -> None:
    if not grid.geometry.is_diagonal:
        raise ConfigurationError(f"{what} requires a diagonal lattice generator")
