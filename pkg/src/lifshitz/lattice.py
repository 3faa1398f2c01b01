"""Lattice geometry and cell-centred box grids.

Boxes are ``Lambda_L = M (-(L+1/2), L+1/2)^d``.  Grids live in reference
coordinates ``y`` (physical ``x = M y``) with ``n_h`` nodes per cell and
axis, placed at cell centres of the sub-cells.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class LatticeGeometry:
    """The lattice ``M Z^d`` with fundamental domain ``D = M (-1/2, 1/2)^d``."""

    generator: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        m = np.asarray(self.generator, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or not 1 <= m.shape[0] <= 3:
            raise ConfigurationError("generator must be a square matrix of size 1, 2 or 3")
        if not np.all(np.isfinite(m)) or np.linalg.det(m) <= 0:
            raise ConfigurationError("generator must be finite with positive determinant")
        object.__setattr__(self, "generator", tuple(tuple(float(v) for v in row) for row in m))

    @classmethod
    def cubic(cls, dimension: int, spacing: float = 1.0) -> "LatticeGeometry":
        return cls(tuple(tuple(spacing if i == j else 0.0 for j in range(dimension)) for i in range(dimension)))

    @classmethod
    def diagonal(cls, spacings) -> "LatticeGeometry":
        spacings = list(spacings)
        d = len(spacings)
        return cls(tuple(tuple(spacings[i] if i == j else 0.0 for j in range(d)) for i in range(d)))

    @property
    def dimension(self) -> int:
        return len(self.generator)

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.array(self.generator)
        m.setflags(write=False)
        return m

    @cached_property
    def inverse(self) -> np.ndarray:
        m = np.linalg.inv(self.matrix)
        m.setflags(write=False)
        return m

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @property
    def is_diagonal(self) -> bool:
        m = self.matrix
        return bool(np.all(m == np.diag(np.diag(m))))

    @cached_property
    def metric(self) -> np.ndarray:
        """``(M^T M)^{-1}``, the coefficient matrix of the Laplacian in reference coordinates."""
        m = np.linalg.inv(self.matrix.T @ self.matrix)
        m.setflags(write=False)
        return m

    def box_sites(self, L: int) -> np.ndarray:
        """Index set ``I_L`` as integer coordinates, lexicographic order."""
        if L < 0:
            raise ConfigurationError("box radius L must be non-negative")
        r = range(-L, L + 1)
        return np.array(list(itertools.product(r, repeat=self.dimension)), dtype=np.int64)

    def n_sites(self, L: int) -> int:
        return (2 * L + 1) ** self.dimension

    def box_volume(self, L: float) -> float:
        """``|Lambda_L| = det(M) (2L+1)^d``."""
        return self.det * (2 * L + 1) ** self.dimension


@dataclass(frozen=True)
class BoxGrid:
    """Cell-centred grid on ``Lambda_L`` with ``n_h`` nodes per cell and axis."""

    geometry: LatticeGeometry
    L: int
    n_h: int

    def __post_init__(self):
        if self.L < 0:
            raise ConfigurationError("box radius L must be non-negative")
        if self.n_h < 2:
            raise ConfigurationError("n_h must be at least 2")

    @property
    def dimension(self) -> int:
        return self.geometry.dimension

    @property
    def n_axis(self) -> int:
        return (2 * self.L + 1) * self.n_h

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_axis,) * self.dimension

    @property
    def dof(self) -> int:
        return self.n_axis**self.dimension

    @property
    def h(self) -> float:
        """Reference-coordinate spacing ``1/n_h``."""
        return 1.0 / self.n_h

    @property
    def weight(self) -> float:
        """Quadrature weight of one node (physical volume of its sub-cell)."""
        return self.geometry.det / self.n_h**self.dimension

    @property
    def volume(self) -> float:
        return self.geometry.box_volume(self.L)

    @cached_property
    def axis_coords(self) -> np.ndarray:
        """Reference coordinates of the nodes along one axis."""
        return -(self.L + 0.5) + (np.arange(self.n_axis) + 0.5) / self.n_h

    def reference_nodes(self) -> np.ndarray:
        """All node positions in reference coordinates, shape ``(dof, d)``, C order."""
        mesh = np.meshgrid(*([self.axis_coords] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def physical_nodes(self) -> np.ndarray:
        return self.reference_nodes() @ self.geometry.matrix.T

    def local_index(self) -> np.ndarray:
        """Index of every node inside its own cell along each axis, shape ``(dof, d)``."""
        idx = np.arange(self.n_axis) % self.n_h
        mesh = np.meshgrid(*([idx] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def norm(self, f: np.ndarray) -> float:
        """Discrete ``L^2(Lambda_L)`` norm."""
        return float(np.sqrt(self.weight * np.sum(np.abs(f) ** 2)))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.weight * np.sum(np.conj(f) * g))


def cell_offsets(geometry: LatticeGeometry, n_h: int, margin: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Node offsets of a patch of ``(2 margin + 1)^d`` cells around a cell centre.

    Returns ``(reference, physical)`` arrays of shape ``(P, d)`` in C order.
    """
    n = (2 * margin + 1) * n_h
    t = (np.arange(n) + 0.5) / n_h - (margin + 0.5)
    mesh = np.meshgrid(*([t] * geometry.dimension), indexing="ij")
    ref = np.stack([g.ravel() for g in mesh], axis=1)
    return ref, ref @ geometry.matrix.T
