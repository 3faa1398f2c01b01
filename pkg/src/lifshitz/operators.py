"""Finite-difference Schrödinger operators on boxes.

The operator ``-Laplace + V_per + W`` is discretised with the standard
second-order stencil on a cell-centred grid.  Boundary conditions enter only
through the ghost value beyond the last node along each axis:

* Dirichlet: ghost = -(value at the boundary node), so the zero lies on the face
* Neumann: ghost = value at the boundary node (reflection about the face)
* Periodic: indices wrap
* Mezincescu: ghost = r * value, with ``r`` eliminated from the Robin
  condition ``rho * phi + d_n phi = 0`` at the face (midpoint value and
  centred normal difference).

With ``rho`` built from the periodic ground state the Mezincescu ghost
factor equals ``Psi(ghost) / Psi(node)``, so the restricted periodic ground
state stays an exact eigenvector of the discrete operator.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InvariantError
from .lattice import BoxGrid, LatticeGeometry
from .potential import PeriodicBackground

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
PERIODIC = "periodic"
MEZINCESCU = "mezincescu"
BC_KINDS = (DIRICHLET, NEUMANN, PERIODIC, MEZINCESCU)


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Boundary condition tag; Mezincescu carries one ``rho`` per face node.

    ``rho[j] = (left, right)`` are arrays over the two faces orthogonal to
    axis ``j`` (grid shape with axis ``j`` removed).
    """

    kind: str
    rho: tuple[tuple[np.ndarray, np.ndarray], ...] | None = None

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ConfigurationError(f"unknown boundary condition {self.kind!r}")
        if self.kind == MEZINCESCU:
            if self.rho is None:
                raise ConfigurationError("Mezincescu boundary condition needs a rho table")
            for left, right in self.rho:
                if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
                    raise InvariantError("rho must be finite on every face node")

    @classmethod
    def dirichlet(cls):
        return cls(DIRICHLET)

    @classmethod
    def neumann(cls):
        return cls(NEUMANN)

    @classmethod
    def periodic(cls):
        return cls(PERIODIC)

    @property
    def tag(self) -> str:
        return self.kind


@dataclass(frozen=True, eq=False)
class DiscreteHamiltonian:
    """Sparse symmetric matrix of ``H - shift`` on a box grid."""

    matrix: sp.csr_matrix
    grid: BoxGrid
    bc: BoundaryCondition
    potential_hash: str
    shift: float = 0.0
    diagonal_potential: np.ndarray | None = field(default=None, repr=False)

    @property
    def dof(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def gershgorin(self) -> tuple[float, float]:
        """Lower and upper Gershgorin bounds of the spectrum."""
        m = self.matrix
        d = m.diagonal()
        off = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(d)
        return float(np.min(d - off)), float(np.max(d + off))

    def norm_bound(self) -> float:
        lo, hi = self.gershgorin()
        return max(abs(lo), abs(hi))

    def rayleigh_quotient(self, f: np.ndarray) -> float:
        f = np.ravel(f)
        return float(f @ (self.matrix @ f) / (f @ f))


def _axis_pairs(index: np.ndarray, axis: int, wrap: bool):
    n = index.shape[axis]
    a = np.take(index, np.arange(n - 1), axis=axis).ravel()
    b = np.take(index, np.arange(1, n), axis=axis).ravel()
    if wrap:
        a = np.concatenate([a, np.take(index, [n - 1], axis=axis).ravel()])
        b = np.concatenate([b, np.take(index, [0], axis=axis).ravel()])
    return a, b


def _shifted_view(index: np.ndarray, shifts: dict[int, int], wrap: bool):
    """Pairs ``(p, p + shift)`` over the grid; drops pairs leaving the box unless ``wrap``."""
    src = index
    dst = index
    for axis, s in shifts.items():
        if wrap:
            dst = np.roll(dst, -s, axis=axis)
        else:
            n = index.shape[axis]
            keep = np.arange(max(0, -s), n - max(0, s))
            src = np.take(src, keep, axis=axis)
            dst = np.take(dst, keep + s, axis=axis)
    return src.ravel(), dst.ravel()


def _ghost_factors(bc: BoundaryCondition, grid: BoxGrid, axis: int):
    """Ghost factor ``r`` on the left and right faces of ``axis`` (None when wrapping)."""
    if bc.kind == PERIODIC:
        return None
    if bc.kind == DIRICHLET:
        # the rho -> infinity limit of the Robin factor
        return -1.0, -1.0
    if bc.kind == NEUMANN:
        return 1.0, 1.0
    h_phys = grid.geometry.matrix[axis, axis] * grid.h
    left, right = bc.rho[axis]
    factor = lambda rho: (1.0 - 0.5 * rho * h_phys) / (1.0 + 0.5 * rho * h_phys)
    return factor(np.asarray(left)), factor(np.asarray(right))


def potential_hash(values: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(values, dtype=float).tobytes()).hexdigest()[:16]


def assemble_hamiltonian(vper, W, grid: BoxGrid, bc: BoundaryCondition | str, shift: float = 0.0) -> DiscreteHamiltonian:
    """Assemble ``-Laplace + V_per + W - shift`` on ``grid``.

    ``vper`` is a :class:`PeriodicBackground` or a grid array; ``W`` is a
    grid array (or None for no random potential).
    """
    if isinstance(bc, str):
        bc = BoundaryCondition(bc)
    geom = grid.geometry
    d = grid.dimension
    shape = grid.shape
    v = vper.on_grid(grid) if isinstance(vper, PeriodicBackground) else np.asarray(vper, dtype=float)
    w = np.zeros(shape) if W is None else np.asarray(W, dtype=float)
    if v.shape != shape or w.shape != shape:
        raise ConfigurationError(f"potential shape {v.shape}/{w.shape} does not match grid shape {shape}")
    if not geom.is_diagonal and bc.kind in (NEUMANN, MEZINCESCU):
        raise ConfigurationError("Neumann/Mezincescu assembly requires a diagonal lattice generator")

    G = geom.metric
    h2 = grid.h**2
    wrap = bc.kind == PERIODIC
    index = np.arange(grid.dof).reshape(shape)
    diag = (v + w).astype(float).copy()
    rows, cols, vals = [], [], []

    for j in range(d):
        c = G[j, j] / h2
        diag += 2.0 * c
        a, b = _axis_pairs(index, j, wrap)
        rows += [a, b]
        cols += [b, a]
        vals += [np.full(a.size, -c)] * 2
        ghosts = _ghost_factors(bc, grid, j)
        if ghosts is not None:
            n = shape[j]
            for pos, r in ((0, ghosts[0]), (n - 1, ghosts[1])):
                sl = [slice(None)] * d
                sl[j] = pos
                diag[tuple(sl)] -= c * np.asarray(r)

    for i in range(d):
        for j in range(i + 1, d):
            g = G[i, j]
            if g == 0.0:
                continue
            coef = 2.0 * g / (4.0 * h2)
            for si, sj, sign in ((1, 1, -1.0), (1, -1, 1.0)):
                a, b = _shifted_view(index, {i: si, j: sj}, wrap)
                rows += [a, b]
                cols += [b, a]
                vals += [np.full(a.size, sign * coef)] * 2

    rows.append(index.ravel())
    cols.append(index.ravel())
    vals.append(diag.ravel() - shift)
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(grid.dof, grid.dof)
    ).tocsr()
    m.sum_duplicates()
    m = ((m + m.T) * 0.5).tocsr()
    m.sort_indices()
    return DiscreteHamiltonian(m, grid, bc, potential_hash(w), float(shift), (v + w).ravel())


def shifted_operator(H: DiscreteHamiltonian, gamma: float) -> DiscreteHamiltonian:
    """``H - gamma``, with the shift recorded."""
    if gamma == 0:
        return H
    m = (H.matrix - gamma * sp.identity(H.dof, format="csr")).tocsr()
    return replace(H, matrix=m, shift=H.shift + float(gamma))


# --------------------------------------------------------------------------
# periodic ground state and Mezincescu coefficients


@dataclass(frozen=True, eq=False)
class PeriodicGroundState:
    """Positive ground state ``Psi`` of the periodic cell problem, normalised on ``D``."""

    energy: float
    psi: np.ndarray
    n_h: int
    geometry: LatticeGeometry
    gap: float
    residual: float

    @property
    def psi_min(self) -> float:
        return float(self.psi.min())

    @property
    def psi_max(self) -> float:
        return float(self.psi.max())

    def cell_norm(self) -> float:
        return float(np.sqrt(self.geometry.det / self.n_h**self.geometry.dimension * np.sum(self.psi**2)))

    def on_grid(self, grid: BoxGrid) -> np.ndarray:
        """Periodic extension to ``grid`` (same ``n_h``)."""
        if grid.n_h != self.n_h:
            raise ConfigurationError("grid resolution differs from the ground state's")
        return np.tile(self.psi, (2 * grid.L + 1,) * grid.dimension)

    def box_state(self, grid: BoxGrid) -> np.ndarray:
        """``Psi_L = 1_{Lambda_L} Psi / sqrt(|I_L|)``, unit norm on the box."""
        return self.on_grid(grid) / np.sqrt((2 * grid.L + 1) ** grid.dimension)


def periodic_ground_state(vper: PeriodicBackground, geometry: LatticeGeometry, n_h: int, gap_tol: float = 1e-9) -> PeriodicGroundState:
    """Lowest eigenpair of the periodic discretisation on one cell."""
    grid = BoxGrid(geometry, 0, n_h)
    H = assemble_hamiltonian(vper, None, grid, PERIODIC)
    evals, evecs = np.linalg.eigh(H.dense())
    gap = float(evals[1] - evals[0]) if evals.size > 1 else np.inf
    if gap < gap_tol:
        raise InvariantError(f"periodic ground state is not simple (gap {gap:.3e})")
    psi = evecs[:, 0]
    psi = psi * np.sign(psi.sum())
    if np.any(psi <= 0):
        raise InvariantError("periodic ground state is not strictly positive")
    psi = psi / np.sqrt(grid.weight * np.sum(psi**2))
    residual = float(np.linalg.norm(H.matrix @ psi - evals[0] * psi))
    return PeriodicGroundState(float(evals[0]), psi.reshape(grid.shape), n_h, geometry, gap, residual)


def mezincescu_coefficients(ground_state: PeriodicGroundState, grid: BoxGrid) -> BoundaryCondition:
    """``rho = -(d_n Psi) / Psi`` on every face node of the box.

    ``Psi`` is extended periodically; the normal derivative is the centred
    difference across the face and ``Psi`` at the face the midpoint average.
    """
    if np.any(ground_state.psi <= 0):
        raise InvariantError("Mezincescu coefficients need a strictly positive Psi")
    if not grid.geometry.is_diagonal:
        raise ConfigurationError("Mezincescu coefficients require a diagonal lattice generator")
    psi = ground_state.on_grid(grid)
    n = grid.n_axis
    rho = []
    for j in range(grid.dimension):
        h_phys = grid.geometry.matrix[j, j] * grid.h
        first = np.take(psi, 0, axis=j)
        last = np.take(psi, n - 1, axis=j)
        # outward normal derivative (ghost - node)/h; left ghost is the periodic image of the last node
        left = -2.0 * (last - first) / (h_phys * (first + last))
        right = -2.0 * (first - last) / (h_phys * (first + last))
        rho.append((left, right))
    return BoundaryCondition(MEZINCESCU, tuple(rho))


def boundary_condition(kind: str, ground_state: PeriodicGroundState | None, grid: BoxGrid) -> BoundaryCondition:
    """Build a boundary condition by tag; Mezincescu needs the periodic ground state."""
    if kind == MEZINCESCU:
        if ground_state is None:
            raise ConfigurationError("Mezincescu boundary condition needs the periodic ground state")
        return mezincescu_coefficients(ground_state, grid)
    return BoundaryCondition(kind)


def write_coo(H: DiscreteHamiltonian, path) -> Path:
    """Dump ``H`` as ``row col value`` lines after a header with dof, h and bc."""
    path = Path(path)
    m = H.matrix.tocoo()
    with path.open("w") as fh:
        fh.write(f"# dof={H.dof} h={H.grid.h!r} bc={H.bc.kind} shift={H.shift!r}\n")
        for r, c, v in zip(m.row, m.col, m.data):
            fh.write(f"{r} {c} {v:.17g}\n")
    return path


def read_coo(path) -> tuple[dict, sp.csr_matrix]:
    """Inverse of :func:`write_coo`; returns the header fields and the matrix."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().lstrip("#").split()
        meta = dict(item.split("=", 1) for item in header)
        data = np.loadtxt(fh, ndmin=2)
    n = int(meta["dof"])
    if data.size == 0:
        return meta, sp.csr_matrix((n, n))
    m = sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n))
    return meta, m.tocsr()


@dataclass(frozen=True)
class SplitOperator:
    """``H`` with the couplings across one cell face removed.

    The two sub-boxes carry the boundary condition of ``H`` on the cut;
    ``matrix`` is block diagonal up to the node ordering of ``H``.
    """

    matrix: sp.csr_matrix
    left: np.ndarray
    right: np.ndarray

    def blocks(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        return self.matrix[self.left][:, self.left], self.matrix[self.right][:, self.right]


def split_operator(H: DiscreteHamiltonian, axis: int = 0, cells_left: int | None = None) -> SplitOperator:
    """Cut the box of ``H`` along a cell face normal to ``axis``.

    ``cells_left`` cells go to the left part (default ``L``).  The removed
    edges are replaced by ghost-factor terms of the same boundary condition,
    with Mezincescu factors computed from the cut face as on the outer faces.
    """
    grid = H.grid
    if H.bc.kind == PERIODIC:
        raise ConfigurationError("splitting is defined for Dirichlet, Neumann and Mezincescu boxes")
    if not grid.geometry.is_diagonal:
        raise ConfigurationError("splitting requires a diagonal lattice generator")
    n_cells = 2 * grid.L + 1
    cells_left = grid.L if cells_left is None else cells_left
    if not 1 <= cells_left < n_cells:
        raise ConfigurationError(f"cells_left must lie in [1, {n_cells - 1}]")
    index = np.arange(grid.dof).reshape(grid.shape)
    cut = cells_left * grid.n_h
    a = np.take(index, cut - 1, axis=axis).ravel()
    b = np.take(index, cut, axis=axis).ravel()
    c = grid.geometry.metric[axis, axis] / grid.h**2
    ghosts = _ghost_factors(H.bc, grid, axis)
    face = np.take(index, 0, axis=axis).shape
    r_left = np.broadcast_to(np.asarray(ghosts[1], dtype=float), face).ravel()
    r_right = np.broadcast_to(np.asarray(ghosts[0], dtype=float), face).ravel()
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([b, a, a, b])
    vals = np.concatenate([np.full(a.size, c), np.full(b.size, c), -c * r_left, -c * r_right])
    m = (H.matrix + sp.coo_matrix((vals, (rows, cols)), shape=H.matrix.shape)).tocsr()
    m.eliminate_zeros()
    coords = np.indices(grid.shape)[axis].ravel()
    left = np.flatnonzero(coords < cut)
    right = np.flatnonzero(coords >= cut)
    return SplitOperator(m, left, right)
