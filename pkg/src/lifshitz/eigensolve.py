"""Low-lying spectra of discrete Hamiltonians.

Small problems are diagonalised directly (tridiagonal LAPACK routines for
one-dimensional stencils).  Large problems use a block locally optimal
preconditioned conjugate gradient (LOBPCG) minimisation of the Rayleigh
quotient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConvergenceError, UnresolvedSpectrumError

ITERATIVE = "iterative"
DENSE = "dense"


@dataclass(frozen=True)
class SolverConfig:
    k: int = 1
    tol: float = 1e-8
    max_iter: int = 500
    block_size: int | None = None
    dense_cutoff: int = 2000
    vectors: bool = True
    preconditioner: str = "factorized"
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError("k must be at least 1")
        if not 0 < self.tol < 1e-2:
            raise ConfigurationError("tol must lie in (0, 1e-2)")
        if self.preconditioner not in ("factorized", "jacobi", "none"):
            raise ConfigurationError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    eigenvectors: np.ndarray | None = None
    iterations: int = 0
    method: str = DENSE
    complete: bool = False
    volume: float | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.eigenvalues)

    def shifted(self, gamma: float) -> "SpectralResult":
        return SpectralResult(
            self.eigenvalues - gamma, self.residuals, self.eigenvectors, self.iterations, self.method, self.complete, self.volume
        )


def _as_matrix(H):
    m = getattr(H, "matrix", H)
    return m


def _volume(H):
    grid = getattr(H, "grid", None)
    return grid.volume if grid is not None else None


def _norm_bound(m) -> float:
    if sp.issparse(m):
        return float(np.max(np.asarray(abs(m).sum(axis=1)).ravel()))
    return float(np.max(np.abs(m).sum(axis=1)))


def _residuals(m, vals, vecs) -> np.ndarray:
    return np.linalg.norm(m @ vecs - vecs * vals, axis=0)


def _tridiagonal(m):
    """Diagonal and off-diagonal if ``m`` is tridiagonal, else None."""
    if not sp.issparse(m):
        return None
    c = m.tocoo()
    if c.nnz and np.max(np.abs(c.row - c.col)) > 1:
        return None
    return m.diagonal(), m.diagonal(1)


def dense_spectrum(H, dense_cutoff: int = 2000, vectors: bool = True) -> SpectralResult:
    """Full spectrum by dense symmetric diagonalisation."""
    m = _as_matrix(H)
    n = m.shape[0]
    if n > dense_cutoff:
        raise ConfigurationError(f"dense spectrum refused: dof {n} exceeds cutoff {dense_cutoff}")
    a = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)
    if vectors:
        vals, vecs = np.linalg.eigh(a)
        res = _residuals(a, vals, vecs)
    else:
        vals, vecs = np.linalg.eigvalsh(a), None
        res = np.zeros_like(vals)
    return SpectralResult(vals, res, vecs, 0, DENSE, True, _volume(H))


def _direct_lowest(m, k: int, vectors: bool):
    tri = _tridiagonal(m)
    if tri is not None:
        d, e = tri
        if vectors:
            vals, vecs = la.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
        else:
            vals = la.eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, k - 1))
            vecs = None
        return vals, vecs
    a = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)
    if vectors:
        vals, vecs = la.eigh(a, subset_by_index=(0, k - 1))
    else:
        vals, vecs = la.eigh(a, subset_by_index=(0, k - 1), eigvals_only=True), None
    return vals, vecs


def _preconditioner(m, kind: str, shift: float):
    n = m.shape[0]
    if kind == "none":
        return lambda r: r
    if kind == "jacobi":
        diag = m.diagonal() - shift
        diag = np.where(np.abs(diag) > 1e-14, np.abs(diag), 1.0)
        return lambda r: r / diag[:, None]
    lu = spla.splu(sp.csc_matrix(m - shift * sp.identity(n)))
    return lu.solve


def _orthonormal_basis(S: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    u, s, _ = np.linalg.svd(S, full_matrices=False)
    keep = s > rtol * s[0]
    return u[:, keep]


def lobpcg(m, k: int, tol: float, max_iter: int, block_size: int | None = None, preconditioner: str = "factorized", seed: int = 0):
    """Lowest ``k`` eigenpairs of the symmetric matrix ``m`` by LOBPCG.

    Returns ``(values, vectors, residuals, iterations)``.  Raises
    :class:`ConvergenceError` with the best residuals on failure.
    """
    n = m.shape[0]
    bs = block_size or min(n, k + max(2, k // 2))
    if bs < k or 3 * bs > n:
        raise ConfigurationError(f"block size {bs} unusable for k={k}, n={n}")
    scale = _norm_bound(m)
    diag = m.diagonal()
    off = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(diag) if sp.issparse(m) else np.abs(m).sum(axis=1) - np.abs(diag)
    lower = float(np.min(diag - off))
    shift = lower - 1e-3 * max(scale, 1.0)
    T = _preconditioner(m, preconditioner, shift)

    rng = np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), n]))
    X = _orthonormal_basis(rng.standard_normal((n, bs)))
    AX = m @ X
    theta, C = np.linalg.eigh(X.T @ AX)
    X, AX = X @ C, AX @ C
    P = None
    best = np.full(k, np.inf)
    for it in range(1, max_iter + 1):
        R = AX - X * theta
        res = np.linalg.norm(R, axis=0)
        best = np.minimum(best, res[:k])
        if np.all(res[:k] <= tol * (np.abs(theta[:k]) + scale)):
            return theta[:k], X[:, :k], res[:k], it
        W = T(R)
        blocks = [X, W] if P is None else [X, W, P]
        Q = _orthonormal_basis(np.hstack(blocks))
        AQ = m @ Q
        G = Q.T @ AQ
        vals, V = np.linalg.eigh(0.5 * (G + G.T))
        Xn = Q @ V[:, :bs]
        AXn = AQ @ V[:, :bs]
        P = Xn - X @ (X.T @ Xn)
        X, AX, theta = Xn, AXn, vals[:bs]
    raise ConvergenceError(f"LOBPCG did not converge in {max_iter} iterations", residuals=best, eigenvalues=theta[:k])


def lowest_eigenpairs(H, cfg: SolverConfig = SolverConfig()) -> SpectralResult:
    """The ``cfg.k`` smallest eigenpairs of ``H`` (a DiscreteHamiltonian or a matrix)."""
    m = _as_matrix(H)
    n = m.shape[0]
    if cfg.k > n:
        raise ConfigurationError(f"k={cfg.k} exceeds dof {n}")
    if n <= cfg.dense_cutoff or 3 * (cfg.block_size or cfg.k + max(2, cfg.k // 2)) > n:
        vals, vecs = _direct_lowest(m, cfg.k, cfg.vectors)
        res = _residuals(m, vals, vecs) if vecs is not None else np.zeros_like(vals)
        return SpectralResult(np.asarray(vals), res, vecs, 0, DENSE, cfg.k == n, _volume(H))
    mm = sp.csr_matrix(m) if not sp.issparse(m) else m
    vals, vecs, res, it = lobpcg(mm, cfg.k, cfg.tol, cfg.max_iter, cfg.block_size, cfg.preconditioner, cfg.seed)
    order = np.argsort(vals)
    vals, vecs, res = vals[order], vecs[:, order], res[order]
    return SpectralResult(vals, res, vecs if cfg.vectors else None, it, ITERATIVE, cfg.k == n, _volume(H))


def ground_energy(H, cfg: SolverConfig = SolverConfig(vectors=False)) -> float:
    return float(lowest_eigenpairs(H, cfg).eigenvalues[0])


def counting_function(spectrum, E: float) -> int:
    """``#{eigenvalues <= E}``.

    ``spectrum`` is a :class:`SpectralResult` or an array holding the complete
    spectrum.  A partial spectrum must extend strictly above ``E``.
    """
    if isinstance(spectrum, SpectralResult):
        vals, complete = np.asarray(spectrum.eigenvalues), spectrum.complete
    else:
        vals, complete = np.asarray(spectrum), True
    count = int(np.searchsorted(np.sort(vals), E, side="right"))
    if not complete and count == len(vals):
        raise UnresolvedSpectrumError(f"E={E} is not below the highest computed eigenvalue; increase k")
    return count


def normalized_counting(spectrum, E: float, volume: float | None = None) -> float:
    """``|Lambda|^{-1} #{eigenvalues <= E}``."""
    volume = volume if volume is not None else getattr(spectrum, "volume", None)
    if volume is None:
        raise ConfigurationError("normalized counting needs the box volume")
    return counting_function(spectrum, E) / volume
