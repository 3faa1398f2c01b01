import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from lifshitz.eigensolve import (
    SolverConfig,
    counting_function,
    dense_spectrum,
    ground_energy,
    lobpcg,
    lowest_eigenpairs,
    normalized_counting,
)
from lifshitz.errors import ConfigurationError, ConvergenceError, UnresolvedSpectrumError
from lifshitz.lattice import BoxGrid
from lifshitz.operators import DIRICHLET, NEUMANN, assemble_hamiltonian
from lifshitz.potential import PeriodicBackground


def laplacian(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def random_sparse_symmetric(rng, n, density=0.02):
    a = sp.random(n, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    return (a + a.T + sp.diags(rng.uniform(0, 4, n))).tocsr()


class TestLowest:
    def test_three_point_laplacian(self):
        res = lowest_eigenpairs(laplacian(3), SolverConfig(k=3))
        np.testing.assert_allclose(res.eigenvalues, [2 - math.sqrt(2), 2, 2 + math.sqrt(2)], atol=1e-12)
        assert res.complete

    def test_neumann_ground_state(self, line):
        H = assemble_hamiltonian(PeriodicBackground(), None, BoxGrid(line, 3, 8), NEUMANN)
        res = lowest_eigenpairs(H, SolverConfig(k=2))
        assert abs(res.eigenvalues[0]) < 1e-10
        v = res.eigenvectors[:, 0]
        assert np.allclose(v / v[0], 1.0)

    def test_iterative_matches_dense_random(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((50, 50))
        a = (a + a.T) / 2
        vals, vecs, res, _ = lobpcg(sp.csr_matrix(a), 5, 1e-10, 500)
        np.testing.assert_allclose(np.sort(vals), np.linalg.eigvalsh(a)[:5], atol=1e-8)

    @pytest.mark.parametrize("pre", ["factorized", "jacobi", "none"])
    def test_preconditioners_agree(self, pre):
        m = laplacian(300) + sp.diags(np.linspace(0, 1, 300))
        cfg = SolverConfig(k=4, dense_cutoff=10, preconditioner=pre, max_iter=3000)
        res = lowest_eigenpairs(m, cfg)
        assert res.method == "iterative"
        np.testing.assert_allclose(res.eigenvalues, np.linalg.eigvalsh(m.toarray())[:4], rtol=1e-8, atol=1e-12)

    def test_oracle_equivalence_sparse(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(40, 501))
            m = random_sparse_symmetric(rng, n)
            k = int(rng.integers(1, 6))
            it = lowest_eigenpairs(m, SolverConfig(k=k, tol=1e-10, dense_cutoff=10, max_iter=2000))
            ref = np.linalg.eigvalsh(m.toarray())[:k]
            scale = max(1.0, np.max(np.abs(ref)))
            assert np.max(np.abs(it.eigenvalues - ref)) <= 1e-8 * scale

    def test_dirichlet_box_tridiagonal_path(self, line):
        grid = BoxGrid(line, 20, 8)
        H = assemble_hamiltonian(PeriodicBackground(), None, grid, DIRICHLET)
        res = lowest_eigenpairs(H, SolverConfig(k=3, dense_cutoff=100_000))
        n = grid.n_axis
        expected = 2 / grid.h**2 * (1 - np.cos(np.arange(1, 4) * np.pi / n))
        np.testing.assert_allclose(res.eigenvalues, expected, rtol=1e-10)
        assert np.all(res.residuals < 1e-8)

    def test_convergence_failure_reports_residuals(self):
        with pytest.raises(ConvergenceError) as info:
            lobpcg(laplacian(400), 3, 1e-14, 1, preconditioner="none")
        assert info.value.residuals is not None

    def test_k_larger_than_dof(self):
        with pytest.raises(ConfigurationError):
            lowest_eigenpairs(laplacian(3), SolverConfig(k=4))

    def test_bad_config(self):
        with pytest.raises(ConfigurationError):
            SolverConfig(k=0)
        with pytest.raises(ConfigurationError):
            SolverConfig(tol=0.5)

    def test_ground_energy(self):
        assert ground_energy(laplacian(3)) == pytest.approx(2 - math.sqrt(2))


class TestDense:
    def test_diagonal(self):
        assert dense_spectrum(np.diag([3.0, 1.0, 2.0])).eigenvalues.tolist() == pytest.approx([1, 2, 3])

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
    def test_two_by_two(self, a, b, c):
        vals = dense_spectrum(np.array([[a, b], [b, c]])).eigenvalues
        disc = math.sqrt((a - c) ** 2 + 4 * b * b)
        np.testing.assert_allclose(vals, [(a + c - disc) / 2, (a + c + disc) / 2], atol=1e-12)

    @given(st.integers(2, 20), st.floats(-10, 10), st.integers(0, 2**32))
    def test_shift(self, n, gamma, seed):
        a = np.random.default_rng(seed).standard_normal((n, n))
        a = a + a.T
        lhs = dense_spectrum(a - gamma * np.eye(n)).eigenvalues
        np.testing.assert_allclose(lhs, dense_spectrum(a).eigenvalues - gamma, atol=1e-10)

    def test_cutoff(self):
        with pytest.raises(ConfigurationError):
            dense_spectrum(np.eye(20), dense_cutoff=10)

    def test_residuals_small(self):
        a = np.random.default_rng(0).standard_normal((30, 30))
        assert np.max(dense_spectrum(a + a.T).residuals) < 1e-12


class TestCounting:
    def test_simple_counts(self):
        assert counting_function(np.array([1.0, 2.0, 3.0]), 2.5) == 2
        assert counting_function(np.array([1.0, 2.0, 3.0]), 0.5) == 0
        assert counting_function(np.array([1.0, 2.0, 3.0]), 3.0) == 3

    def test_partial_spectrum_guard(self):
        res = lowest_eigenpairs(laplacian(50), SolverConfig(k=2))
        assert counting_function(res, res.eigenvalues[0]) == 1
        with pytest.raises(UnresolvedSpectrumError):
            counting_function(res, res.eigenvalues[1] + 1.0)

    def test_weyl_law(self, line):
        grid = BoxGrid(line, 50, 8)
        spectrum = dense_spectrum(assemble_hamiltonian(PeriodicBackground(), None, grid, DIRICHLET), vectors=False)
        for E in (1.0, 4.0, 9.0):
            assert normalized_counting(spectrum, E) / (math.sqrt(E) / math.pi) == pytest.approx(1.0, rel=0.05)

    def test_normalisation_needs_volume(self):
        with pytest.raises(ConfigurationError):
            normalized_counting(np.array([1.0]), 2.0)
