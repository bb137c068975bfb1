"""
Unit Tests for the Symmetric Eigensolver
"""

import numpy as np

from matcha_sim.core.graph import laplacian
from matcha_sim.core.spectral import (algebraic_connectivity, complement_basis, deflated_spectral_norm,
                                      fiedler_space, jacobi_eigen, spectral_norm, sym_eigen)
from matcha_sim.utils.errors import EigenConvergenceError, NonSymmetric
from .base_test import MatchaTestCase


class TestJacobi(MatchaTestCase):
    """Jacobi rotations against LAPACK"""

    def test_matches_lapack_on_random_symmetric_matrices(self):
        rng = np.random.default_rng(11)
        for n in (1, 2, 5, 9, 16, 32, 64):
            a = rng.standard_normal((n, n))
            a = a + a.T
            with self.subTest(n=n):
                result = jacobi_eigen(a)
                self.assertMatrixClose(result.eigenvalues, np.linalg.eigvalsh(a), atol=1e-8)
                self.assertMatrixClose(result.reconstruct(), a, atol=1e-8)
                self.assertMatrixClose(result.eigenvectors.T @ result.eigenvectors, np.eye(n), atol=1e-8)

    def test_sym_eigen_residuals_up_to_64_nodes(self):
        rng = np.random.default_rng(23)
        for n in (8, 32, 64):
            a = rng.uniform(-1.0, 1.0, size=(n, n))
            a = (a + a.T) / 2.0
            for method in ('jacobi', 'lapack'):
                with self.subTest(n=n, method=method):
                    result = sym_eigen(a, method=method)
                    self.assertMatrixClose(result.reconstruct(), a, atol=1e-8)
                    self.assertMatrixClose(result.eigenvectors.T @ result.eigenvectors, np.eye(n), atol=1e-8)

    def test_eigenvalues_ascending(self):
        values = sym_eigen(laplacian(self.star_graph(6)), method='jacobi').eigenvalues
        self.assertTrue(np.all(np.diff(values) >= 0))
        self.assertAlmostEqual(values[0], 0.0, places=10)
        self.assertAlmostEqual(values[-1], 6.0, places=10)

    def test_backends_agree_on_laplacians(self):
        for top in self.random_graphs(5, m=12):
            L = laplacian(top)
            with self.subTest(edges=top.edge_count):
                self.assertAlmostEqual(algebraic_connectivity(L, method='jacobi'),
                                       algebraic_connectivity(L, method='lapack'), delta=1e-8)

    def test_sweep_limit(self):
        a = np.random.default_rng(3).standard_normal((6, 6))
        with self.assertRaises(EigenConvergenceError):
            jacobi_eigen(a + a.T, max_sweeps=0)

    def test_non_symmetric_rejected(self):
        with self.assertRaises(NonSymmetric):
            sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with self.assertRaises(NonSymmetric):
            sym_eigen(np.ones((2, 3)))


class TestDeflation(MatchaTestCase):
    """Helpers working on the complement of the all-ones vector"""

    def test_complement_basis(self):
        for m in (2, 3, 7):
            u = complement_basis(m)
            with self.subTest(m=m):
                self.assertMatrixClose(u.T @ u, np.eye(m - 1), atol=1e-12)
                self.assertMatrixClose(u.T @ np.ones(m), np.zeros(m - 1), atol=1e-12)

    def test_repeated_lambda2_returns_whole_eigenspace(self):
        lam2, basis = fiedler_space(laplacian(self.complete_graph(5)))
        self.assertAlmostEqual(lam2, 5.0, places=10)
        self.assertEqual(basis.shape, (5, 4))

    def test_deflated_norm_equals_norm_minus_projection(self):
        m = 6
        L = laplacian(self.cycle_graph(m))
        W = np.eye(m) - 0.3 * L
        J = np.full((m, m), 1.0 / m)
        self.assertAlmostEqual(deflated_spectral_norm(W @ W), spectral_norm(W @ W - J), places=12)
