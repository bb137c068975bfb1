"""
Symmetric Eigensolver and Spectral Helpers
Cyclic Jacobi rotations, a LAPACK backend, and lambda_2 by deflating the all-ones direction
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from matcha_sim.config import get_config
from matcha_sim.constants import SolverDefaults, Tolerances
from matcha_sim.utils.errors import EigenConvergenceError, NonSymmetric

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SymEigenResult:
    """
    Full spectral decomposition of a real symmetric matrix

    @property {np.ndarray} eigenvalues - Ascending eigenvalues
    @property {np.ndarray} eigenvectors - Orthonormal columns, column i pairs with eigenvalues[i]
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def check_symmetric(matrix: np.ndarray, tol: float = Tolerances.SYMMETRY) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > tol * scale:
        raise NonSymmetric(f"matrix asymmetry {asym:.3e} exceeds tolerance")
    return a


def jacobi_eigen(matrix: np.ndarray,
                 tol: float = Tolerances.JACOBI_OFF_DIAGONAL,
                 max_sweeps: int = SolverDefaults.JACOBI_MAX_SWEEPS) -> SymEigenResult:
    """
    Cyclic Jacobi eigensolver

    Sweeps over all (p, q) pairs in row order, zeroing a[p, q] with a Givens
    rotation, until the off-diagonal Frobenius norm is below
    tol * max(1, ||A||_F).

    @param {np.ndarray} matrix - Symmetric matrix (not modified)
    @param {float} tol - Relative off-diagonal residual
    @param {int} max_sweeps - Sweep limit
    @returns {SymEigenResult} Ascending eigenpairs
    @throws {EigenConvergenceError} When max_sweeps is exhausted
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))

    for sweep in range(max_sweeps + 1):
        off = np.sqrt(max(0.0, float(np.sum(a * a) - np.sum(np.diag(a) ** 2))))
        if off <= threshold:
            break
        if sweep == max_sweeps:
            raise EigenConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps (residual {off:.3e})")
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    values = np.diag(a).copy()
    order = np.argsort(values, kind='stable')
    return SymEigenResult(eigenvalues=values[order], eigenvectors=v[:, order])


@lru_cache(maxsize=1)
def default_backend() -> str:
    """Eigen backend from MATCHA_EIGEN_BACKEND, read once per process"""
    return get_config().eigen_backend


def sym_eigen(matrix: np.ndarray, method: Optional[str] = None) -> SymEigenResult:
    """
    Spectral decomposition of a symmetric matrix

    @param {np.ndarray} matrix - Square symmetric real matrix (asymmetry <= 1e-12 relative)
    @param {str} method - 'jacobi' or 'lapack'; defaults to MATCHA_EIGEN_BACKEND
    @returns {SymEigenResult} Ascending eigenvalues with orthonormal eigenvectors
    @throws {NonSymmetric} If the input is not symmetric
    """
    a = check_symmetric(matrix)
    method = method or default_backend()
    if method == 'jacobi':
        return jacobi_eigen(a)
    # eigh reads one triangle only; symmetrize so both triangles agree
    values, vectors = np.linalg.eigh(0.5 * (a + a.T))
    return SymEigenResult(eigenvalues=values, eigenvectors=vectors)


@lru_cache(maxsize=64)
def _complement_basis(m: int) -> np.ndarray:
    ones = np.ones((m, 1)) / np.sqrt(m)
    q, _ = np.linalg.qr(np.hstack([ones, np.eye(m)[:, :m - 1]]))
    basis = q[:, 1:]
    basis.setflags(write=False)
    return basis


def complement_basis(m: int) -> np.ndarray:
    """
    Orthonormal basis of the subspace orthogonal to the all-ones vector

    @param {int} m - Dimension
    @returns {np.ndarray} m x (m-1) read-only matrix U with U^T U = I and U^T 1 = 0
    """
    return _complement_basis(int(m))


def deflated_eigen(matrix: np.ndarray, method: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenpairs of a symmetric matrix restricted to the complement of all-ones

    @returns {tuple} (ascending eigenvalues, m x (m-1) eigenvectors lifted back to R^m)
    """
    a = check_symmetric(matrix)
    m = a.shape[0]
    if m < 2:
        return np.zeros(0), np.zeros((m, 0))
    u = complement_basis(m)
    result = sym_eigen(u.T @ a @ u, method=method)
    return result.eigenvalues, u @ result.eigenvectors


def algebraic_connectivity(laplacian: np.ndarray, method: Optional[str] = None) -> float:
    """
    lambda_2 of a Laplacian: smallest eigenvalue on the complement of all-ones

    @param {np.ndarray} laplacian - Graph (or expected-graph) Laplacian
    @returns {float} Nonnegative second-smallest eigenvalue (0.0 for a single node)
    """
    values, _ = deflated_eigen(laplacian, method=method)
    if values.size == 0:
        return 0.0
    return max(0.0, float(values[0]))


def fiedler_space(laplacian: np.ndarray,
                  eigengap: float = Tolerances.EIGENGAP,
                  method: Optional[str] = None) -> Tuple[float, np.ndarray]:
    """
    lambda_2 and an orthonormal basis of its eigenspace

    Eigenvalues within `eigengap` of lambda_2 are treated as one eigenspace.

    @returns {tuple} (lambda_2, m x r matrix of unit Fiedler vectors)
    """
    values, vectors = deflated_eigen(laplacian, method=method)
    if values.size == 0:
        return 0.0, np.zeros((laplacian.shape[0], 0))
    multiplicity = int(np.sum(values - values[0] < eigengap))
    return float(values[0]), vectors[:, :multiplicity]


def deflated_spectral_norm(matrix: np.ndarray, method: Optional[str] = None) -> float:
    """
    Spectral norm of a symmetric matrix on the complement of all-ones

    @returns {float} max |eigenvalue| of U^T A U
    """
    values, _ = deflated_eigen(matrix, method=method)
    if values.size == 0:
        return 0.0
    return float(max(abs(values[0]), abs(values[-1])))


def spectral_norm(matrix: np.ndarray, method: Optional[str] = None) -> float:
    values = sym_eigen(matrix, method=method).eigenvalues
    if values.size == 0:
        return 0.0
    return float(max(abs(values[0]), abs(values[-1])))
