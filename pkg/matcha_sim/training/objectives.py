"""
Training Objectives - Per-worker losses with seeded stochastic gradient oracles
F(x) = (1/m) sum_i F_i(x); worker i owns row i of every m x d model matrix
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import expit

from matcha_sim.core.graph import UINT64_MASK
from matcha_sim.utils.errors import InvalidParameter

logger = logging.getLogger(__name__)


class Objective(ABC):
    """
    Stochastic objective split across m workers

    @class Objective
    @property {int} num_workers - m
    @property {int} dimension - d
    @property {float} lipschitz - Smoothness constant L (None if unknown)
    @property {float} sigma_sq - Gradient-noise variance bound (None if unknown)
    @property {float} zeta_sq - Heterogeneity bound (None if unknown)
    @property {float} f_inf - Minimum of F (None if unknown)
    """

    name = "objective"

    def __init__(self, num_workers: int, dimension: int):
        if num_workers < 1 or dimension < 1:
            raise InvalidParameter(f"need m >= 1 and d >= 1, got m={num_workers}, d={dimension}")
        self.num_workers = int(num_workers)
        self.dimension = int(dimension)
        self.lipschitz: Optional[float] = None
        self.sigma_sq: Optional[float] = None
        self.zeta_sq: Optional[float] = None
        self.f_inf: Optional[float] = None

    @abstractmethod
    def loss(self, x: np.ndarray) -> float:
        """F(x) at a single model"""

    @abstractmethod
    def local_gradients(self, X: np.ndarray) -> np.ndarray:
        """Exact gradients: row i is grad F_i(X[i])"""

    @abstractmethod
    def gradient_noise(self, rng: np.random.Generator, X: np.ndarray) -> np.ndarray:
        """Zero-mean m x d noise added to the exact gradients"""

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """grad F(x) = (1/m) sum_i grad F_i(x)"""
        X = np.tile(np.asarray(x, dtype=float), (self.num_workers, 1))
        return self.local_gradients(X).mean(axis=0)

    def stochastic_gradients(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """
        One stochastic gradient per worker

        @param {np.ndarray} X - m x d worker models
        @param {np.random.Generator} rng - Generator of this iteration (row i belongs to worker i)
        @returns {np.ndarray} m x d gradient estimates, unbiased for local_gradients(X)
        """
        return self.local_gradients(X) + self.gradient_noise(rng, X)

    def stochastic_gradient(self, worker: int, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Single-worker oracle g(x; xi) for worker i"""
        X = np.tile(np.asarray(x, dtype=float), (self.num_workers, 1))
        return self.stochastic_gradients(X, rng)[worker]

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dimension)

    def describe(self) -> Dict[str, Any]:
        return {
            "objective": self.name,
            "m": self.num_workers,
            "d": self.dimension,
            "L": self.lipschitz,
            "sigma_sq": self.sigma_sq,
            "zeta_sq": self.zeta_sq,
            "F_inf": self.f_inf,
        }


class QuadraticObjective(Objective):
    """
    Heterogeneous least squares F_i(x) = 1/2 ||A x - b_i||^2 with Gaussian gradient noise

    The shared A makes grad F_i - grad F = -A^T (b_i - b_bar) independent of x,
    so the heterogeneity is a constant published exactly.
    """

    name = "quadratic"

    def __init__(self, A: np.ndarray, b: np.ndarray, sigma: float = 0.0,
                 x0: Optional[np.ndarray] = None):
        """
        @param {np.ndarray} A - d x d design matrix shared by all workers
        @param {np.ndarray} b - m x d per-worker targets
        @param {float} sigma - Noise standard deviation (E||noise||^2 = sigma^2)
        @param {np.ndarray} x0 - Initial model (zeros by default)
        """
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if A.shape[0] != A.shape[1] or b.shape[1] != A.shape[0]:
            raise InvalidParameter(f"A must be d x d and b m x d, got {A.shape} and {b.shape}")
        if sigma < 0:
            raise InvalidParameter(f"sigma must be >= 0, got {sigma}")
        super().__init__(b.shape[0], A.shape[0])
        self.A = A
        self.b = b
        self.b_bar = b.mean(axis=0)
        self.sigma = float(sigma)
        self._hessian = A.T @ A
        self._x0 = np.zeros(self.dimension) if x0 is None else np.asarray(x0, dtype=float).reshape(self.dimension)

        self.lipschitz = float(np.linalg.eigvalsh(self._hessian)[-1])
        self.sigma_sq = self.sigma ** 2
        offsets = (b - self.b_bar) @ A
        self.zeta_sq = float(np.mean(np.sum(offsets ** 2, axis=1)))
        x_star = np.linalg.lstsq(A, self.b_bar, rcond=None)[0]
        self.x_star = x_star
        self.f_inf = self.loss(x_star)

    @classmethod
    def synthetic(cls, num_workers: int, dimension: int, lipschitz: float = 1.0, mu: float = 0.1,
                  sigma: float = 1.0, zeta: float = 1.0, seed: int = 0) -> 'QuadraticObjective':
        """
        Build a testbed with prescribed L, strong convexity mu, sigma and zeta

        A = diag(s) Q^T with singular values spread from sqrt(mu) to sqrt(L);
        b_i = b_bar + A^{-T} u_i with centered u_i scaled to (1/m) sum ||u_i||^2 = zeta^2.

        @param {int} num_workers - m
        @param {int} dimension - d
        @param {float} lipschitz - Largest eigenvalue of A^T A
        @param {float} mu - Smallest eigenvalue of A^T A
        @param {float} sigma - Gradient-noise standard deviation
        @param {float} zeta - Heterogeneity (ignored for m = 1)
        @param {int} seed - Data seed
        @returns {QuadraticObjective} Testbed
        """
        if not 0 < mu <= lipschitz:
            raise InvalidParameter(f"need 0 < mu <= L, got mu={mu}, L={lipschitz}")
        if zeta < 0:
            raise InvalidParameter(f"zeta must be >= 0, got {zeta}")
        rng = np.random.default_rng([int(seed) & UINT64_MASK, 17])
        q, r = np.linalg.qr(rng.standard_normal((dimension, dimension)))
        q = q * np.sign(np.diag(r))
        s = np.sqrt(np.linspace(mu, lipschitz, dimension)) if dimension > 1 else np.sqrt([lipschitz])
        A = np.diag(s) @ q.T

        b_bar = rng.standard_normal(dimension)
        u = rng.standard_normal((num_workers, dimension))
        u -= u.mean(axis=0)
        scale = np.sqrt(np.mean(np.sum(u ** 2, axis=1)))
        if num_workers == 1 or zeta == 0 or scale == 0:
            if zeta > 0:
                logger.warning("single worker: heterogeneity forced to zero")
            u = np.zeros_like(u)
        else:
            u *= zeta / scale
        b = b_bar + np.linalg.solve(A.T, u.T).T
        return cls(A, b, sigma=sigma)

    def loss(self, x: np.ndarray) -> float:
        residual = self.A @ np.asarray(x, dtype=float) - self.b
        return float(0.5 * np.mean(np.sum(residual ** 2, axis=1)))

    def local_gradients(self, X: np.ndarray) -> np.ndarray:
        return X @ self._hessian - self.b @ self.A

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self._hessian @ np.asarray(x, dtype=float) - self.A.T @ self.b_bar

    def gradient_noise(self, rng: np.random.Generator, X: np.ndarray) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros_like(X)
        return (self.sigma / np.sqrt(self.dimension)) * rng.standard_normal(X.shape)

    def initial_point(self) -> np.ndarray:
        return self._x0.copy()


class LogisticObjective(Objective):
    """
    l2-regularized logistic regression on Gaussian blobs with label-skewed partitions

    Worker i holds samples_per_worker points; its positive-class fraction moves
    linearly from 1/2 - skew/2 (worker 0) to 1/2 + skew/2 (worker m-1).
    Stochastic gradients use a minibatch drawn with replacement.
    """

    name = "logistic"

    def __init__(self, num_workers: int, dimension: int, samples_per_worker: int = 200,
                 batch_size: int = 8, label_skew: float = 0.5, separation: float = 1.0,
                 regularization: float = 0.1, seed: int = 0):
        super().__init__(num_workers, dimension)
        if samples_per_worker < 1 or batch_size < 1:
            raise InvalidParameter("samples_per_worker and batch_size must be >= 1")
        if not 0.0 <= label_skew <= 1.0:
            raise InvalidParameter(f"label_skew must lie in [0, 1], got {label_skew}")
        if regularization < 0:
            raise InvalidParameter(f"regularization must be >= 0, got {regularization}")
        self.samples_per_worker = int(samples_per_worker)
        self.batch_size = int(batch_size)
        self.regularization = float(regularization)

        rng = np.random.default_rng([int(seed) & UINT64_MASK, 23])
        direction = rng.standard_normal(dimension)
        direction *= separation / np.linalg.norm(direction)
        if num_workers > 1:
            fractions = 0.5 + 0.5 * label_skew * (2.0 * np.arange(num_workers) / (num_workers - 1) - 1.0)
        else:
            fractions = np.array([0.5])
        n = self.samples_per_worker
        labels = np.where(np.arange(n)[None, :] < np.round(fractions[:, None] * n), 1.0, -1.0)
        features = labels[..., None] * direction + rng.standard_normal((num_workers, n, dimension))
        self.features = features          # m x n x d
        self.labels = labels              # m x n

        per_worker = [np.linalg.eigvalsh(f.T @ f)[-1] for f in features]
        self.lipschitz = float(max(per_worker) / (4.0 * n) + self.regularization)

    def loss(self, x: np.ndarray) -> float:
        margins = self.labels * (self.features @ np.asarray(x, dtype=float))
        data_term = np.mean(np.logaddexp(0.0, -margins))
        return float(data_term + 0.5 * self.regularization * np.dot(x, x))

    def _batch_gradients(self, X: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        margins = labels * np.einsum('ind,id->in', features, X)
        weights = -labels * expit(-margins)
        return np.einsum('in,ind->id', weights, features) / labels.shape[1] + self.regularization * X

    def local_gradients(self, X: np.ndarray) -> np.ndarray:
        return self._batch_gradients(X, self.features, self.labels)

    def stochastic_gradients(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self.samples_per_worker, size=(self.num_workers, self.batch_size))
        rows = np.arange(self.num_workers)[:, None]
        return self._batch_gradients(X, self.features[rows, idx], self.labels[rows, idx])

    def gradient_noise(self, rng: np.random.Generator, X: np.ndarray) -> np.ndarray:
        return self.stochastic_gradients(X, rng) - self.local_gradients(X)


class ZeroObjective(Objective):
    """F = 0 everywhere; runs reduce to pure consensus averaging"""

    name = "zero"

    def __init__(self, num_workers: int, dimension: int):
        super().__init__(num_workers, dimension)
        self.lipschitz = 0.0
        self.sigma_sq = 0.0
        self.zeta_sq = 0.0
        self.f_inf = 0.0

    def loss(self, x: np.ndarray) -> float:
        return 0.0

    def local_gradients(self, X: np.ndarray) -> np.ndarray:
        return np.zeros_like(X, dtype=float)

    def gradient_noise(self, rng: np.random.Generator, X: np.ndarray) -> np.ndarray:
        return np.zeros_like(X, dtype=float)


OBJECTIVES = {
    QuadraticObjective.name: QuadraticObjective,
    LogisticObjective.name: LogisticObjective,
    ZeroObjective.name: ZeroObjective,
}


def make_objective(kind: str, num_workers: int, dimension: int, seed: int = 0,
                   params: Optional[Dict[str, Any]] = None) -> Objective:
    """
    Build an objective by name

    @param {str} kind - 'quadratic', 'logistic' or 'zero'
    @param {int} num_workers - m
    @param {int} dimension - d
    @param {int} seed - Data seed
    @param {dict} params - Objective-specific keyword arguments
    @returns {Objective} Objective instance
    @throws {InvalidParameter} Unknown kind or bad keyword
    """
    params = dict(params or {})
    try:
        if kind == QuadraticObjective.name:
            return QuadraticObjective.synthetic(num_workers, dimension, seed=seed, **params)
        if kind == LogisticObjective.name:
            return LogisticObjective(num_workers, dimension, seed=seed, **params)
        if kind == ZeroObjective.name:
            return ZeroObjective(num_workers, dimension, **params)
    except TypeError as e:
        raise InvalidParameter(f"bad parameters for {kind} objective: {e}")
    raise InvalidParameter(f"unknown objective {kind!r}; expected one of {sorted(OBJECTIVES)}")
