"""
Convergence Theory - Non-asymptotic bound on the averaged gradient norm of decentralized SGD
"""

import math
from dataclasses import dataclass

from matcha_sim.utils.errors import InvalidParameter, StepSizeViolation


@dataclass(frozen=True)
class TheoryConstants:
    """
    Problem constants entering the bound

    @property {float} f_initial - F(x_bar(1))
    @property {float} f_inf - Lower bound of F
    @property {float} lipschitz - L
    @property {float} sigma_sq - Gradient-noise variance bound
    @property {float} zeta_sq - Heterogeneity bound
    @property {int} m - Workers
    @property {int} K - Iterations
    @property {float} eta - Learning rate
    """
    f_initial: float
    f_inf: float
    lipschitz: float
    sigma_sq: float
    zeta_sq: float
    m: int
    K: int
    eta: float


def theory_learning_rate(m: int, K: int) -> float:
    """eta = sqrt(m / K), the rate giving the linear-speedup regime"""
    if m < 1 or K < 1:
        raise InvalidParameter(f"need m >= 1 and K >= 1, got m={m}, K={K}")
    return math.sqrt(m / K)


def _step_limit(rho: float) -> float:
    return 1.0 if rho == 0 else min(1.0, (1.0 / math.sqrt(rho) - 1.0) / 4.0)


def max_step_size(lipschitz: float, rho: float) -> float:
    """Largest eta with eta L <= min(1, (1/sqrt(rho) - 1) / 4)"""
    limit = _step_limit(rho)
    return math.inf if lipschitz == 0 else limit / lipschitz


def theorem2_bound(constants: TheoryConstants, rho: float) -> float:
    """
    Upper bound on (1/K) sum_k E||grad F(x_bar(k))||^2

    With D = 6 eta^2 L^2 rho / (1 - sqrt(rho))^2 the bound is
      (2 [F1 - Finf] / (eta K) + eta L sigma^2 / m) / (1 - 2D)
      + (2 eta^2 L^2 rho / (1 - sqrt(rho))) (sigma^2 / (1 + sqrt(rho)) + 3 zeta^2 / (1 - sqrt(rho))) / (1 - 2D)

    @param {TheoryConstants} constants - Problem constants and eta
    @param {float} rho - Spectral norm in [0, 1)
    @returns {float} Right-hand side of the bound
    @throws {StepSizeViolation} eta outside the range where the bound holds
    """
    c = constants
    if not 0.0 <= rho < 1.0:
        raise InvalidParameter(f"rho must lie in [0, 1), got {rho}")
    if c.eta <= 0 or c.K < 1 or c.m < 1 or c.lipschitz < 0:
        raise InvalidParameter("need eta > 0, K >= 1, m >= 1, L >= 0")
    if c.sigma_sq < 0 or c.zeta_sq < 0:
        raise InvalidParameter("sigma^2 and zeta^2 must be >= 0")

    eta_l = c.eta * c.lipschitz
    limit = _step_limit(rho)
    if eta_l > limit:
        raise StepSizeViolation(f"eta*L={eta_l:.6g} exceeds {limit:.6g} for rho={rho:.6g}")

    sqrt_rho = math.sqrt(rho)
    D = 6.0 * eta_l ** 2 * rho / (1.0 - sqrt_rho) ** 2
    if D >= 0.5:
        raise StepSizeViolation(f"D={D:.6g} must be below 1/2")

    optimization = 2.0 * (c.f_initial - c.f_inf) / (c.eta * c.K) + eta_l * c.sigma_sq / c.m
    network = (2.0 * eta_l ** 2 * rho / (1.0 - sqrt_rho)) * (
        c.sigma_sq / (1.0 + sqrt_rho) + 3.0 * c.zeta_sq / (1.0 - sqrt_rho))
    return (optimization + network) / (1.0 - 2.0 * D)
