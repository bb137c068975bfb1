"""
Mixing Optimizer - Consensus weight alpha minimizing the spectral norm rho
W(k) = I - alpha * L(k);  rho(alpha) = || I - 2 alpha Lbar + alpha^2 (Lbar^2 + 2 Ltilde) - J ||_2
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from matcha_sim.constants import Tolerances
from matcha_sim.core.budget import ActivationPlan
from matcha_sim.core.graph import averaging_matrix, is_connected, laplacian
from matcha_sim.core.matching import MatchingDecomposition
from matcha_sim.core.spectral import algebraic_connectivity, deflated_spectral_norm, spectral_norm, sym_eigen
from matcha_sim.utils.errors import DegeneratePlan, Disconnected, InvalidParameter, NonContractive

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SdpCertificate:
    """
    Constraint check of the spectral-norm SDP at (rho, alpha, beta)

    @property {float} alpha_beta_gap - alpha^2 - beta (must be <= 0)
    @property {float} lmi_slack - lambda_max(I - 2 alpha Lbar + beta (Lbar^2 + 2 Ltilde) - J - rho I)
    """
    alpha_beta_gap: float
    lmi_slack: float

    @property
    def satisfied(self) -> bool:
        return self.alpha_beta_gap <= 0.0 and self.lmi_slack <= Tolerances.SDP_EIGEN_SLACK


@dataclass(frozen=True, eq=False)
class MixingParams:
    """
    Optimized consensus weight and the moments it was optimized for

    @class MixingParams
    @property {float} alpha - Consensus weight
    @property {float} rho - Spectral norm at alpha
    @property {np.ndarray} L_bar - E[L(k)]
    @property {np.ndarray} L_tilde - Half the covariance term (sum_j p_j (1 - p_j) L_j for MATCHA)
    @property {float} beta - SDP auxiliary variable, equal to alpha^2 at the optimum
    @property {float} budget - C_b the moments belong to
    @property {float} expected_comm_time - Expected matching rounds per iteration
    @property {SdpCertificate} certificate - Constraint check at the solution
    """
    alpha: float
    rho: float
    L_bar: np.ndarray
    L_tilde: np.ndarray
    beta: float
    budget: float = 1.0
    expected_comm_time: float = 0.0
    certificate: Optional[SdpCertificate] = None

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "rho": self.rho,
            "C_b": self.budget,
            "expected_comm_time": self.expected_comm_time,
        }


def matcha_moments(decomp: MatchingDecomposition, p: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Moments of L(k) = sum_j B_j L_j with independent B_j ~ Bernoulli(p_j)

    @returns {tuple} (Lbar = sum p_j L_j, Ltilde = sum p_j (1 - p_j) L_j)
    """
    p = np.asarray(p, dtype=float)
    if decomp.M == 0:
        zero = np.zeros((decomp.m, decomp.m))
        return zero, zero.copy()
    return decomp.expected_laplacian(p), decomp.expected_laplacian(p * (1.0 - p))


def periodic_moments(base_laplacian: np.ndarray, budget: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Moments when the whole base graph is active together with probability C_b

    E[L(k)^2] = C_b L^2, so Ltilde = C_b (1 - C_b) L^2 / 2 keeps the
    second-moment formula shared with MATCHA.
    """
    lap = np.asarray(base_laplacian, dtype=float)
    return budget * lap, 0.5 * budget * (1.0 - budget) * (lap @ lap)


def second_moment(L_bar: np.ndarray, L_tilde: np.ndarray, alpha: float) -> np.ndarray:
    """E[W^T W] = I - 2 alpha Lbar + alpha^2 (Lbar^2 + 2 Ltilde)"""
    m = L_bar.shape[0]
    s = np.eye(m) - 2.0 * alpha * L_bar + alpha * alpha * (L_bar @ L_bar + 2.0 * L_tilde)
    return 0.5 * (s + s.T)


def rho_from_moments(L_bar: np.ndarray, L_tilde: np.ndarray, alpha: float) -> float:
    return deflated_spectral_norm(second_moment(L_bar, L_tilde, alpha))


def rho_full(L_bar: np.ndarray, L_tilde: np.ndarray, alpha: float) -> float:
    """Same quantity without deflation: ||E[W^T W] - J||_2 on the full space"""
    m = L_bar.shape[0]
    return spectral_norm(second_moment(L_bar, L_tilde, alpha) - averaging_matrix(m))


def rho_of_alpha(decomp: MatchingDecomposition, plan: ActivationPlan, alpha: float) -> float:
    """
    Spectral norm of E[W^T W] - J for a MATCHA plan at a given alpha

    @param {MatchingDecomposition} decomp - Matchings
    @param {ActivationPlan} plan - Activation probabilities
    @param {float} alpha - Consensus weight (>= 0)
    @returns {float} rho(alpha)
    """
    if alpha < 0:
        raise InvalidParameter(f"alpha must be >= 0, got {alpha}")
    L_bar, L_tilde = matcha_moments(decomp, plan.p)
    return rho_from_moments(L_bar, L_tilde, alpha)


def certify_sdp(L_bar: np.ndarray, L_tilde: np.ndarray, rho: float, alpha: float,
                beta: Optional[float] = None) -> SdpCertificate:
    """
    Evaluate both SDP constraints at (rho, alpha, beta)

    @param {float} beta - Defaults to alpha^2
    @returns {SdpCertificate} Gap of alpha^2 <= beta and eigen-slack of the LMI
    """
    beta = alpha * alpha if beta is None else beta
    m = L_bar.shape[0]
    lmi = (np.eye(m) - 2.0 * alpha * L_bar + beta * (L_bar @ L_bar + 2.0 * L_tilde)
           - averaging_matrix(m) - rho * np.eye(m))
    lmi_max = float(sym_eigen(0.5 * (lmi + lmi.T)).eigenvalues[-1])
    return SdpCertificate(alpha_beta_gap=alpha * alpha - beta, lmi_slack=lmi_max)


def closed_form_alpha(L_bar: np.ndarray, L_tilde: np.ndarray) -> float:
    """
    Interior point lambda_2(Lbar) / (lambda_2(Lbar)^2 + 2 ||Ltilde||_2), which already gives rho < 1
    """
    lam2 = algebraic_connectivity(L_bar)
    zeta = spectral_norm(L_tilde)
    return lam2 / (lam2 * lam2 + 2.0 * zeta)


def optimize_alpha_for_moments(L_bar: np.ndarray, L_tilde: np.ndarray,
                               tol: float = Tolerances.ALPHA_BRACKET,
                               budget: float = 1.0,
                               expected_comm_time: float = 0.0) -> MixingParams:
    """
    Minimize rho(alpha) over [0, 2 / lambda_2(Lbar)]

    rho is convex in alpha, rho(0) = 1 and rho(2 / lambda_2) >= 1, so the
    minimizer lies inside the bracket. Bounded Brent search (golden-section
    steps with parabolic acceleration) to bracket tolerance tol.

    @throws {DegeneratePlan} lambda_2(Lbar) <= 1e-12
    @throws {NonContractive} Minimum not below 1
    """
    m = L_bar.shape[0]
    if m == 1:
        zero = np.zeros((1, 1))
        return MixingParams(0.0, 0.0, zero, zero.copy(), 0.0, budget, expected_comm_time,
                            SdpCertificate(0.0, 0.0))

    lam2 = algebraic_connectivity(L_bar)
    if lam2 <= Tolerances.DEGENERATE_LAMBDA2:
        raise DegeneratePlan(f"lambda_2 of the expected Laplacian is {lam2:.3e}")
    alpha_hi = 2.0 / lam2

    result = minimize_scalar(lambda a: rho_from_moments(L_bar, L_tilde, a),
                             bounds=(0.0, alpha_hi), method='bounded',
                             options={'xatol': tol, 'maxiter': 500})
    alpha = float(result.x)
    rho = rho_from_moments(L_bar, L_tilde, alpha)

    # the bracket interior must beat the endpoint
    rho_hi = rho_from_moments(L_bar, L_tilde, alpha_hi)
    if rho_hi < rho:
        logger.warning(f"rho at bracket end {rho_hi:.6g} below interior optimum {rho:.6g}")

    if rho >= 1.0:
        raise NonContractive(f"optimized rho={rho:.6g} is not below 1")

    certificate = certify_sdp(L_bar, L_tilde, rho, alpha)
    if not certificate.satisfied:
        logger.warning(f"SDP certificate slack {certificate.lmi_slack:.3e} above tolerance")

    logger.debug(f"alpha*={alpha:.8g} rho*={rho:.8g} (lambda2={lam2:.6g}, {result.nfev} evaluations)")
    return MixingParams(
        alpha=alpha,
        rho=rho,
        L_bar=L_bar,
        L_tilde=L_tilde,
        beta=alpha * alpha,
        budget=float(budget),
        expected_comm_time=float(expected_comm_time),
        certificate=certificate,
    )


def optimize_alpha(decomp: MatchingDecomposition, plan: ActivationPlan,
                   tol: float = Tolerances.ALPHA_BRACKET) -> MixingParams:
    """
    Optimal consensus weight for a MATCHA plan

    @param {MatchingDecomposition} decomp - Decomposition of a connected graph
    @param {ActivationPlan} plan - Feasible activation plan
    @param {float} tol - Bracket tolerance on alpha
    @returns {MixingParams} alpha*, rho* < 1 and the certified moments
    @throws {Disconnected} Base graph not connected
    @throws {DegeneratePlan} Expected graph not connected
    """
    if not is_connected(decomp.topology):
        raise Disconnected("cannot optimize alpha on a disconnected graph")
    L_bar, L_tilde = matcha_moments(decomp, plan.p)
    return optimize_alpha_for_moments(L_bar, L_tilde, tol=tol, budget=plan.budget,
                                      expected_comm_time=plan.expected_comm_time)


def optimize_alpha_periodic(decomp: MatchingDecomposition, budget: float,
                            tol: float = Tolerances.ALPHA_BRACKET) -> MixingParams:
    """Optimal consensus weight for periodic DecenSGD at budget C_b"""
    if not is_connected(decomp.topology):
        raise Disconnected("cannot optimize alpha on a disconnected graph")
    L_bar, L_tilde = periodic_moments(laplacian(decomp.topology), budget)
    return optimize_alpha_for_moments(L_bar, L_tilde, tol=tol, budget=budget,
                                      expected_comm_time=budget * decomp.M)


def rho_upper_bound(plan: ActivationPlan, lambda2_bar: float, alpha: float) -> float:
    """
    Analytic upper bound 1 - 2 alpha lambda_2(Lbar) + 4 alpha^2 S^2 + 4 alpha^2 S with S = sum_j p_j

    Uses ||L_j||_2 <= 2 for matchings.
    """
    if alpha < 0:
        raise InvalidParameter(f"alpha must be >= 0, got {alpha}")
    s = float(np.sum(plan.p))
    return 1.0 - 2.0 * alpha * lambda2_bar + 4.0 * alpha * alpha * s * s + 4.0 * alpha * alpha * s


def mixing_matrix(decomp: MatchingDecomposition, active: Sequence[bool], alpha: float) -> np.ndarray:
    """
    W = I - alpha * sum_j active_j L_j (symmetric, doubly stochastic)

    @param {MatchingDecomposition} decomp - Matchings
    @param {sequence} active - Length-M activation flags
    @param {float} alpha - Consensus weight
    @returns {np.ndarray} m x m mixing matrix
    """
    if alpha < 0:
        raise InvalidParameter(f"alpha must be >= 0, got {alpha}")
    active = np.asarray(active, dtype=float)
    if active.shape != (decomp.M,):
        raise InvalidParameter(f"expected {decomp.M} activation flags, got shape {active.shape}")
    w = np.eye(decomp.m)
    if decomp.M:
        w -= alpha * decomp.expected_laplacian(active)
    return w
