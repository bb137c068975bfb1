"""
Budget Optimizer - Activation probabilities maximizing lambda_2 of the expected graph
Projected supergradient ascent over {0 <= p <= 1, sum p <= cap}
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from matcha_sim.constants import SolverDefaults, Tolerances
from matcha_sim.core.comm_time import CommTimeModel
from matcha_sim.core.graph import is_connected
from matcha_sim.core.matching import MatchingDecomposition
from matcha_sim.core.spectral import algebraic_connectivity, fiedler_space, spectral_norm
from matcha_sim.utils.errors import Disconnected, InvalidBudget, InvalidParameter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerSettings:
    """
    Knobs for optimize_probabilities

    @property {int} max_iter - Supergradient iterations
    @property {float} step_scale - a in the a/sqrt(t) step; None means 1/max_j ||L_j||_2
    @property {int} patience - Stop after this many iterations without improvement
    @property {float} improvement_tol - Minimum improvement that resets patience
    @property {int} backtrack_steps - Step halvings tried when a step decreases lambda_2
    @property {float} eigengap - Multiplicity threshold for the averaged supergradient
    """
    max_iter: int = SolverDefaults.MAX_ITERATIONS
    step_scale: Optional[float] = None
    patience: int = SolverDefaults.PATIENCE
    improvement_tol: float = SolverDefaults.IMPROVEMENT_TOL
    backtrack_steps: int = SolverDefaults.BACKTRACK_STEPS
    eigengap: float = Tolerances.EIGENGAP

    def __post_init__(self):
        if self.max_iter < 0 or self.patience < 1 or self.backtrack_steps < 0:
            raise InvalidParameter("max_iter >= 0, patience >= 1, backtrack_steps >= 0 required")

    @classmethod
    def from_dict(cls, payload: Optional[Dict[str, Any]]) -> 'OptimizerSettings':
        return cls(**(payload or {}))


@dataclass(frozen=True)
class ActivationPlan:
    """
    Per-matching activation probabilities under a communication budget

    @class ActivationPlan
    @property {tuple} probabilities - p_1..p_M
    @property {float} budget - C_b in (0, 1]
    @property {float} achieved_lambda2 - lambda_2(sum_j p_j L_j)
    @property {float} expected_comm_time - sum_j p_j (matching rounds per iteration)
    @property {tuple} trace - Best objective value after each iteration (nondecreasing)
    """
    probabilities: Tuple[float, ...]
    budget: float
    achieved_lambda2: float
    expected_comm_time: float
    trace: Tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=float)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "C_b": self.budget,
            "p": list(self.probabilities),
            "lambda2": self.achieved_lambda2,
            "expected_comm_time": self.expected_comm_time,
        }

    def digest(self) -> str:
        """SHA-256 of the exported plan, used to identify schedules"""
        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode('utf-8')
        return hashlib.sha256(blob).hexdigest()


def project_box_budget(q: np.ndarray, cap: float) -> np.ndarray:
    """
    Euclidean projection onto {p : 0 <= p <= 1, sum p <= cap}

    If the box clip already meets the sum constraint it is the answer;
    otherwise p = clip(q - tau, 0, 1) with tau >= 0 making sum p = cap.

    @param {np.ndarray} q - Point to project
    @param {float} cap - Sum bound (>= 0)
    @returns {np.ndarray} Projected point
    """
    if cap < 0:
        raise InvalidParameter(f"cap must be >= 0, got {cap}")
    q = np.asarray(q, dtype=float)
    clipped = np.clip(q, 0.0, 1.0)
    if clipped.sum() <= cap:
        return clipped
    if cap == 0:
        return np.zeros_like(q)

    def excess(tau: float) -> float:
        return float(np.clip(q - tau, 0.0, 1.0).sum() - cap)

    # excess(0) > 0 and excess(max q) = -cap <= 0
    tau = brentq(excess, 0.0, float(q.max()), xtol=Tolerances.PROJECTION_ROOT, rtol=4 * np.finfo(float).eps)
    return np.clip(q - tau, 0.0, 1.0)


def expected_lambda2(decomp: MatchingDecomposition, p: np.ndarray) -> float:
    return algebraic_connectivity(decomp.expected_laplacian(p))


def lambda2_supergradient(decomp: MatchingDecomposition, p: np.ndarray,
                          eigengap: float = Tolerances.EIGENGAP) -> np.ndarray:
    """
    Supergradient of p -> lambda_2(sum_j p_j L_j)

    g_j = v^T L_j v for the unit Fiedler vector v; when lambda_2 is repeated
    (eigengap below threshold) the Rayleigh quotients are averaged over an
    orthonormal basis of the eigenspace.

    @param {MatchingDecomposition} decomp - Matchings and their Laplacians
    @param {np.ndarray} p - Probabilities inside the box
    @returns {np.ndarray} Length-M supergradient (entries >= 0 since L_j is PSD)
    """
    _, basis = fiedler_space(decomp.expected_laplacian(p), eigengap=eigengap)
    if basis.shape[1] == 0:
        return np.zeros(decomp.M)
    return np.einsum('jab,ar,br->j', decomp.laplacians, basis, basis) / basis.shape[1]


def _validate_budget(budget: float):
    if not (isinstance(budget, (int, float)) and 0.0 < budget <= 1.0):
        raise InvalidBudget(f"communication budget must lie in (0, 1], got {budget!r}")


def full_activation_plan(decomp: MatchingDecomposition) -> ActivationPlan:
    """Vanilla DecenSGD: every matching active every iteration (C_b = 1)"""
    p = np.ones(decomp.M)
    lam2 = expected_lambda2(decomp, p)
    return ActivationPlan(tuple(p.tolist()), 1.0, lam2, float(decomp.M), (lam2,))


def optimize_probabilities(decomp: MatchingDecomposition, budget: float,
                           opts: Optional[OptimizerSettings] = None,
                           comm_model: Optional[CommTimeModel] = None) -> ActivationPlan:
    """
    Maximize lambda_2(sum_j p_j L_j) subject to 0 <= p <= 1, sum p <= M * C_b

    Projected supergradient ascent with a/sqrt(t) steps from the uniform point
    p_j = C_b, limited backtracking, and best-iterate tracking, so the result
    is never worse than the uniform plan.

    @param {MatchingDecomposition} decomp - Decomposition of a connected graph
    @param {float} budget - C_b in (0, 1]
    @param {OptimizerSettings} opts - Solver settings
    @param {CommTimeModel} comm_model - Delay rule defining the sum cap (linear by default)
    @returns {ActivationPlan} Feasible plan
    @throws {InvalidBudget} C_b outside (0, 1]
    @throws {Disconnected} Base graph not connected
    """
    _validate_budget(budget)
    if not is_connected(decomp.topology):
        raise Disconnected("cannot optimize activation probabilities on a disconnected graph")
    opts = opts or OptimizerSettings()
    comm_model = comm_model or CommTimeModel()

    M = decomp.M
    if M == 0:
        # single node: nothing to communicate
        return ActivationPlan((), float(budget), 0.0, 0.0, (0.0,))
    cap = comm_model.budget_cap(budget, M)
    if cap >= M:
        # lambda_2 is nondecreasing in each p_j, the box corner is optimal
        plan = full_activation_plan(decomp)
        return ActivationPlan(plan.probabilities, float(budget), plan.achieved_lambda2,
                              plan.expected_comm_time, plan.trace)

    step_scale = opts.step_scale
    if step_scale is None:
        step_scale = 1.0 / max(spectral_norm(L) for L in decomp.laplacians)

    p = project_box_budget(np.full(M, cap / M), cap)
    value = expected_lambda2(decomp, p)
    best_p, best_value = p.copy(), value
    trace: List[float] = [best_value]
    stall = 0

    for t in range(1, opts.max_iter + 1):
        g = lambda2_supergradient(decomp, p, eigengap=opts.eigengap)
        step = step_scale / np.sqrt(t)
        candidate, candidate_value = p, value
        for _ in range(opts.backtrack_steps + 1):
            candidate = project_box_budget(p + step * g, cap)
            candidate_value = expected_lambda2(decomp, candidate)
            if candidate_value >= value:
                break
            step *= 0.5
        p, value = candidate, candidate_value

        if value > best_value + opts.improvement_tol:
            best_p, best_value = p.copy(), value
            stall = 0
        else:
            if value > best_value:
                best_p, best_value = p.copy(), value
            stall += 1
        trace.append(best_value)
        if stall >= opts.patience:
            logger.debug(f"budget {budget}: converged after {t} iterations")
            break

    logger.debug(f"budget {budget}: lambda2 {trace[0]:.6g} (uniform) -> {best_value:.6g}")
    return ActivationPlan(
        probabilities=tuple(best_p.tolist()),
        budget=float(budget),
        achieved_lambda2=float(best_value),
        expected_comm_time=float(best_p.sum()),
        trace=tuple(trace),
    )
