"""
Schedule Generator - Pre-drawn activation tables for MATCHA and its baselines
Draw order is iteration-major, matching index ascending; tables are replayable from (seed, policy, plan, K)
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional, Union

import numpy as np

from matcha_sim.core.budget import ActivationPlan
from matcha_sim.core.comm_time import CommTimeModel
from matcha_sim.core.graph import UINT64_MASK, laplacian
from matcha_sim.core.matching import MatchingDecomposition
from matcha_sim.core.mixing import MixingParams
from matcha_sim.utils.errors import IndexOutOfRange, InvalidBudget, InvalidParameter, InvalidPolicyParams

logger = logging.getLogger(__name__)


class Policy(Enum):
    """Communication policies"""
    MATCHA = "matcha"          # matching j active with probability p_j
    VANILLA = "vanilla"        # whole base graph every iteration
    PERIODIC = "periodic"      # whole base graph with probability C_b

    @property
    def index(self) -> int:
        return list(Policy).index(self)

    @classmethod
    def parse(cls, value: Union[str, 'Policy']) -> 'Policy':
        if isinstance(value, Policy):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidPolicyParams(f"unknown policy {value!r}; expected one of {[p.value for p in cls]}")


def derive_schedule_seed(run_seed: int, policy: Policy, budget: float) -> int:
    """
    64-bit schedule seed for one (run seed, policy, budget) triple

    @param {int} run_seed - Seed shared by the paired runs
    @param {Policy} policy - Communication policy
    @param {float} budget - C_b
    @returns {int} Derived seed
    """
    entropy = [int(run_seed) & UINT64_MASK, policy.index, int(round(budget * 1e6))]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class Schedule:
    """
    Materialized activation sequence of one run

    @class Schedule
    @property {Policy} policy - Communication policy
    @property {int} seed - Seed the table was drawn from
    @property {int} iterations - K
    @property {np.ndarray} activations - K x M (MATCHA), K x 1 (PERIODIC) or None (VANILLA, all active)
    @property {float} alpha - Consensus weight used by every W(k)
    @property {MatchingDecomposition} decomposition - Matchings the table refers to
    @property {ActivationPlan} plan - Probabilities (MATCHA only)
    @property {float} budget - C_b of the run
    """
    policy: Policy
    seed: int
    iterations: int
    activations: Optional[np.ndarray]
    alpha: float
    decomposition: MatchingDecomposition
    plan: Optional[ActivationPlan] = None
    budget: float = 1.0

    @property
    def M(self) -> int:
        return self.decomposition.M

    @property
    def m(self) -> int:
        return self.decomposition.m

    def _check_index(self, k: int):
        if not 0 <= k < self.iterations:
            raise IndexOutOfRange(f"iteration {k} outside [0, {self.iterations})")

    def active_matchings(self, k: int) -> np.ndarray:
        """Length-M boolean flags of iteration k"""
        self._check_index(k)
        if self.policy is Policy.VANILLA:
            return np.ones(self.M, dtype=bool)
        if self.policy is Policy.PERIODIC:
            return np.full(self.M, bool(self.activations[k, 0]))
        return self.activations[k]

    def active_count(self, k: int) -> int:
        return int(self.active_matchings(k).sum())

    @cached_property
    def _full_mixing(self) -> np.ndarray:
        w = np.eye(self.m) - self.alpha * laplacian(self.decomposition.topology)
        w.setflags(write=False)
        return w

    def mixing_matrix(self, k: int) -> np.ndarray:
        """W(k) = I - alpha * sum_j B_j(k) L_j"""
        active = self.active_matchings(k)
        if not active.any():
            return np.eye(self.m)
        if active.all():
            return self._full_mixing.copy()
        return np.eye(self.m) - self.alpha * self.decomposition.expected_laplacian(active)

    def comm_time(self, k: int, model: Optional[CommTimeModel] = None) -> float:
        """Matching rounds of iteration k, run sequentially"""
        model = model or CommTimeModel()
        return model.round_time(self.active_count(k))

    def activation_counts(self) -> np.ndarray:
        """Per-iteration number of active matchings"""
        if self.policy is Policy.VANILLA:
            return np.full(self.iterations, self.M, dtype=np.int64)
        if self.policy is Policy.PERIODIC:
            return self.activations[:, 0].astype(np.int64) * self.M
        return self.activations.sum(axis=1).astype(np.int64)

    def empirical_frequencies(self) -> np.ndarray:
        """Fraction of iterations in which each matching was active"""
        if self.policy is Policy.VANILLA:
            return np.ones(self.M)
        if self.policy is Policy.PERIODIC:
            return np.full(self.M, float(self.activations[:, 0].mean()))
        return self.activations.mean(axis=0)

    def mean_comm_time(self, model: Optional[CommTimeModel] = None) -> float:
        """Average per-iteration communication time over the whole table"""
        model = model or CommTimeModel()
        counts = self.activation_counts()
        values, multiplicity = np.unique(counts, return_counts=True)
        total = sum(model.round_time(int(n)) * int(c) for n, c in zip(values, multiplicity))
        return total / self.iterations

    def to_json_dict(self, full: bool = False) -> Dict[str, Any]:
        """
        Export the schedule

        The compact form carries everything needed to regenerate the table;
        full=True also dumps the activation rows for audits.

        @param {bool} full - Include the activation table
        @returns {dict} JSON-ready document
        """
        payload = {
            "policy": self.policy.value,
            "seed": self.seed,
            "K": self.iterations,
            "M": self.M,
            "alpha": self.alpha,
            "C_b": self.budget,
            "plan_sha256": self.plan.digest() if self.plan is not None else None,
        }
        if full:
            payload["activations"] = (None if self.activations is None
                                      else self.activations.astype(np.uint8).tolist())
        return payload


def generate_schedule(policy: Union[Policy, str],
                      decomp: MatchingDecomposition,
                      plan: Optional[ActivationPlan],
                      mixing: MixingParams,
                      K: int,
                      seed: int,
                      budget: Optional[float] = None) -> Schedule:
    """
    Draw the activation table of a run

    MATCHA draws B_j(k) ~ Bernoulli(p_j) as rng.random((K, M)) < p, i.e.
    iteration-major with matching index ascending. PERIODIC draws one
    Bernoulli(C_b) per iteration for the whole base graph. VANILLA draws
    nothing.

    @param {Policy|str} policy - Communication policy
    @param {MatchingDecomposition} decomp - Matchings
    @param {ActivationPlan} plan - Probabilities (required for MATCHA)
    @param {MixingParams} mixing - Consensus weight optimized for this policy
    @param {int} K - Iterations (>= 1)
    @param {int} seed - 64-bit seed
    @param {float} budget - C_b (PERIODIC; defaults to the plan's budget)
    @returns {Schedule} Materialized schedule
    @throws {InvalidPolicyParams} Missing plan (MATCHA) or budget (PERIODIC)
    """
    policy = Policy.parse(policy)
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise InvalidParameter(f"K must be a positive integer, got {K!r}")
    K = int(K)
    rng = np.random.default_rng(int(seed) & UINT64_MASK)

    if policy is Policy.MATCHA:
        if plan is None:
            raise InvalidPolicyParams("MATCHA schedule needs an activation plan")
        if len(plan.probabilities) != decomp.M:
            raise InvalidPolicyParams(f"plan has {len(plan.probabilities)} probabilities for {decomp.M} matchings")
        activations = rng.random((K, decomp.M)) < plan.p
        budget = plan.budget
    elif policy is Policy.PERIODIC:
        if budget is None and plan is not None:
            budget = plan.budget
        if budget is None or not np.isscalar(budget):
            raise InvalidPolicyParams("PERIODIC schedule needs a scalar budget C_b")
        if not 0.0 < float(budget) <= 1.0:
            raise InvalidBudget(f"communication budget must lie in (0, 1], got {budget!r}")
        activations = rng.random((K, 1)) < float(budget)
    else:
        activations = None
        budget = 1.0

    if activations is not None:
        activations.setflags(write=False)

    logger.debug(f"{policy.value} schedule K={K} seed={seed} alpha={mixing.alpha:.6g}")
    return Schedule(
        policy=policy,
        seed=int(seed),
        iterations=K,
        activations=activations,
        alpha=float(mixing.alpha),
        decomposition=decomp,
        plan=plan if policy is Policy.MATCHA else None,
        budget=float(budget),
    )


def mixing_matrix_at(schedule: Schedule, k: int) -> np.ndarray:
    """
    W(k) of a schedule

    @throws {IndexOutOfRange} k outside [0, K)
    """
    return schedule.mixing_matrix(k)


def comm_time_at(schedule: Schedule, k: int, model: Optional[CommTimeModel] = None) -> float:
    """
    Communication time of iteration k (active matchings x t_link under the linear rule)

    @throws {IndexOutOfRange} k outside [0, K)
    """
    return schedule.comm_time(k, model)
