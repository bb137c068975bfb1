"""
Decentralized SGD Engine - Local gradient step followed by one consensus step per iteration
X(k+1) = W(k) (X(k) - eta G(k)) with worker models as rows
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from matcha_sim.constants import CsvColumns, RunStatus, Tolerances
from matcha_sim.core.comm_time import CommTimeModel
from matcha_sim.core.graph import UINT64_MASK
from matcha_sim.core.schedule import Schedule
from matcha_sim.training.objectives import Objective
from matcha_sim.utils.errors import InvalidParameter, NonFinite
from matcha_sim.utils.io import write_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrainState:
    """
    Worker models at one iteration

    @class TrainState
    @property {np.ndarray} X - m x d worker models (row i belongs to worker i)
    @property {int} k - Iterations completed
    @property {float} eta - Learning rate
    @property {float} sim_time - Cumulative simulated time
    """
    X: np.ndarray
    k: int = 0
    eta: float = 0.1
    sim_time: float = 0.0

    @property
    def average(self) -> np.ndarray:
        """x_bar = (1/m) sum_i x_i"""
        return self.X.mean(axis=0)

    def consensus_distance(self) -> float:
        """||X (I - J)||_F^2"""
        return float(np.sum((self.X - self.average) ** 2))


@dataclass(frozen=True)
class MetricRecord:
    k: int
    sim_time: float
    loss_avg_model: float
    grad_norm_sq: float
    consensus_sq: float
    comm_time_iter: float


@dataclass
class RunMetrics:
    """
    Logged trajectory of one run

    @class RunMetrics
    @property {str} policy - Policy name
    @property {float} budget - C_b
    @property {int} seed - Run seed
    @property {list} records - MetricRecord rows (k = 0, every log interval, and K)
    @property {float} grad_norm_sq_sum - Sum of ||grad F(x_bar)||^2 over every pre-step iterate
    @property {int} iterations - Completed iterations
    @property {float} total_comm_time - Cumulative communication time
    @property {float} average_drift_max - Largest deviation from the exact average recursion
    @property {str} status - 'ok' or 'diverged'
    """
    policy: str
    budget: float
    seed: int
    records: List[MetricRecord] = field(default_factory=list)
    grad_norm_sq_sum: float = 0.0
    iterations: int = 0
    total_comm_time: float = 0.0
    average_drift_max: float = 0.0
    status: str = RunStatus.OK
    diverged_at: Optional[int] = None

    @property
    def grad_norm_sq_mean(self) -> float:
        """(1/K) sum_k ||grad F(x_bar(k))||^2"""
        return self.grad_norm_sq_sum / self.iterations if self.iterations else float('nan')

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss_avg_model if self.records else float('nan')

    def to_frame(self) -> pd.DataFrame:
        rows = [dict(vars(r), policy=self.policy, C_b=self.budget, seed=self.seed) for r in self.records]
        return pd.DataFrame(rows, columns=CsvColumns.METRICS)

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, self.to_frame().to_dict('records'), CsvColumns.METRICS)

    def summary(self) -> Dict[str, Any]:
        return {
            "policy": self.policy,
            "C_b": self.budget,
            "seed": self.seed,
            "status": self.status,
            "iterations": self.iterations,
            "final_loss": self.final_loss,
            "grad_norm_sq_mean": self.grad_norm_sq_mean,
            "total_comm_time": self.total_comm_time,
            "diverged_at": self.diverged_at,
        }


@dataclass(frozen=True)
class RunSettings:
    """
    Loop settings of one run

    @property {float} eta - Constant learning rate
    @property {int} log_interval - Record every this many iterations
    @property {int} seed - Seed of gradient noise and initial spread
    @property {float} init_spread - Std of per-worker perturbations of the initial point (0 = identical)
    @property {CommTimeModel} comm_model - Time accounting
    """
    eta: float
    log_interval: int = 100
    seed: int = 0
    init_spread: float = 0.0
    comm_model: CommTimeModel = field(default_factory=CommTimeModel)

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidParameter(f"learning rate must be > 0, got {self.eta}")
        if self.log_interval < 1:
            raise InvalidParameter(f"log_interval must be >= 1, got {self.log_interval}")
        if self.init_spread < 0:
            raise InvalidParameter(f"init_spread must be >= 0, got {self.init_spread}")


def noise_generator(seed: int, k: int) -> np.random.Generator:
    """Generator of iteration k; worker i consumes row i of every draw"""
    return np.random.default_rng([int(seed) & UINT64_MASK, 1, int(k)])


def initial_state(objective: Objective, settings: RunSettings) -> TrainState:
    """
    All workers start at the objective's initial point, optionally spread out

    @param {Objective} objective - Provides the initial point
    @param {RunSettings} settings - eta, seed, init_spread
    @returns {TrainState} State at k = 0
    """
    X = np.tile(objective.initial_point(), (objective.num_workers, 1))
    if settings.init_spread > 0:
        rng = np.random.default_rng([int(settings.seed) & UINT64_MASK, 0])
        X = X + settings.init_spread * rng.standard_normal(X.shape)
    return TrainState(X=X, k=0, eta=settings.eta, sim_time=0.0)


def sgd_step(state: TrainState, schedule: Schedule, objective: Objective, seed: int,
             comm_model: Optional[CommTimeModel] = None) -> TrainState:
    """
    One decentralized SGD iteration

    @param {TrainState} state - State at iteration k = state.k
    @param {Schedule} schedule - Supplies W(k)
    @param {Objective} objective - Stochastic gradient oracle
    @param {int} seed - Run seed (noise of iteration k comes from (seed, k))
    @param {CommTimeModel} comm_model - Adds t_comp + comm time of iteration k to sim_time
    @returns {TrainState} State at k + 1
    @throws {NonFinite} Update produced NaN/Inf
    """
    comm_model = comm_model or CommTimeModel()
    k = state.k
    G = objective.stochastic_gradients(state.X, noise_generator(seed, k))
    X_next = schedule.mixing_matrix(k) @ (state.X - state.eta * G)
    if not np.isfinite(X_next).all():
        raise NonFinite(k)
    elapsed = comm_model.iteration_time(schedule.active_count(k))
    return replace(state, X=X_next, k=k + 1, sim_time=state.sim_time + elapsed)


def _record(state: TrainState, objective: Objective, comm_time_iter: float) -> MetricRecord:
    x_bar = state.average
    grad = objective.gradient(x_bar)
    return MetricRecord(
        k=state.k,
        sim_time=state.sim_time,
        loss_avg_model=objective.loss(x_bar),
        grad_norm_sq=float(np.dot(grad, grad)),
        consensus_sq=state.consensus_distance(),
        comm_time_iter=comm_time_iter,
    )


def run(objective: Objective, schedule: Schedule, settings: RunSettings,
        state: Optional[TrainState] = None) -> RunMetrics:
    """
    Execute K iterations of decentralized SGD

    Records at k = 0, every log_interval iterations and at K. On every logged
    iteration the average recursion x_bar(k+1) = x_bar(k) - (eta/m) G 1 is
    checked; the worst deviation is kept in the metrics.

    @param {Objective} objective - Objective with m matching the schedule
    @param {Schedule} schedule - Pre-drawn mixing sequence (K = schedule.iterations)
    @param {RunSettings} settings - eta, log interval, seed, init spread, time model
    @param {TrainState} state - Optional starting state (default from initial_state)
    @returns {RunMetrics} Logged trajectory
    @throws {NonFinite} With partial_metrics set to the trajectory so far
    """
    if objective.num_workers != schedule.m:
        raise InvalidParameter(f"objective has {objective.num_workers} workers, graph has {schedule.m} nodes")
    state = state or initial_state(objective, settings)
    metrics = RunMetrics(policy=schedule.policy.value, budget=schedule.budget, seed=settings.seed)
    metrics.records.append(_record(state, objective, 0.0))
    K = schedule.iterations
    comm_model = settings.comm_model

    for k in range(K):
        x_bar = state.average
        grad = objective.gradient(x_bar)
        metrics.grad_norm_sq_sum += float(np.dot(grad, grad))
        log_now = (k + 1) % settings.log_interval == 0 or k + 1 == K

        try:
            if log_now:
                G = objective.stochastic_gradients(state.X, noise_generator(settings.seed, k))
                next_state = sgd_step(state, schedule, objective, settings.seed, comm_model)
                expected = x_bar - state.eta * G.mean(axis=0)
                scale = max(1.0, float(np.max(np.abs(expected))))
                drift = float(np.max(np.abs(next_state.average - expected))) / scale
                metrics.average_drift_max = max(metrics.average_drift_max, drift)
                if drift > Tolerances.DOUBLY_STOCHASTIC:
                    logger.warning(f"average recursion drift {drift:.3e} at iteration {k}")
            else:
                next_state = sgd_step(state, schedule, objective, settings.seed, comm_model)
        except NonFinite as e:
            metrics.status = RunStatus.DIVERGED
            metrics.diverged_at = e.iteration
            metrics.iterations = k
            e.partial_metrics = metrics
            logger.warning(f"{metrics.policy} C_b={metrics.budget} seed={metrics.seed} diverged at iteration {k}")
            raise

        comm_iter = schedule.comm_time(k, comm_model)
        metrics.total_comm_time += comm_iter
        state = next_state
        if log_now:
            metrics.records.append(_record(state, objective, comm_iter))

    metrics.iterations = K
    logger.debug(f"{metrics.policy} C_b={metrics.budget} seed={metrics.seed}: "
                 f"final loss {metrics.final_loss:.6g}, comm time {metrics.total_comm_time:.6g}")
    return metrics
