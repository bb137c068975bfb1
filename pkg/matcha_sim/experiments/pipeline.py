"""
Experiment Pipeline - decompose -> optimize p -> optimize alpha -> schedule -> run
Plans are solved once per (policy, budget); runs fan out over a thread pool
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import psutil

from matcha_sim._version import __version__
from matcha_sim.constants import CsvColumns, FileNames, RunStatus
from matcha_sim.core.budget import ActivationPlan, OptimizerSettings, full_activation_plan, optimize_probabilities
from matcha_sim.core.comm_time import CommTimeModel
from matcha_sim.core.graph import Topology, component_count, is_connected, laplacian
from matcha_sim.core.matching import MatchingDecomposition, decompose, validate_decomposition
from matcha_sim.core.mixing import MixingParams, optimize_alpha, optimize_alpha_periodic
from matcha_sim.core.schedule import Policy, derive_schedule_seed, generate_schedule
from matcha_sim.core.spectral import algebraic_connectivity
from matcha_sim.experiments.config import ExperimentConfig
from matcha_sim.training.decen_sgd import RunMetrics, RunSettings, run
from matcha_sim.training.objectives import Objective, make_objective
from matcha_sim.training.theory import TheoryConstants, theorem2_bound, theory_learning_rate
from matcha_sim.utils.error_reporter import failure_reporter
from matcha_sim.utils.errors import Disconnected, NonFinite, StepSizeViolation
from matcha_sim.utils.io import read_csv, read_json, write_csv, write_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PolicyPlan:
    """
    Everything a policy needs before drawing schedules

    @property {Policy} policy - Communication policy
    @property {float} budget - C_b (1.0 for VANILLA)
    @property {ActivationPlan} plan - Probabilities (MATCHA and VANILLA)
    @property {MixingParams} mixing - Optimized alpha and rho
    """
    policy: Policy
    budget: float
    plan: Optional[ActivationPlan]
    mixing: MixingParams

    def to_json_dict(self) -> Dict[str, Any]:
        payload = {"policy": self.policy.value, "C_b": self.budget}
        payload.update(self.mixing.to_json_dict())
        if self.plan is not None:
            payload["p"] = list(self.plan.probabilities)
            payload["lambda2"] = self.plan.achieved_lambda2
        return payload


def decomposition_report(topology: Topology) -> Tuple[MatchingDecomposition, Dict[str, Any]]:
    """
    Decompose and summarize a graph

    @param {Topology} topology - Base graph (connectivity not required)
    @returns {tuple} (decomposition, summary with m, |E|, Delta, M, connectivity and validity)
    """
    decomp = decompose(topology)
    connected = is_connected(topology)
    summary = {
        "m": topology.m,
        "edges": topology.edge_count,
        "max_degree": topology.max_degree,
        "M": decomp.M,
        "connected": connected,
        "components": component_count(topology),
        "lambda2": algebraic_connectivity(laplacian(topology)) if topology.m > 1 else 0.0,
        "problems": validate_decomposition(decomp),
    }
    if not connected:
        logger.warning(f"graph has {summary['components']} connected components; "
                       f"decomposition emitted anyway")
    return decomp, summary


def solve_policy(decomp: MatchingDecomposition, policy: Policy, budget: float,
                 optimizer: Optional[OptimizerSettings] = None,
                 comm_model: Optional[CommTimeModel] = None) -> PolicyPlan:
    """
    Optimize the activation plan and consensus weight of one policy

    VANILLA ignores the budget and uses C_b = 1; its alpha is optimized
    with the same machinery (Ltilde = 0).
    """
    if policy is Policy.MATCHA:
        plan = optimize_probabilities(decomp, budget, optimizer, comm_model)
        return PolicyPlan(policy, float(budget), plan, optimize_alpha(decomp, plan))
    if policy is Policy.VANILLA:
        plan = full_activation_plan(decomp)
        return PolicyPlan(policy, 1.0, plan, optimize_alpha(decomp, plan))
    return PolicyPlan(policy, float(budget), None, optimize_alpha_periodic(decomp, budget))


def sweep_rows(decomp: MatchingDecomposition, budgets: List[float],
               optimizer: Optional[OptimizerSettings] = None,
               comm_model: Optional[CommTimeModel] = None) -> List[Dict[str, Any]]:
    """
    Spectral norm of every policy across budgets

    @param {MatchingDecomposition} decomp - Decomposition of a connected graph
    @param {list} budgets - C_b values
    @returns {list} Rows in CsvColumns.SWEEP order, sorted by C_b
    @throws {Disconnected} Graph not connected
    """
    if not is_connected(decomp.topology):
        raise Disconnected("sweep needs a connected graph")
    vanilla = solve_policy(decomp, Policy.VANILLA, 1.0, optimizer, comm_model)
    rows = []
    for budget in sorted(float(b) for b in budgets):
        matcha = solve_policy(decomp, Policy.MATCHA, budget, optimizer, comm_model)
        periodic = solve_policy(decomp, Policy.PERIODIC, budget, optimizer, comm_model)
        rows.append({
            "C_b": budget,
            "lambda2": matcha.plan.achieved_lambda2,
            "alpha": matcha.mixing.alpha,
            "rho_matcha": matcha.mixing.rho,
            "rho_periodic": periodic.mixing.rho,
            "rho_vanilla": vanilla.mixing.rho,
            "sum_p": float(matcha.plan.p.sum()),
        })
        logger.info(f"C_b={budget:g}: rho matcha={matcha.mixing.rho:.6f} "
                    f"periodic={periodic.mixing.rho:.6f} vanilla={vanilla.mixing.rho:.6f}")
    return rows


def learning_rate(cfg: ExperimentConfig, m: int) -> float:
    return theory_learning_rate(m, cfg.iterations) if cfg.theory_rate else float(cfg.eta)


def run_label(policy: Policy, budget: float, seed: int) -> str:
    return f"{policy.value}_Cb{budget:g}_seed{seed}"


def _theory_bound(objective: Objective, mixing: MixingParams, eta: float, K: int) -> Optional[float]:
    constants = (objective.lipschitz, objective.sigma_sq, objective.zeta_sq, objective.f_inf)
    if any(c is None for c in constants):
        return None
    theory = TheoryConstants(
        f_initial=objective.loss(objective.initial_point()),
        f_inf=objective.f_inf,
        lipschitz=objective.lipschitz,
        sigma_sq=objective.sigma_sq,
        zeta_sq=objective.zeta_sq,
        m=objective.num_workers,
        K=K,
        eta=eta,
    )
    try:
        return theorem2_bound(theory, mixing.rho)
    except StepSizeViolation as e:
        logger.debug(f"no convergence bound: {e}")
        return None


def _memory_mb() -> float:
    return psutil.Process().memory_info().rss / (1024 * 1024)


def execute_run(decomp: MatchingDecomposition, policy_plan: PolicyPlan, objective: Objective,
                cfg: ExperimentConfig, seed: int, runs_dir: Path) -> Dict[str, Any]:
    """
    Draw the schedule, train, and write the metrics CSV of one run

    A diverged run keeps its partial metrics and is marked 'diverged'.

    @returns {dict} Manifest entry
    """
    policy, budget = policy_plan.policy, policy_plan.budget
    label = run_label(policy, budget, seed)
    eta = learning_rate(cfg, decomp.m)
    schedule = generate_schedule(policy, decomp, policy_plan.plan, policy_plan.mixing,
                                 cfg.iterations, derive_schedule_seed(seed, policy, budget), budget=budget)
    settings = RunSettings(eta=eta, log_interval=cfg.log_interval, seed=seed,
                           init_spread=cfg.init_spread, comm_model=cfg.comm_time)
    logger.debug(f"starting {label}")
    try:
        metrics = run(objective, schedule, settings)
    except NonFinite as e:
        failure_reporter.report_failure(label, e, {"policy": policy.value, "C_b": budget, "seed": seed})
        metrics = e.partial_metrics if isinstance(e.partial_metrics, RunMetrics) else \
            RunMetrics(policy=policy.value, budget=budget, seed=seed, status=RunStatus.DIVERGED,
                       diverged_at=e.iteration)

    metrics_path = runs_dir / f"{label}.csv"
    metrics.write_csv(metrics_path)
    entry = metrics.summary()
    entry.update({
        "label": label,
        "metrics": f"{FileNames.RUNS_DIR}/{metrics_path.name}",
        "schedule": schedule.to_json_dict(),
        "alpha": policy_plan.mixing.alpha,
        "rho": policy_plan.mixing.rho,
        "eta": eta,
        "mean_comm_time": schedule.mean_comm_time(cfg.comm_time),
        "theorem2_bound": _theory_bound(objective, policy_plan.mixing, eta, cfg.iterations),
    })
    logger.info(f"finished {label}: {metrics.status}, final loss {metrics.final_loss:.6g} "
                f"(rss {_memory_mb():.0f} MB)")
    return entry


def run_experiment(cfg: ExperimentConfig, topology: Topology, out_dir: Path,
                   workers: int = 1) -> Dict[str, Any]:
    """
    Full training pipeline over every (policy, budget, seed)

    @param {ExperimentConfig} cfg - Validated configuration
    @param {Topology} topology - Base graph
    @param {Path} out_dir - Artifact directory (manifest.json + runs/*.csv)
    @param {int} workers - Parallel runs
    @returns {dict} Manifest (also written to out_dir)
    """
    decomp, summary = decomposition_report(topology)
    if not summary["connected"]:
        raise Disconnected("training needs a connected graph")

    plans: List[PolicyPlan] = []
    for policy in cfg.policy_list:
        budgets = [1.0] if policy is Policy.VANILLA else sorted(set(float(b) for b in cfg.budgets))
        for budget in budgets:
            plans.append(solve_policy(decomp, policy, budget, cfg.optimizer, cfg.comm_time))
            logger.info(f"solved {policy.value} C_b={budget:g}: alpha={plans[-1].mixing.alpha:.6g} "
                        f"rho={plans[-1].mixing.rho:.6g}")

    objective = make_objective(cfg.objective.kind, topology.m, cfg.objective.dimension,
                               seed=cfg.objective.seed, params=cfg.objective.params)
    runs_dir = Path(out_dir) / FileNames.RUNS_DIR
    jobs = [(plan, seed) for plan in plans for seed in cfg.seeds]
    logger.info(f"running {len(jobs)} runs on {workers} worker(s)")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(execute_run, decomp, plan, objective, cfg, seed, runs_dir) for plan, seed in jobs]
        entries = [f.result() for f in futures]

    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "graph": summary,
        "decomposition": decomp.to_json_dict(),
        "objective": objective.describe(),
        "eta": learning_rate(cfg, topology.m),
        "plans": [plan.to_json_dict() for plan in plans],
        "runs": entries,
        "target_loss": cfg.target_loss,
    }
    write_json(Path(out_dir) / FileNames.MANIFEST, manifest)
    return manifest


def default_target(runs: List[Dict[str, Any]]) -> Optional[float]:
    """Largest final loss among healthy vanilla runs (all healthy runs if there is no vanilla)"""
    healthy = [r for r in runs if r["status"] == RunStatus.OK and math.isfinite(r["final_loss"])]
    vanilla = [r for r in healthy if r["policy"] == Policy.VANILLA.value]
    pool = vanilla or healthy
    return max(r["final_loss"] for r in pool) if pool else None


def compare_rows(manifest: Dict[str, Any], base_dir: Path,
                 target_loss: Optional[float] = None) -> Tuple[float, List[Dict[str, Any]]]:
    """
    Time and iteration at which each run first reaches the target loss

    Resolution is the run's log_interval: only logged records are scanned.

    @param {dict} manifest - Manifest written by run_experiment
    @param {Path} base_dir - Directory the manifest lives in
    @param {float} target_loss - Threshold (default: manifest value, then default_target)
    @returns {tuple} (target, rows in CsvColumns.COMPARE order)
    """
    runs = manifest["runs"]
    target = target_loss if target_loss is not None else manifest.get("target_loss")
    if target is None:
        target = default_target(runs)
    target = float('nan') if target is None else float(target)

    hits: Dict[Tuple[str, float, int], Tuple[Optional[int], Optional[float]]] = {}
    for entry in runs:
        key = (entry["policy"], float(entry["C_b"]), int(entry["seed"]))
        hits[key] = (None, None)
        if entry["status"] != RunStatus.OK or not math.isfinite(target):
            continue
        frame = read_csv(base_dir / entry["metrics"])
        reached = frame[frame["loss_avg_model"] <= target]
        if len(reached):
            first = reached.iloc[0]
            hits[key] = (int(first["k"]), float(first["sim_time"]))

    rows = []
    for (policy, budget, seed), (iteration, time_to) in hits.items():
        vanilla_time = hits.get((Policy.VANILLA.value, 1.0, seed), (None, None))[1]
        ratio = None
        if time_to is not None and vanilla_time:
            ratio = time_to / vanilla_time
        elif time_to is not None and vanilla_time == 0.0:
            ratio = 1.0 if time_to == 0.0 else None
        rows.append({
            "policy": policy,
            "C_b": budget,
            "seed": seed,
            "status": RunStatus.OK if iteration is not None else RunStatus.TARGET_NEVER_REACHED,
            "target_loss": target,
            "iteration_to_target": iteration,
            "time_to_target": time_to,
            "ratio_vs_vanilla": ratio,
        })
    return target, rows


def write_compare(manifest_path: Path, out_dir: Path, target_loss: Optional[float] = None) -> Tuple[Path, List[Dict]]:
    manifest = read_json(manifest_path)
    _, rows = compare_rows(manifest, Path(manifest_path).parent, target_loss)
    return write_csv(Path(out_dir) / FileNames.COMPARE, rows, CsvColumns.COMPARE), rows


def consensus_contraction(decomp: MatchingDecomposition, policy_plan: PolicyPlan, K: int,
                          seeds: List[int], dimension: int = 4, init_spread: float = 1.0) -> np.ndarray:
    """
    Seed-averaged consensus distance of zero-objective runs, k = 0..K

    @returns {np.ndarray} Length K+1 mean of ||X(k)(I - J)||_F^2
    """
    objective = make_objective("zero", decomp.m, dimension)
    curves = []
    for seed in seeds:
        schedule = generate_schedule(policy_plan.policy, decomp, policy_plan.plan, policy_plan.mixing, K,
                                     derive_schedule_seed(seed, policy_plan.policy, policy_plan.budget),
                                     budget=policy_plan.budget)
        metrics = run(objective, schedule, RunSettings(eta=1.0, log_interval=1, seed=seed, init_spread=init_spread))
        curves.append([r.consensus_sq for r in metrics.records])
    return np.mean(np.asarray(curves), axis=0)
