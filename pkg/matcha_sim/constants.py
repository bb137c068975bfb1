"""
matcha-sim Constants
Centralized tolerances, solver defaults and file/CSV contracts
"""


class Tolerances:
    """Numerical tolerances shared across modules"""

    SYMMETRY = 1e-12                 # max |A - A^T| relative to max(1, max|A|)
    JACOBI_OFF_DIAGONAL = 1e-12      # off-diagonal Frobenius residual, relative
    CONNECTIVITY = 1e-9              # lambda_2 above this means connected
    EIGENGAP = 1e-8                  # multiplicity threshold for lambda_2
    DEGENERATE_LAMBDA2 = 1e-12
    BUDGET_SLACK = 1e-9
    PROJECTION_ROOT = 1e-12
    ALPHA_BRACKET = 1e-8
    SDP_EIGEN_SLACK = 1e-8
    DOUBLY_STOCHASTIC = 1e-10


class SolverDefaults:
    """Defaults for the probability and mixing optimizers"""

    MAX_ITERATIONS = 2000
    PATIENCE = 100                   # iterations without improvement before stopping
    IMPROVEMENT_TOL = 1e-10
    BACKTRACK_STEPS = 4
    JACOBI_MAX_SWEEPS = 100
    GENERATION_RETRIES = 1000


class ExitCodes:
    """Process exit codes of the matcha-sim CLI"""

    SUCCESS = 0
    FAILURE = 1
    INVALID_CONFIG = 2
    NUMERICAL_FAILURE = 3


class CsvColumns:
    """Frozen CSV column contracts - plotting layers depend on these"""

    METRICS = [
        "k", "sim_time", "loss_avg_model", "grad_norm_sq", "consensus_sq",
        "comm_time_iter", "policy", "C_b", "seed",
    ]
    SWEEP = [
        "C_b", "lambda2", "alpha", "rho_matcha", "rho_periodic", "rho_vanilla", "sum_p",
    ]
    COMPARE = [
        "policy", "C_b", "seed", "status", "target_loss", "iteration_to_target",
        "time_to_target", "ratio_vs_vanilla",
    ]


class FileNames:
    """Artifact file names written under the output directory"""

    DECOMPOSITION = "decomposition.json"
    DECOMPOSITION_SUMMARY = "decomposition_summary.json"
    SWEEP = "sweep.csv"
    MANIFEST = "manifest.json"
    COMPARE = "compare.csv"
    RUNS_DIR = "runs"


class RunStatus:
    """Per-run status strings recorded in manifests and summaries"""

    OK = "ok"
    DIVERGED = "diverged"
    TARGET_NEVER_REACHED = "TargetNeverReached"
