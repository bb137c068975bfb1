"""
matcha-sim Errors
Exception hierarchy; every class maps to a CLI exit code
"""

from typing import Any, Optional

from matcha_sim.constants import ExitCodes


class MatchaError(Exception):
    """Base class for all matcha-sim failures"""

    exit_code = ExitCodes.FAILURE


# ---------- invalid input (exit 2) ----------

class InputError(MatchaError):
    exit_code = ExitCodes.INVALID_CONFIG


class InvalidTopology(InputError):
    """Edge list violates the Topology invariants (self-loop, duplicate, out of range)"""


class GraphFormatError(InputError):
    """Graph file is not the expected JSON document"""


class InvalidBudget(InputError):
    """Communication budget outside (0, 1]"""


class InvalidParameter(InputError):
    """Generic out-of-range argument"""


class InvalidPolicyParams(InputError):
    """Schedule policy requested without the parameters it needs"""


class InvalidConfig(InputError):
    """Experiment configuration failed validation"""


class Disconnected(InputError):
    """Base graph is not connected (lambda_2 at or below the connectivity tolerance)"""


# ---------- numerical failures (exit 3) ----------

class NumericalError(MatchaError):
    exit_code = ExitCodes.NUMERICAL_FAILURE


class NonSymmetric(NumericalError):
    """Matrix handed to the symmetric eigensolver is not symmetric"""


class EigenConvergenceError(NumericalError):
    """Jacobi sweeps exhausted before the off-diagonal residual converged"""


class DegeneratePlan(NumericalError):
    """Expected Laplacian has lambda_2 ~ 0, no contracting alpha exists"""


class NonContractive(NumericalError):
    """Optimized spectral norm is not below 1"""


class StepSizeViolation(NumericalError):
    """Learning rate outside the range where the convergence bound holds"""


class GenerationFailed(NumericalError):
    """Random graph generator could not satisfy its contract"""


class NonFinite(NumericalError):
    """
    A decentralized SGD update produced NaN/Inf

    @property {int} iteration - Iteration index whose update diverged
    @property {object} partial_metrics - Metrics recorded before the failure
    """

    def __init__(self, iteration: int, partial_metrics: Optional[Any] = None):
        super().__init__(f"non-finite model update at iteration {iteration} (learning rate too large?)")
        self.iteration = iteration
        self.partial_metrics = partial_metrics


class IndexOutOfRange(MatchaError, IndexError):
    """Schedule accessed outside [0, K)"""
