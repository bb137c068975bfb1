"""
matcha-sim - Core graph and optimization module
Topologies, matching decompositions, activation plans, mixing weights and schedules
"""

from .graph import Topology, laplacian, is_connected, generate_erdos_renyi, generate_geometric, tune_geometric_radius
from .matching import Matching, MatchingDecomposition, decompose, validate_decomposition
from .comm_time import CommTimeModel
from .budget import ActivationPlan, OptimizerSettings, optimize_probabilities, full_activation_plan
from .mixing import MixingParams, optimize_alpha, optimize_alpha_periodic, rho_of_alpha, mixing_matrix
from .schedule import Policy, Schedule, generate_schedule, mixing_matrix_at, comm_time_at

__all__ = [
    'Topology',
    'laplacian',
    'is_connected',
    'generate_erdos_renyi',
    'generate_geometric',
    'tune_geometric_radius',
    'Matching',
    'MatchingDecomposition',
    'decompose',
    'validate_decomposition',
    'CommTimeModel',
    'ActivationPlan',
    'OptimizerSettings',
    'optimize_probabilities',
    'full_activation_plan',
    'MixingParams',
    'optimize_alpha',
    'optimize_alpha_periodic',
    'rho_of_alpha',
    'mixing_matrix',
    'Policy',
    'Schedule',
    'generate_schedule',
    'mixing_matrix_at',
    'comm_time_at',
]
