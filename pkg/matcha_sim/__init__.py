"""
🧩 matcha-sim - Matching decomposition sampling for decentralized SGD
Budgeted random topologies, optimized mixing weights and a desk-scale training simulator
"""

from .core.graph import Topology, generate_erdos_renyi, generate_geometric
from .core.matching import MatchingDecomposition, decompose
from .core.budget import ActivationPlan, optimize_probabilities
from .core.mixing import MixingParams, optimize_alpha
from .core.schedule import Policy, Schedule, generate_schedule

from ._version import __version__
__author__ = "matcha-sim Contributors"
__description__ = "🧩 Communication-budgeted decentralized SGD via random matching activation"

__all__ = [
    'Topology',
    'generate_erdos_renyi',
    'generate_geometric',
    'MatchingDecomposition',
    'decompose',
    'ActivationPlan',
    'optimize_probabilities',
    'MixingParams',
    'optimize_alpha',
    'Policy',
    'Schedule',
    'generate_schedule',
]
