"""
matcha-sim - Training module
Objectives, the decentralized SGD loop and its convergence bound
"""

from .objectives import Objective, QuadraticObjective, LogisticObjective, ZeroObjective, make_objective
from .decen_sgd import TrainState, RunMetrics, RunSettings, sgd_step, run
from .theory import TheoryConstants, theorem2_bound, theory_learning_rate

__all__ = [
    'Objective',
    'QuadraticObjective',
    'LogisticObjective',
    'ZeroObjective',
    'make_objective',
    'TrainState',
    'RunMetrics',
    'RunSettings',
    'sgd_step',
    'run',
    'TheoryConstants',
    'theorem2_bound',
    'theory_learning_rate',
]
