"""
Experiment Configuration
One JSON document per experiment; command-line flags override file values
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from matcha_sim.config import get_config
from matcha_sim.core.budget import OptimizerSettings
from matcha_sim.core.comm_time import CommTimeModel
from matcha_sim.core.graph import (Topology, generate_erdos_renyi, generate_geometric, load_topology,
                                   tune_geometric_radius)
from matcha_sim.core.schedule import Policy
from matcha_sim.training.objectives import OBJECTIVES
from matcha_sim.utils.errors import InputError, InvalidConfig
from matcha_sim.utils.io import read_json

logger = logging.getLogger(__name__)

GRAPH_KINDS = ("file", "erdos_renyi", "geometric", "geometric_degree")


@dataclass(frozen=True)
class GraphSpec:
    """
    Where the base graph comes from

    @property {str} kind - 'file', 'erdos_renyi', 'geometric' or 'geometric_degree'
    @property {str} path - Graph file (kind 'file')
    @property {int} m - Node count (generators)
    @property {float} edge_prob - Erdos-Renyi inclusion probability
    @property {float} radius - Geometric connection radius
    @property {int} target_max_degree - Geometric graph tuned to this maximal degree
    @property {int} seed - Generator seed
    """
    kind: str = "erdos_renyi"
    path: Optional[str] = None
    m: int = 8
    edge_prob: float = 0.5
    radius: float = 0.5
    target_max_degree: int = 3
    seed: int = 0

    def build(self) -> Topology:
        """Load or generate the topology"""
        if self.kind == "file":
            return load_topology(self.path)
        if self.kind == "erdos_renyi":
            return generate_erdos_renyi(self.m, self.edge_prob, self.seed)
        if self.kind == "geometric":
            return generate_geometric(self.m, self.radius, self.seed)
        _, topology = tune_geometric_radius(self.m, self.target_max_degree, self.seed)
        return topology

    def describe(self) -> Dict[str, Any]:
        if self.kind == "file":
            return {"kind": self.kind, "path": self.path}
        keep = {"erdos_renyi": ("m", "edge_prob", "seed"),
                "geometric": ("m", "radius", "seed"),
                "geometric_degree": ("m", "target_max_degree", "seed")}[self.kind]
        return dict({"kind": self.kind}, **{k: getattr(self, k) for k in keep})


@dataclass(frozen=True)
class ObjectiveSpec:
    """
    @property {str} kind - 'quadratic', 'logistic' or 'zero'
    @property {int} dimension - Model dimension d
    @property {int} seed - Data seed (shared by all policies and run seeds)
    @property {dict} params - Keyword arguments of the objective
    """
    kind: str = "quadratic"
    dimension: int = 10
    seed: int = 0
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Full description of a sweep or training experiment

    @class ExperimentConfig
    @property {GraphSpec} graph - Base graph source
    @property {list} budgets - C_b values in (0, 1]
    @property {list} policies - Policy names
    @property {int} iterations - K
    @property {float} eta - Learning rate (ignored when theory_rate is set)
    @property {bool} theory_rate - Use eta = sqrt(m / K)
    @property {ObjectiveSpec} objective - Objective and its constants
    @property {CommTimeModel} comm_time - Time accounting
    @property {OptimizerSettings} optimizer - Budget optimizer knobs
    @property {list} seeds - Run seeds (schedules and gradient noise)
    @property {str} output_dir - Artifact directory
    @property {int} log_interval - Metric logging period
    @property {float} init_spread - Spread of initial worker models
    @property {float} target_loss - Threshold used by compare (None = first vanilla run's final loss)
    """
    graph: GraphSpec = field(default_factory=GraphSpec)
    budgets: List[float] = field(default_factory=lambda: [0.1, 0.25, 0.5, 0.75, 1.0])
    policies: List[str] = field(default_factory=lambda: [p.value for p in Policy])
    iterations: int = 1000
    eta: float = 0.05
    theory_rate: bool = False
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    comm_time: CommTimeModel = field(default_factory=CommTimeModel)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    seeds: List[int] = field(default_factory=lambda: [0])
    output_dir: str = field(default_factory=lambda: get_config().output_dir)
    log_interval: int = 100
    init_spread: float = 0.0
    target_loss: Optional[float] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        """
        @throws {InvalidConfig} Any invariant violated
        """
        if self.graph.kind not in GRAPH_KINDS:
            raise InvalidConfig(f"graph.kind must be one of {GRAPH_KINDS}, got {self.graph.kind!r}")
        if self.graph.kind == "file" and not self.graph.path:
            raise InvalidConfig("graph.kind 'file' needs graph.path")
        if not self.budgets or any(not 0.0 < float(b) <= 1.0 for b in self.budgets):
            raise InvalidConfig(f"budgets must be a non-empty list in (0, 1], got {self.budgets}")
        if not self.policies:
            raise InvalidConfig("at least one policy is required")
        try:
            for name in self.policies:
                Policy.parse(name)
        except InputError as e:
            raise InvalidConfig(str(e))
        if not isinstance(self.iterations, int) or self.iterations < 1:
            raise InvalidConfig(f"iterations must be >= 1, got {self.iterations!r}")
        if not self.seeds:
            raise InvalidConfig("at least one seed is required")
        if not self.theory_rate and not (self.eta and self.eta > 0):
            raise InvalidConfig(f"eta must be > 0 unless theory_rate is set, got {self.eta!r}")
        if self.log_interval < 1:
            raise InvalidConfig(f"log_interval must be >= 1, got {self.log_interval}")
        if self.init_spread < 0:
            raise InvalidConfig(f"init_spread must be >= 0, got {self.init_spread}")
        if self.objective.kind not in OBJECTIVES:
            raise InvalidConfig(f"objective.kind must be one of {sorted(OBJECTIVES)}, got {self.objective.kind!r}")
        if self.objective.dimension < 1:
            raise InvalidConfig("objective.dimension must be >= 1")

    @property
    def policy_list(self) -> List[Policy]:
        return [Policy.parse(name) for name in self.policies]

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> 'ExperimentConfig':
        """
        Build from a parsed JSON document

        @param {dict} payload - Top-level keys match the dataclass fields
        @returns {ExperimentConfig} Validated configuration
        @throws {InvalidConfig} Unknown keys or invalid values
        """
        if not isinstance(payload, dict):
            raise InvalidConfig("experiment config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")

        kwargs = dict(payload)
        try:
            if 'graph' in kwargs:
                kwargs['graph'] = GraphSpec(**kwargs['graph'])
            if 'objective' in kwargs:
                kwargs['objective'] = ObjectiveSpec(**kwargs['objective'])
            if 'comm_time' in kwargs:
                kwargs['comm_time'] = CommTimeModel(**kwargs['comm_time'])
            if 'optimizer' in kwargs:
                kwargs['optimizer'] = OptimizerSettings.from_dict(kwargs['optimizer'])
            for key in ('budgets', 'policies', 'seeds'):
                if key in kwargs:
                    kwargs[key] = list(kwargs[key])
            return cls(**kwargs)
        except InvalidConfig:
            raise
        except (TypeError, InputError) as e:
            raise InvalidConfig(f"invalid experiment config: {e}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ExperimentConfig':
        try:
            payload = read_json(path)
        except ValueError as e:
            raise InvalidConfig(f"{path}: not valid JSON ({e})")
        logger.info(f"Loaded experiment config {path}")
        return cls.from_dict(payload)

    def with_overrides(self, **overrides: Any) -> 'ExperimentConfig':
        """Apply command-line values; None means 'not given'"""
        given = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **given) if given else self

    def with_graph_seed(self, seed: Optional[int]) -> 'ExperimentConfig':
        """Reseed the graph generator (decompose / sweep --seed)"""
        if seed is None:
            return self
        return replace(self, graph=replace(self.graph, seed=int(seed)))

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload['comm_time'] = self.comm_time.to_json_dict()
        return payload
