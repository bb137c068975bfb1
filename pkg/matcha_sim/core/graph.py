"""
Graph Core - Topology type, Laplacians and seeded generators
Node labels are 0-based contiguous integers; edges are stored as sorted (i, j) pairs with i < j
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy.spatial.distance import pdist, squareform

from matcha_sim.constants import SolverDefaults, Tolerances
from matcha_sim.core.spectral import algebraic_connectivity
from matcha_sim.utils.errors import GenerationFailed, GraphFormatError, InvalidParameter, InvalidTopology
from matcha_sim.utils.io import read_json, write_json

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

UINT64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Topology:
    """
    Undirected simple graph G(V, E) on nodes 0..m-1

    @class Topology
    @property {int} m - Node count (positive)
    @property {tuple} edges - Sorted unique (i, j) pairs with i < j
    """
    m: int
    edges: Tuple[Edge, ...] = field(default=())

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise InvalidTopology(f"node count must be a positive integer, got {self.m!r}")
        object.__setattr__(self, 'm', int(self.m))
        object.__setattr__(self, 'edges', _normalize_edges(self.m, self.edges))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def degree(self, node: int) -> int:
        return int(self.degrees()[node])

    @property
    def max_degree(self) -> int:
        """Delta(G)"""
        return int(self.degrees().max()) if self.m else 0

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.m, self.m), dtype=np.int64)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1
        return a

    def neighbors(self, node: int) -> List[int]:
        return sorted([j for i, j in self.edges if i == node] + [i for i, j in self.edges if j == node])

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.m))
        g.add_edges_from(self.edges)
        return g

    def to_json_dict(self) -> Dict[str, Any]:
        return {"m": self.m, "edges": [[i, j] for i, j in self.edges]}

    @classmethod
    def from_json_dict(cls, payload: Dict[str, Any]) -> 'Topology':
        """
        Build a Topology from {"m": int, "edges": [[i, j], ...]}

        @throws {GraphFormatError} Malformed document
        @throws {InvalidTopology} Self-loops, duplicates or out-of-range endpoints
        """
        if not isinstance(payload, dict) or 'm' not in payload or 'edges' not in payload:
            raise GraphFormatError('graph file must be a JSON object with "m" and "edges"')
        try:
            edges = [(int(e[0]), int(e[1])) for e in payload['edges'] if len(e) == 2]
        except (TypeError, ValueError, IndexError) as e:
            raise GraphFormatError(f"malformed edge list: {e}")
        if len(edges) != len(payload['edges']):
            raise GraphFormatError("every edge must be a pair [i, j]")
        return cls(m=int(payload['m']), edges=tuple(edges))


def _normalize_edges(m: int, edges: Iterable[Sequence[int]]) -> Tuple[Edge, ...]:
    seen = set()
    for edge in edges:
        i, j = (int(edge[0]), int(edge[1]))
        if i == j:
            raise InvalidTopology(f"self-loop ({i},{i}) not allowed")
        if not (0 <= i < m and 0 <= j < m):
            raise InvalidTopology(f"edge ({i},{j}) has an endpoint outside [0, {m})")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise InvalidTopology(f"duplicate edge {key}")
        seen.add(key)
    return tuple(sorted(seen))


def laplacian(topology: Topology) -> np.ndarray:
    """
    Graph Laplacian L = D - A

    @param {Topology} topology - Base graph
    @returns {np.ndarray} m x m float matrix
    """
    a = topology.adjacency()
    return (np.diag(a.sum(axis=1)) - a).astype(float)


def averaging_matrix(m: int) -> np.ndarray:
    """J = 11^T / m"""
    return np.full((m, m), 1.0 / m)


def is_connected(topology: Topology) -> bool:
    """
    Spectral connectivity test: lambda_2(L) > 1e-9

    @param {Topology} topology - Graph to test
    @returns {bool} True iff connected (a single node counts as connected)
    """
    if topology.m == 1:
        return True
    return algebraic_connectivity(laplacian(topology)) > Tolerances.CONNECTIVITY


def component_count(topology: Topology) -> int:
    return nx.number_connected_components(topology.to_networkx())


def _generator(seed: int) -> np.random.Generator:
    # PCG64 from an explicit 64-bit seed keeps graphs reproducible across numpy versions
    return np.random.Generator(np.random.PCG64(int(seed) & UINT64_MASK))


def _check_node_count(m: int):
    if m < 2:
        raise InvalidParameter(f"generators need m >= 2, got {m}")


def generate_erdos_renyi(m: int, edge_prob: float, seed: int,
                         require_connected: bool = True,
                         max_retries: int = SolverDefaults.GENERATION_RETRIES) -> Topology:
    """
    Erdos-Renyi G(m, p) graph

    Each pair (i < j) is included when its uniform draw (row-major upper
    triangle order) is below edge_prob. With require_connected the draw is
    repeated with seed+1, seed+2, ... until the graph is connected.

    @param {int} m - Node count (>= 2)
    @param {float} edge_prob - Inclusion probability in (0, 1]
    @param {int} seed - 64-bit seed
    @param {bool} require_connected - Redraw until connected
    @returns {Topology} Generated graph
    @throws {GenerationFailed} No connected draw within max_retries
    """
    _check_node_count(m)
    if not 0.0 < edge_prob <= 1.0:
        raise InvalidParameter(f"edge_prob must lie in (0, 1], got {edge_prob}")
    rows, cols = np.triu_indices(m, k=1)
    attempts = max_retries if require_connected else 1
    for attempt in range(attempts):
        draws = _generator(seed + attempt).random(rows.size)
        mask = draws < edge_prob
        topology = Topology(m, tuple(zip(rows[mask].tolist(), cols[mask].tolist())))
        if not require_connected or is_connected(topology):
            if attempt:
                logger.debug(f"ER({m}, {edge_prob}) connected after {attempt} redraws")
            return topology
    raise GenerationFailed(f"ER({m}, {edge_prob}) seed={seed}: no connected graph in {max_retries} draws")


def _geometric_points(m: int, seed: int) -> np.ndarray:
    return _generator(seed).random((m, 2))


def _geometric_topology(points: np.ndarray, radius: float) -> Topology:
    m = points.shape[0]
    dist = pdist(points)
    rows, cols = np.triu_indices(m, k=1)
    mask = dist <= radius
    return Topology(m, tuple(zip(rows[mask].tolist(), cols[mask].tolist())))


def generate_geometric(m: int, radius: float, seed: int,
                       require_connected: bool = True,
                       max_retries: int = SolverDefaults.GENERATION_RETRIES) -> Topology:
    """
    Random geometric graph on the unit square

    @param {int} m - Node count (>= 2)
    @param {float} radius - Connection radius in (0, sqrt(2)]
    @param {int} seed - 64-bit seed
    @param {bool} require_connected - Redraw point sets until connected
    @returns {Topology} Edge (i, j) iff Euclidean distance <= radius
    """
    _check_node_count(m)
    if not 0.0 < radius <= math.sqrt(2.0):
        raise InvalidParameter(f"radius must lie in (0, sqrt(2)], got {radius}")
    attempts = max_retries if require_connected else 1
    for attempt in range(attempts):
        topology = _geometric_topology(_geometric_points(m, seed + attempt), radius)
        if not require_connected or is_connected(topology):
            return topology
    raise GenerationFailed(f"geometric({m}, r={radius}) seed={seed}: no connected graph in {max_retries} draws")


def tune_geometric_radius(m: int, target_max_degree: int, seed: int) -> Tuple[float, Topology]:
    """
    Smallest radius whose geometric graph has maximal degree exactly target

    The point set is fixed by the seed; Delta is nondecreasing in the radius,
    so candidate radii are the sorted pairwise distances.

    @param {int} m - Node count
    @param {int} target_max_degree - Desired Delta(G), e.g. 5 / 10 / 13 for sparse / mild / dense
    @param {int} seed - Point-set seed
    @returns {tuple} (radius, Topology)
    @throws {GenerationFailed} If Delta jumps over the target
    """
    _check_node_count(m)
    if not 1 <= target_max_degree <= m - 1:
        raise InvalidParameter(f"target_max_degree must lie in [1, {m - 1}]")
    points = _geometric_points(m, seed)
    dist = squareform(pdist(points))
    np.fill_diagonal(dist, np.inf)
    # Delta(r) = max_i #{j : d_ij <= r}: the k-th smallest distance per node sets when it reaches degree k
    kth = np.sort(dist, axis=1)[:, target_max_degree - 1]
    radius = float(kth.min())
    topology = _geometric_topology(points, radius)
    if topology.max_degree != target_max_degree:
        raise GenerationFailed(
            f"geometric({m}) seed={seed}: maximal degree jumps past {target_max_degree} (got {topology.max_degree})")
    return radius, topology


def load_topology(path: Union[str, Path]) -> Topology:
    """
    Read a graph file {"m": int, "edges": [[i, j], ...]}

    @throws {GraphFormatError} Unreadable or malformed file
    """
    try:
        payload = read_json(path)
    except ValueError as e:
        raise GraphFormatError(f"{path}: not valid JSON ({e})")
    return Topology.from_json_dict(payload)


def save_topology(topology: Topology, path: Union[str, Path]) -> Path:
    return write_json(path, topology.to_json_dict())
