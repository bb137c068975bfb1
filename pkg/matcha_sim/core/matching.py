"""
Matching Decomposition - Misra-Gries edge coloring
Splits the base graph into M disjoint matchings, M in {Delta, Delta + 1}
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from matcha_sim.core.graph import Edge, Topology, laplacian
from matcha_sim.utils.errors import InvalidTopology

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Matching:
    """
    Edge subset in which every vertex has at most one incident edge

    @property {tuple} edges - Sorted (i, j) pairs, i < j
    """
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        edges = tuple(sorted((min(i, j), max(i, j)) for i, j in self.edges))
        endpoints = [v for e in edges for v in e]
        if len(endpoints) != len(set(endpoints)):
            raise InvalidTopology(f"edges {edges} share a vertex, not a matching")
        object.__setattr__(self, 'edges', edges)

    def __len__(self) -> int:
        return len(self.edges)


def matching_laplacian(matching: Matching, m: int) -> np.ndarray:
    """
    Laplacian of the subgraph (V, E_j)

    Block diagonal in 2x2 blocks [[1, -1], [-1, 1]], so ||L_j||_2 <= 2 and L_j^2 = 2 L_j.

    @param {Matching} matching - One color class
    @param {int} m - Node count
    @returns {np.ndarray} m x m float matrix
    """
    return laplacian(Topology(m, matching.edges))


@dataclass(frozen=True, eq=False)
class MatchingDecomposition:
    """
    Ordered matchings covering the base edge set exactly once

    The matching order is the color index order of the edge coloring and
    fixes the Bernoulli draw order of schedules.

    @class MatchingDecomposition
    @property {Topology} topology - Base graph
    @property {tuple} matchings - M Matching values
    @property {np.ndarray} laplacians - M x m x m stack (L_1..L_M)
    """
    topology: Topology
    matchings: Tuple[Matching, ...]
    laplacians: np.ndarray

    @property
    def M(self) -> int:
        return len(self.matchings)

    @property
    def m(self) -> int:
        return self.topology.m

    def expected_laplacian(self, weights: np.ndarray) -> np.ndarray:
        """sum_j w_j L_j"""
        return np.tensordot(np.asarray(weights, dtype=float), self.laplacians, axes=1)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "M": self.M,
            "matchings": [[[i, j] for i, j in mt.edges] for mt in self.matchings],
        }


class _EdgeColoring:
    """Mutable partial proper edge coloring used while running Misra-Gries"""

    def __init__(self, m: int):
        self.color_of: List[Dict[int, int]] = [dict() for _ in range(m)]   # vertex -> {neighbor: color}
        self.at_color: List[Dict[int, int]] = [dict() for _ in range(m)]   # vertex -> {color: neighbor}

    def is_free(self, vertex: int, color: int) -> bool:
        return color not in self.at_color[vertex]

    def free_color(self, vertex: int, palette: int) -> int:
        return next(c for c in range(palette) if c not in self.at_color[vertex])

    def color(self, u: int, v: int) -> Optional[int]:
        return self.color_of[u].get(v)

    def set(self, u: int, v: int, color: int):
        self.color_of[u][v] = color
        self.color_of[v][u] = color
        self.at_color[u][color] = v
        self.at_color[v][color] = u

    def unset(self, u: int, v: int) -> int:
        color = self.color_of[u].pop(v)
        del self.color_of[v][u]
        del self.at_color[u][color]
        del self.at_color[v][color]
        return color


def _maximal_fan(coloring: _EdgeColoring, u: int, v: int) -> List[int]:
    # F[0] = v; F[i+1] is the smallest colored neighbor w of u whose color(u, w) is free on F[i]
    fan = [v]
    in_fan = {v}
    extended = True
    while extended:
        extended = False
        last = fan[-1]
        for w in sorted(coloring.color_of[u]):
            if w in in_fan:
                continue
            if coloring.is_free(last, coloring.color_of[u][w]):
                fan.append(w)
                in_fan.add(w)
                extended = True
                break
    return fan


def _invert_path(coloring: _EdgeColoring, u: int, c: int, d: int):
    # maximal path from u alternating d, c, d, ... (c is free on u); swap c and d along it
    path = []
    x, want = u, d
    while want in coloring.at_color[x]:
        y = coloring.at_color[x][want]
        path.append((x, y, want))
        x, want = y, (c if want == d else d)
    for x, y, _ in path:
        coloring.unset(x, y)
    for x, y, col in path:
        coloring.set(x, y, c if col == d else d)


def _color_edge(coloring: _EdgeColoring, u: int, v: int, palette: int):
    fan = _maximal_fan(coloring, u, v)
    c = coloring.free_color(u, palette)
    d = coloring.free_color(fan[-1], palette)
    if c != d:
        _invert_path(coloring, u, c, d)

    # longest prefix of the fan that is still a fan, first member with d free
    w_index = None
    for i, w in enumerate(fan):
        if i > 0 and not coloring.is_free(fan[i - 1], coloring.color(u, w)):
            break
        if coloring.is_free(w, d):
            w_index = i
            break
    if w_index is None:
        raise RuntimeError(f"Misra-Gries invariant broken while coloring ({u},{v})")

    shifted = [coloring.color(u, fan[i + 1]) for i in range(w_index)]
    for i in range(w_index):
        coloring.unset(u, fan[i + 1])
    for i in range(w_index):
        coloring.set(u, fan[i], shifted[i])
    coloring.set(u, fan[w_index], d)


def decompose(topology: Topology) -> MatchingDecomposition:
    """
    Decompose the base graph into disjoint matchings

    Misra-Gries fan rotation with Delta + 1 colors over edges in lexicographic
    order; empty color classes are dropped. Connectivity is not required.

    @param {Topology} topology - Base graph
    @returns {MatchingDecomposition} Matchings in color index order
    """
    palette = topology.max_degree + 1
    coloring = _EdgeColoring(topology.m)
    for u, v in topology.edges:
        _color_edge(coloring, u, v, palette)

    classes: List[List[Edge]] = [[] for _ in range(palette)]
    for u, v in topology.edges:
        classes[coloring.color(u, v)].append((u, v))
    matchings = tuple(Matching(tuple(edges)) for edges in classes if edges)

    if matchings:
        stack = np.stack([matching_laplacian(mt, topology.m) for mt in matchings])
    else:
        stack = np.zeros((0, topology.m, topology.m))
    stack.setflags(write=False)

    logger.debug(f"decomposed m={topology.m} |E|={topology.edge_count} "
                 f"Delta={topology.max_degree} into M={len(matchings)} matchings")
    return MatchingDecomposition(topology=topology, matchings=matchings, laplacians=stack)


def validate_decomposition(decomp: MatchingDecomposition) -> List[str]:
    """
    Exhaustive validity check

    @param {MatchingDecomposition} decomp - Decomposition to check
    @returns {list} Human-readable violations (empty when valid)
    """
    problems = []
    topology = decomp.topology
    seen: Dict[Edge, int] = {}
    for index, matching in enumerate(decomp.matchings):
        endpoints = [v for e in matching.edges for v in e]
        if len(endpoints) != len(set(endpoints)):
            problems.append(f"matching {index} is not vertex-disjoint")
        for edge in matching.edges:
            if edge in seen:
                problems.append(f"edge {edge} appears in matchings {seen[edge]} and {index}")
            seen[edge] = index
    if set(seen) != set(topology.edges):
        problems.append("matchings do not cover the base edge set exactly")
    if topology.edge_count and decomp.M not in (topology.max_degree, topology.max_degree + 1):
        problems.append(f"M={decomp.M} not in {{Delta, Delta+1}} with Delta={topology.max_degree}")
    if decomp.M and not np.array_equal(decomp.laplacians.sum(axis=0), laplacian(topology)):
        problems.append("sum of matching Laplacians differs from the base Laplacian")
    return problems
