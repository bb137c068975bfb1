"""
Base Unit Test Class for matcha-sim

Provides graph fixtures and matrix assertion helpers shared by all module tests.
"""

import shutil
import tempfile
import unittest
from itertools import combinations
from pathlib import Path
from typing import List

import numpy as np

from matcha_sim.core.graph import Topology, generate_erdos_renyi, generate_geometric


class MatchaTestCase(unittest.TestCase):
    """Base class for matcha-sim unit tests"""

    def setUp(self):
        """Fresh scratch directory per test"""
        self.tmp_dir = Path(tempfile.mkdtemp(prefix="matcha-test-"))

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)

    # ---------- graph fixtures ----------

    @staticmethod
    def path_graph(m: int = 3) -> Topology:
        return Topology(m, tuple((i, i + 1) for i in range(m - 1)))

    @staticmethod
    def cycle_graph(m: int) -> Topology:
        return Topology(m, tuple((i, (i + 1) % m) for i in range(m)))

    @staticmethod
    def star_graph(m: int) -> Topology:
        return Topology(m, tuple((0, i) for i in range(1, m)))

    @staticmethod
    def complete_graph(m: int) -> Topology:
        return Topology(m, tuple(combinations(range(m), 2)))

    def triangle(self) -> Topology:
        return self.complete_graph(3)

    @staticmethod
    def random_graphs(count: int, m: int = 10, edge_prob: float = 0.4, base_seed: int = 100) -> List[Topology]:
        """Seeded connected Erdos-Renyi graphs"""
        return [generate_erdos_renyi(m, edge_prob, base_seed + i) for i in range(count)]

    @staticmethod
    def random_geometric_graphs(count: int, m: int = 16, radius: float = 0.45, base_seed: int = 500) -> List[Topology]:
        return [generate_geometric(m, radius, base_seed + i) for i in range(count)]

    # ---------- assertions ----------

    def assertMatrixClose(self, actual, expected, atol: float = 1e-10, msg: str = None):
        actual = np.asarray(actual, dtype=float)
        expected = np.asarray(expected, dtype=float)
        self.assertEqual(actual.shape, expected.shape, msg)
        if not np.allclose(actual, expected, atol=atol, rtol=0.0):
            worst = float(np.max(np.abs(actual - expected)))
            self.fail(msg or f"matrices differ by {worst:.3e} (atol {atol:.1e})")

    def assertDoublyStochastic(self, W, atol: float = 1e-10):
        W = np.asarray(W, dtype=float)
        m = W.shape[0]
        J = np.full((m, m), 1.0 / m)
        self.assertMatrixClose(W, W.T, atol=atol, msg="W is not symmetric")
        self.assertMatrixClose(W.sum(axis=1), np.ones(m), atol=atol, msg="rows of W do not sum to 1")
        self.assertMatrixClose(W @ J, J, atol=atol, msg="W J != J")
