"""
Unit Tests for the Schedule Generator
"""

import json

import numpy as np

from matcha_sim.core.budget import ActivationPlan, full_activation_plan
from matcha_sim.core.comm_time import CommTimeModel
from matcha_sim.core.graph import averaging_matrix, laplacian
from matcha_sim.core.matching import decompose
from matcha_sim.core.mixing import matcha_moments, optimize_alpha, optimize_alpha_periodic, second_moment
from matcha_sim.core.schedule import (Policy, Schedule, comm_time_at, derive_schedule_seed, generate_schedule,
                                      mixing_matrix_at)
from matcha_sim.utils.errors import IndexOutOfRange, InvalidBudget, InvalidParameter, InvalidPolicyParams
from .base_test import MatchaTestCase


def _plan(p, budget=0.5) -> ActivationPlan:
    p = tuple(float(x) for x in p)
    return ActivationPlan(p, budget, 0.0, float(sum(p)))


class TestScheduleDraws(MatchaTestCase):
    """Activation tables and their statistics"""

    def setUp(self):
        super().setUp()
        self.decomp = decompose(self.cycle_graph(7))
        self.plan = _plan(np.linspace(0.2, 0.8, self.decomp.M), budget=0.5)
        self.mixing = optimize_alpha(self.decomp, self.plan)

    def test_same_seed_same_table(self):
        a = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 500, seed=12)
        b = generate_schedule('matcha', self.decomp, self.plan, self.mixing, 500, seed=12)
        np.testing.assert_array_equal(a.activations, b.activations)

    def test_different_seed_different_table(self):
        a = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 500, seed=12)
        b = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 500, seed=13)
        self.assertFalse(np.array_equal(a.activations, b.activations))

    def test_table_is_read_only(self):
        schedule = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 10, seed=1)
        with self.assertRaises(ValueError):
            schedule.activations[0, 0] = True

    def test_bernoulli_frequencies(self):
        K = 20_000
        schedule = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, K, seed=99)
        p = self.plan.p
        tolerance = 4.0 * np.sqrt(p * (1.0 - p) / K) + 1e-12
        self.assertTrue(np.all(np.abs(schedule.empirical_frequencies() - p) <= tolerance))
        self.assertAlmostEqual(schedule.mean_comm_time(), p.sum(), delta=4.0 * np.sqrt(p.sum() / K))

    def test_periodic_switches_whole_graph(self):
        mixing = optimize_alpha_periodic(self.decomp, 0.3)
        schedule = generate_schedule(Policy.PERIODIC, self.decomp, None, mixing, 10_000, seed=5, budget=0.3)
        self.assertEqual(schedule.activations.shape, (10_000, 1))
        for k in range(50):
            self.assertIn(schedule.active_count(k), (0, self.decomp.M))
        frequency = float(schedule.activations.mean())
        self.assertAlmostEqual(frequency, 0.3, delta=4.0 * np.sqrt(0.21 / 10_000))
        idle = int(np.flatnonzero(~schedule.activations[:, 0])[0])
        self.assertMatrixClose(schedule.mixing_matrix(idle), np.eye(self.decomp.m), atol=0.0)

    def test_vanilla_activates_everything(self):
        mixing = optimize_alpha(self.decomp, full_activation_plan(self.decomp))
        schedule = generate_schedule(Policy.VANILLA, self.decomp, None, mixing, 20, seed=0)
        self.assertIsNone(schedule.activations)
        self.assertEqual(schedule.budget, 1.0)
        expected = np.eye(7) - mixing.alpha * laplacian(self.decomp.topology)
        for k in (0, 19):
            self.assertMatrixClose(schedule.mixing_matrix(k), expected)
            self.assertEqual(schedule.comm_time(k), float(self.decomp.M))

    def test_mixing_matrices_are_doubly_stochastic(self):
        schedule = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 30, seed=3)
        for k in range(30):
            self.assertDoublyStochastic(mixing_matrix_at(schedule, k))

    def test_comm_time_counts_active_matchings(self):
        schedule = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 40, seed=8)
        model = CommTimeModel(t_link=2.5)
        for k in range(40):
            self.assertEqual(comm_time_at(schedule, k, model), 2.5 * schedule.active_count(k))

    def test_index_out_of_range(self):
        schedule = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 5, seed=3)
        for k in (-1, 5):
            with self.assertRaises(IndexOutOfRange):
                schedule.mixing_matrix(k)

    def test_invalid_policy_parameters(self):
        with self.assertRaises(InvalidPolicyParams):
            generate_schedule(Policy.MATCHA, self.decomp, None, self.mixing, 5, seed=0)
        with self.assertRaises(InvalidPolicyParams):
            generate_schedule(Policy.MATCHA, self.decomp, _plan([0.5]), self.mixing, 5, seed=0)
        with self.assertRaises(InvalidPolicyParams):
            generate_schedule(Policy.PERIODIC, self.decomp, None, self.mixing, 5, seed=0)
        with self.assertRaises(InvalidPolicyParams):
            generate_schedule('gossip', self.decomp, self.plan, self.mixing, 5, seed=0)
        with self.assertRaises(InvalidBudget):
            generate_schedule(Policy.PERIODIC, self.decomp, None, self.mixing, 5, seed=0, budget=1.5)
        with self.assertRaises(InvalidParameter):
            generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 0, seed=0)

    def test_json_export(self):
        schedule = generate_schedule(Policy.MATCHA, self.decomp, self.plan, self.mixing, 4, seed=21)
        compact = schedule.to_json_dict()
        self.assertEqual(compact["policy"], "matcha")
        self.assertEqual(compact["K"], 4)
        self.assertEqual(compact["plan_sha256"], self.plan.digest())
        self.assertNotIn("activations", compact)
        full = json.loads(json.dumps(schedule.to_json_dict(full=True)))
        self.assertEqual(np.array(full["activations"], dtype=bool).tolist(), schedule.activations.tolist())


class TestMixingAtIteration(MatchaTestCase):
    """W(k) from activation flags"""

    def test_path3_first_matching_only(self):
        decomp = decompose(self.path_graph(3))
        schedule = Schedule(Policy.MATCHA, 0, 1, np.array([[True, False]]), 0.5, decomp)
        self.assertMatrixClose(schedule.mixing_matrix(0), [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])

    def test_nothing_active_is_identity(self):
        decomp = decompose(self.path_graph(3))
        schedule = Schedule(Policy.MATCHA, 0, 1, np.array([[False, False]]), 0.5, decomp)
        self.assertMatrixClose(schedule.mixing_matrix(0), np.eye(3), atol=0.0)
        self.assertEqual(schedule.comm_time(0), 0.0)

    def test_expected_contraction_of_consensus_error(self):
        decomp = decompose(self.random_graphs(1, m=8)[0])
        plan = _plan(np.full(decomp.M, 0.4), budget=0.4)
        mixing = optimize_alpha(decomp, plan)
        K = 20_000
        schedule = generate_schedule(Policy.MATCHA, decomp, plan, mixing, K, seed=17)

        X = np.random.default_rng(2).standard_normal((decomp.m, 3))
        J = averaging_matrix(decomp.m)
        W = np.eye(decomp.m) - mixing.alpha * np.tensordot(schedule.activations.astype(float),
                                                           decomp.laplacians, axes=1)
        errors = np.einsum('kab,bc->kac', W - J, X)
        samples = np.sum(errors ** 2, axis=(1, 2))
        deviation = np.sum(((np.eye(decomp.m) - J) @ X) ** 2)

        L_bar, L_tilde = matcha_moments(decomp, plan.p)
        exact = float(np.trace(X.T @ (second_moment(L_bar, L_tilde, mixing.alpha) - J) @ X))
        self.assertAlmostEqual(samples.mean(), exact, delta=4.0 * samples.std() / np.sqrt(K))
        self.assertLessEqual(exact, mixing.rho * deviation + 1e-10)

    @staticmethod
    def _mixing_stack(schedule, decomp, alpha: float) -> np.ndarray:
        active = schedule.activations.astype(float)
        if active.shape[1] != decomp.M:
            active = np.repeat(active, decomp.M, axis=1)
        return np.eye(decomp.m) - alpha * np.tensordot(active, decomp.laplacians, axes=1)

    def _check_window_products(self, policy: Policy):
        decomp = decompose(self.random_graphs(1, m=8)[0])
        budget = 0.4
        if policy is Policy.MATCHA:
            plan = _plan(np.full(decomp.M, budget), budget=budget)
            mixing = optimize_alpha(decomp, plan)
        else:
            plan = None
            mixing = optimize_alpha_periodic(decomp, budget)
        B = np.random.default_rng(5).standard_normal((3, decomp.m))
        J = averaging_matrix(decomp.m)
        scale = np.sum(B ** 2)
        draws = 10_000

        for n in (1, 2, 5):
            schedule = generate_schedule(policy, decomp, plan, mixing, n * draws, seed=23 + n, budget=budget)
            W = self._mixing_stack(schedule, decomp, mixing.alpha)
            for k in (0, n * draws - 1):
                self.assertMatrixClose(W[k], schedule.mixing_matrix(k), atol=1e-12)

            windows = W.reshape(draws, n, decomp.m, decomp.m)
            product = windows[:, 0]
            for i in range(1, n):
                product = product @ windows[:, i]
            samples = np.sum(np.einsum('ab,kbc->kac', B, product - J) ** 2, axis=(1, 2))
            rse = samples.std() / (np.sqrt(draws) * samples.mean())
            with self.subTest(policy=policy.value, window=n):
                self.assertLessEqual(samples.mean(), mixing.rho ** n * scale * (1.0 + 4.0 * rse))

    def test_window_products_contract_like_rho_power_matcha(self):
        self._check_window_products(Policy.MATCHA)

    def test_window_products_contract_like_rho_power_periodic(self):
        self._check_window_products(Policy.PERIODIC)


class TestSeedDerivation(MatchaTestCase):
    """Per-run schedule seeds"""

    def test_deterministic_and_distinct(self):
        seed = derive_schedule_seed(3, Policy.MATCHA, 0.25)
        self.assertEqual(seed, derive_schedule_seed(3, Policy.MATCHA, 0.25))
        others = {derive_schedule_seed(3, Policy.PERIODIC, 0.25), derive_schedule_seed(3, Policy.MATCHA, 0.5),
                  derive_schedule_seed(4, Policy.MATCHA, 0.25)}
        self.assertNotIn(seed, others)
        self.assertTrue(0 <= seed < 2 ** 64)

    def test_policy_parse(self):
        self.assertIs(Policy.parse('Periodic'), Policy.PERIODIC)
        self.assertIs(Policy.parse(Policy.VANILLA), Policy.VANILLA)
