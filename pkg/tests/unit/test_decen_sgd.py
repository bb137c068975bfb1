"""
Unit Tests for the Decentralized SGD Engine

Objectives, the update rule, logging, divergence handling and the
consensus behaviour of full runs.
"""

import numpy as np
from scipy.optimize import check_grad

from matcha_sim.constants import RunStatus
from matcha_sim.core.budget import full_activation_plan, optimize_probabilities
from matcha_sim.core.comm_time import CommTimeModel
from matcha_sim.core.graph import Topology, generate_erdos_renyi
from matcha_sim.core.matching import decompose
from matcha_sim.core.mixing import optimize_alpha
from matcha_sim.core.schedule import Policy, derive_schedule_seed, generate_schedule
from matcha_sim.experiments.pipeline import PolicyPlan, consensus_contraction
from matcha_sim.training.decen_sgd import RunSettings, initial_state, noise_generator, run, sgd_step
from matcha_sim.training.objectives import (LogisticObjective, QuadraticObjective, ZeroObjective,
                                            make_objective)
from matcha_sim.utils.errors import InvalidParameter, NonFinite
from .base_test import MatchaTestCase


def _vanilla_schedule(decomp, K, seed=0):
    mixing = optimize_alpha(decomp, full_activation_plan(decomp))
    return generate_schedule(Policy.VANILLA, decomp, None, mixing, K, seed)


def _matcha_schedule(decomp, budget, K, seed):
    plan = optimize_probabilities(decomp, budget)
    mixing = optimize_alpha(decomp, plan)
    return generate_schedule(Policy.MATCHA, decomp, plan, mixing, K, derive_schedule_seed(seed, Policy.MATCHA, budget))


class TestObjectives(MatchaTestCase):
    """Gradient oracles and published constants"""

    def test_quadratic_constants(self):
        obj = QuadraticObjective.synthetic(6, 5, lipschitz=2.0, mu=0.5, sigma=1.5, zeta=0.7, seed=3)
        self.assertAlmostEqual(obj.lipschitz, 2.0, places=10)
        self.assertAlmostEqual(obj.sigma_sq, 2.25, places=12)
        self.assertAlmostEqual(obj.zeta_sq, 0.49, places=10)
        self.assertMatrixClose(obj.gradient(obj.x_star), np.zeros(5), atol=1e-10)
        self.assertAlmostEqual(obj.f_inf, obj.loss(obj.x_star), places=12)

    def test_heterogeneity_is_exact_at_any_point(self):
        obj = QuadraticObjective.synthetic(8, 10, zeta=1.3, seed=4)
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal(10)
            local = obj.local_gradients(np.tile(x, (8, 1)))
            spread = np.mean(np.sum((local - obj.gradient(x)) ** 2, axis=1))
            self.assertAlmostEqual(spread, 1.69, places=9)

    def test_stochastic_gradient_is_unbiased_with_bounded_variance(self):
        obj = QuadraticObjective.synthetic(4, 10, sigma=2.0, seed=1)
        X = np.random.default_rng(5).standard_normal((4, 10))
        exact = obj.local_gradients(X)
        draws = np.stack([obj.stochastic_gradients(X, noise_generator(9, k)) for k in range(5000)])
        noise = draws - exact
        stderr = 2.0 / np.sqrt(10) / np.sqrt(5000)
        self.assertLessEqual(float(np.max(np.abs(noise.mean(axis=0)))), 5.0 * stderr)
        self.assertAlmostEqual(float(np.mean(np.sum(noise ** 2, axis=2))), 4.0, delta=0.2)

    def test_single_worker_oracle_matches_row(self):
        obj = QuadraticObjective.synthetic(3, 4, sigma=1.0, seed=2)
        x = np.ones(4)
        row = obj.stochastic_gradients(np.tile(x, (3, 1)), noise_generator(1, 0))[2]
        self.assertMatrixClose(obj.stochastic_gradient(2, x, noise_generator(1, 0)), row, atol=0.0)

    def test_logistic_gradient_matches_finite_differences(self):
        obj = LogisticObjective(4, 3, samples_per_worker=50, seed=8)
        for x0 in (np.zeros(3), np.array([0.3, -1.0, 2.0])):
            self.assertLess(check_grad(obj.loss, obj.gradient, x0), 1e-5)

    def test_logistic_minibatches_average_to_local_gradient(self):
        obj = LogisticObjective(3, 4, samples_per_worker=20, batch_size=4, seed=2)
        X = np.random.default_rng(1).standard_normal((3, 4))
        draws = np.stack([obj.stochastic_gradients(X, noise_generator(2, k)) for k in range(4000)])
        self.assertMatrixClose(draws.mean(axis=0), obj.local_gradients(X), atol=0.05)

    def test_logistic_label_skew(self):
        obj = LogisticObjective(5, 2, samples_per_worker=100, label_skew=0.8, seed=0)
        positives = (obj.labels > 0).mean(axis=1)
        self.assertAlmostEqual(positives[0], 0.1, places=10)
        self.assertAlmostEqual(positives[-1], 0.9, places=10)

    def test_make_objective(self):
        self.assertIsInstance(make_objective("zero", 3, 2), ZeroObjective)
        self.assertEqual(make_objective("quadratic", 3, 2, params={"sigma": 0.0}).sigma_sq, 0.0)
        with self.assertRaises(InvalidParameter):
            make_objective("cubic", 3, 2)
        with self.assertRaises(InvalidParameter):
            make_objective("quadratic", 3, 2, params={"temperature": 1.0})


class TestSgdStep(MatchaTestCase):
    """X(k+1) = W(k) (X(k) - eta G(k))"""

    def test_single_worker_is_gradient_descent(self):
        obj = QuadraticObjective(np.array([[1.0]]), np.array([[0.0]]), sigma=0.0, x0=np.array([1.0]))
        schedule = _vanilla_schedule(decompose(Topology(1)), 1)
        state = sgd_step(initial_state(obj, RunSettings(eta=0.5)), schedule, obj, seed=0)
        self.assertMatrixClose(state.X, [[0.5]], atol=0.0)
        self.assertEqual(state.k, 1)

    def test_zero_gradients_average_in_one_step_on_an_edge(self):
        decomp = decompose(Topology(2, ((0, 1),)))
        schedule = _vanilla_schedule(decomp, 1)
        state = initial_state(ZeroObjective(2, 3), RunSettings(eta=1.0, seed=4, init_spread=1.0))
        nxt = sgd_step(state, schedule, ZeroObjective(2, 3), seed=4)
        self.assertMatrixClose(nxt.X, np.tile(state.average, (2, 1)), atol=1e-6)
        self.assertMatrixClose(nxt.average, state.average, atol=1e-12)
        self.assertLess(nxt.consensus_distance(), 1e-12)

    def test_sim_time_accumulates(self):
        decomp = decompose(self.cycle_graph(6))
        schedule = _vanilla_schedule(decomp, 3)
        model = CommTimeModel(t_link=2.0, t_comp=0.5)
        state = initial_state(ZeroObjective(6, 2), RunSettings(eta=0.1))
        for _ in range(3):
            state = sgd_step(state, schedule, ZeroObjective(6, 2), seed=0, comm_model=model)
        self.assertAlmostEqual(state.sim_time, 3 * (0.5 + 2.0 * decomp.M), places=12)

    def test_noise_stream_depends_on_seed_and_iteration(self):
        a = noise_generator(3, 7).standard_normal(4)
        self.assertMatrixClose(a, noise_generator(3, 7).standard_normal(4), atol=0.0)
        self.assertFalse(np.allclose(a, noise_generator(3, 8).standard_normal(4)))
        self.assertFalse(np.allclose(a, noise_generator(4, 7).standard_normal(4)))

    def test_bad_settings(self):
        with self.assertRaises(InvalidParameter):
            RunSettings(eta=0.0)
        with self.assertRaises(InvalidParameter):
            RunSettings(eta=0.1, log_interval=0)


class TestRun(MatchaTestCase):
    """Full loops with logging"""

    def setUp(self):
        super().setUp()
        self.decomp = decompose(generate_erdos_renyi(8, 0.5, 7))
        self.objective = QuadraticObjective.synthetic(8, 10, sigma=1.0, zeta=1.0, seed=7)

    def test_records_at_start_interval_and_end(self):
        schedule = _matcha_schedule(self.decomp, 0.5, 25, seed=1)
        metrics = run(self.objective, schedule, RunSettings(eta=0.05, log_interval=10, seed=1))
        self.assertEqual([r.k for r in metrics.records], [0, 10, 20, 25])
        self.assertEqual(metrics.iterations, 25)
        self.assertEqual(metrics.status, RunStatus.OK)
        self.assertAlmostEqual(metrics.total_comm_time, float(schedule.activation_counts().sum()), places=12)

    def test_average_follows_exact_recursion(self):
        schedule = _matcha_schedule(self.decomp, 0.3, 200, seed=2)
        metrics = run(self.objective, schedule, RunSettings(eta=0.05, log_interval=1, seed=2, init_spread=0.5))
        self.assertLessEqual(metrics.average_drift_max, 1e-10)

    def test_repeated_runs_are_identical(self):
        schedule = _matcha_schedule(self.decomp, 0.5, 60, seed=3)
        settings = RunSettings(eta=0.05, log_interval=7, seed=3)
        first = run(self.objective, schedule, settings).write_csv(self.tmp_dir / "a.csv")
        second = run(self.objective, schedule, settings).write_csv(self.tmp_dir / "b.csv")
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_divergence_reports_partial_metrics(self):
        schedule = _vanilla_schedule(self.decomp, 400)
        with self.assertRaises(NonFinite) as ctx:
            with np.errstate(over='ignore', invalid='ignore'):
                run(self.objective, schedule, RunSettings(eta=1e6, log_interval=5, seed=0))
        partial = ctx.exception.partial_metrics
        self.assertEqual(partial.status, RunStatus.DIVERGED)
        self.assertEqual(partial.diverged_at, ctx.exception.iteration)
        self.assertGreaterEqual(len(partial.records), 1)
        self.assertLess(partial.iterations, 400)

    def test_worker_count_mismatch(self):
        schedule = _vanilla_schedule(self.decomp, 5)
        with self.assertRaises(InvalidParameter):
            run(ZeroObjective(5, 2), schedule, RunSettings(eta=0.1))

    def test_consensus_contracts_at_rate_rho(self):
        decomp = decompose(self.cycle_graph(12))
        plan = optimize_probabilities(decomp, 0.5)
        mixing = optimize_alpha(decomp, plan)
        curve = consensus_contraction(decomp, PolicyPlan(Policy.MATCHA, 0.5, plan, mixing), 50, list(range(50)))
        bound = curve[0] * mixing.rho ** np.arange(51)
        self.assertTrue(np.all(curve[1:] <= 1.1 * bound[1:] + 1e-12))

    def test_matcha_matches_vanilla_at_half_the_communication(self):
        vanilla_loss, matcha_loss = [], []
        vanilla_comm, matcha_comm = 0.0, 0.0
        for seed in range(20):
            settings = RunSettings(eta=0.05, log_interval=1000, seed=seed)
            vanilla = run(self.objective, _vanilla_schedule(self.decomp, 5000), settings)
            matcha = run(self.objective, _matcha_schedule(self.decomp, 0.5, 5000, seed), settings)
            vanilla_loss.append(vanilla.final_loss)
            matcha_loss.append(matcha.final_loss)
            vanilla_comm += vanilla.total_comm_time
            matcha_comm += matcha.total_comm_time
        relative = abs(np.mean(matcha_loss) - np.mean(vanilla_loss)) / np.mean(vanilla_loss)
        self.assertLessEqual(relative, 0.05)
        self.assertAlmostEqual(matcha_comm / vanilla_comm, 0.5, delta=0.05)
