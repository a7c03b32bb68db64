import unittest

import numpy as np

from config import EpisodeConfig, RunConfig
from evaluation import EvalReport, collision_rate, eval_seed, evaluate, greedy
from test_utils.decorators import number
from tests.helpers import initial_params, tiny_config
from trainer import Trainer
from utils import derive_seed

KEEP_SET_SPEED = 0
STOP_AT_INTERSECTION = 1


class TestReport(unittest.TestCase):

    @number("7.1")
    def test_rates(self):
        report = EvalReport(n_episodes=100, successes=90, collisions=4, timeouts=6, avg_reward=0.5)
        self.assertAlmostEqual(report.success_rate, 0.9)
        self.assertAlmostEqual(report.collision_rate, 0.04)
        self.assertAlmostEqual(collision_rate(report), 0.04)
        self.assertAlmostEqual(report.timeout_rate, 0.06)
        self.assertAlmostEqual(report.ctr, 0.4)

    @number("7.2")
    def test_edge_cases(self):
        self.assertEqual(EvalReport(10, 10, 0, 0, 0.7).ctr, 0.0)
        self.assertEqual(EvalReport(10, 0, 0, 10, -0.1).ctr, 0.0)
        self.assertEqual(EvalReport(10, 0, 10, 0, -2.0).ctr, 1.0)
        empty = EvalReport(0, 0, 0, 0, 0.0)
        self.assertEqual((empty.success_rate, empty.collision_rate, empty.ctr), (0.0, 0.0, 0.0))
        self.assertRaises(ValueError, lambda: EvalReport(10, 5, 1, 1, 0.0))

    @number("7.3")
    def test_greedy_ties(self):
        self.assertEqual(greedy(np.array([1.0, 3.0, 3.0, 0.0, 0.0, 0.0])), 1)
        self.assertEqual(greedy(np.zeros(6)), 0)


class TestEvaluate(unittest.TestCase):

    @number("7.4")
    def test_always_stop_never_succeeds(self):
        report = evaluate(initial_params(0), 10, seed=4, policy=lambda q: STOP_AT_INTERSECTION)
        self.assertEqual(report.successes, 0)
        self.assertGreaterEqual(report.timeouts, 8)
        self.assertEqual(report.n_episodes, 10)
        self.assertLess(report.avg_reward, 0.0)

    @number("7.5")
    def test_keep_speed_against_yielding_traffic(self):
        config = RunConfig(episode=EpisodeConfig(intentions=("give_way", "give_way")))
        report = evaluate(initial_params(0), 20, seed=1, config=config, policy=lambda q: KEEP_SET_SPEED)
        self.assertEqual(report.successes, 20)
        self.assertGreater(report.avg_reward, 0.0)

    @number("7.6")
    def test_deterministic(self):
        params = initial_params(1)
        first = evaluate(params, 5, seed=9)
        self.assertEqual(first, evaluate(params, 5, seed=9))
        self.assertEqual(first.seed, 9)
        self.assertEqual(evaluate(params, 0, seed=9).n_episodes, 0)

    @number("7.7")
    def test_seed_namespaces_are_disjoint(self):
        trainer = Trainer(tiny_config())
        self.assertEqual(trainer.eval_seed, derive_seed(tiny_config().seed, "evaluation"))
        training = {trainer.training_seed(ep) for ep in range(1, 2001)}
        evaluation = {eval_seed(trainer.eval_seed, k) for k in range(2000)}
        self.assertEqual(len(training), 2000)
        self.assertEqual(len(evaluation), 2000)
        self.assertEqual(training & evaluation, set())
