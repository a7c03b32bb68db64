"""
Full-budget training runs. Each one takes hours; run them with `run_tests.py 9 --slow`.
"""
import functools
import unittest

from config import RunConfig
from evaluation import evaluate
from main import variant_config
from test_utils.decorators import number, slow
from trainer import Trainer, TrainingResult
from utils import derive_seed

HEADLINE_EPISODES = 1000


@functools.lru_cache(maxsize=None)
def trained(variant: str) -> TrainingResult:
    """Train one variant of the default run once per test process."""
    return Trainer(variant_config(RunConfig(), variant)).train()


def fresh_evaluation(result: TrainingResult):
    config = RunConfig()
    seed = derive_seed(derive_seed(config.seed, "evaluation"), "headline")
    return evaluate(result.params, HEADLINE_EPISODES, seed, config)


def first_reaching(result: TrainingResult, threshold: float) -> int:
    """Index of the first evaluation point at or above `threshold`; len(log) if never."""
    for k, row in enumerate(result.log):
        if row.success_rate >= threshold:
            return k
    return len(result.log)


class TestAblations(unittest.TestCase):

    @number("9.1")
    @slow()
    def test_drqn_headline(self):
        report = fresh_evaluation(trained("replay_on"))
        self.assertGreaterEqual(report.success_rate, 0.95)
        self.assertLessEqual(report.collision_rate, 0.02)

    @number("9.2")
    @slow()
    def test_recurrence_beats_feed_forward(self):
        drqn = fresh_evaluation(trained("lstm_on"))
        dqn = fresh_evaluation(trained("lstm_off"))
        self.assertGreaterEqual(drqn.success_rate - dqn.success_rate, 0.05)
        self.assertLess(drqn.collision_rate, dqn.collision_rate)

    @number("9.3")
    @slow()
    def test_replay_needed(self):
        without = trained("replay_off")
        self.assertLess(max(row.success_rate for row in without.log), 0.65)

    @number("9.4")
    @slow()
    def test_dropout_helps(self):
        on = trained("dropout_on").log[-1].success_rate
        off = trained("dropout_off").log[-1].success_rate
        self.assertGreaterEqual(on - off, 0.10)

    @number("9.5")
    @slow()
    def test_shared_weights_learn_faster(self):
        shared = first_reaching(trained("shared_on"), 0.80)
        unshared = first_reaching(trained("shared_off"), 0.80)
        self.assertLess(shared, len(trained("shared_on").log))
        self.assertLess(shared, unshared)
