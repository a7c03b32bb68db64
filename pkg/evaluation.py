"""
Greedy-policy evaluation and the headline metrics: success rate, collision rate,
timeout rate, collision-to-timeout ratio and average episodic reward.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from config import RunConfig
from constants import EpisodeStatus
from environment import IntersectionEnv, run_episode
from qnet import NetworkParams
from utils import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    n_episodes: int
    successes: int
    collisions: int
    timeouts: int
    avg_reward: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.successes + self.collisions + self.timeouts != self.n_episodes:
            raise ValueError("outcome counts must add up to the number of episodes")

    @property
    def success_rate(self) -> float:
        return self.successes / self.n_episodes if self.n_episodes else 0.0

    @property
    def collision_rate(self) -> float:
        return self.collisions / self.n_episodes if self.n_episodes else 0.0

    @property
    def timeout_rate(self) -> float:
        return self.timeouts / self.n_episodes if self.n_episodes else 0.0

    @property
    def ctr(self) -> float:
        """Share of failures that were collisions; 0 when nothing failed."""
        failures = self.collisions + self.timeouts
        return self.collisions / failures if failures else 0.0


def collision_rate(report: EvalReport) -> float:
    return report.collision_rate


def greedy(q_values: np.ndarray) -> int:
    # argmax returns the first maximum, so ties go to the lowest action index.
    return int(np.argmax(q_values))


def eval_seed(seed: int, k: int) -> int:
    """Seeds of evaluation episodes live in their own namespace, apart from training's."""
    return derive_seed(seed, "eval", k)


def evaluate(params: NetworkParams, n_episodes: int, seed: int, config: RunConfig | None = None,
             policy: Optional[Callable[[np.ndarray], int]] = None) -> EvalReport:
    """
    Run `n_episodes` deterministic episodes (no exploration, no dropout).
    `policy` replaces the greedy choice, e.g. to score a scripted baseline.

    :complexity: O(n_episodes * episode length * network cost)
    """
    config = config if config is not None else RunConfig()
    env = IntersectionEnv.from_run_config(config)
    choose = policy if policy is not None else greedy
    counts = {EpisodeStatus.SUCCESS: 0, EpisodeStatus.COLLISION: 0, EpisodeStatus.TIMEOUT: 0}
    total_reward = 0.0
    for k in range(n_episodes):
        result = run_episode(env, params, choose, eval_seed(seed, k), config.trainer.gamma, episode_id=k)
        counts[result.status] += 1
        total_reward += result.total_reward
    report = EvalReport(
        n_episodes=n_episodes,
        successes=counts[EpisodeStatus.SUCCESS],
        collisions=counts[EpisodeStatus.COLLISION],
        timeouts=counts[EpisodeStatus.TIMEOUT],
        avg_reward=total_reward / n_episodes if n_episodes else 0.0,
        seed=seed,
    )
    logger.debug("evaluated %d episodes: success %.3f collision %.3f", n_episodes,
                 report.success_rate, report.collision_rate)
    return report
