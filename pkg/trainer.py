"""
Deep (recurrent) Q-learning.

Episodes are played epsilon-greedily with the LSTM state carried through the episode.
After each episode the network is updated either from replayed sequences (sampled
uniformly over stored transitions) or, for the no-replay baseline, from the episode
just played, in order. Training sequences always start from a zero recurrent state;
their first steps only warm it up.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from config import RunConfig
from constants import EpisodeStatus
from data_structures.circular_queue import CircularQueue
from environment import EpisodeResult, IntersectionEnv, run_episode
from evaluation import EvalReport, evaluate
from qnet import (
    NetworkParams, OptimizerState, TrainingError, apply_gradients, backward,
    forward_sequence, init_params, sample_dropout_mask,
)
from replay_buffer import ReplayBuffer, SampledSequence, episode_sequences, sample_sequences
from serialize import CsvLog, TRAINING_LOG_COLUMNS, TrainingLogRow, save_checkpoint, write_training_rows
from utils import av, derive_rng, derive_seed

logger = logging.getLogger(__name__)

# Window of the rolling training statistics in the log.
TRAIN_STATS_WINDOW = 100

class DivergenceError(TrainingError):
    pass


def select_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """
    Uniform over all actions with probability epsilon, else the argmax (lowest index on ties).

    :raises ValueError: if epsilon is outside [0, 1].
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, len(q_values)))
    return int(np.argmax(q_values))


def td_target(reward: float, next_q: np.ndarray, terminal: bool, gamma: float) -> float:
    """y = r + gamma * max_a Q(s', a), or just r at the end of an episode."""
    if terminal:
        return float(reward)
    return float(reward + gamma * np.max(next_q))


def linear_epsilon(episode_index: int, start: float, end: float, horizon: int) -> float:
    """Decays linearly from start to end over `horizon` episodes, then stays at end."""
    if horizon <= 0:
        return end
    fraction = min(1.0, episode_index / horizon)
    return (1.0 - fraction) * start + fraction * end


def sequence_steps(target: NetworkParams, sequence: SampledSequence,
                   gamma: float) -> list[tuple]:
    """
    (obs, action, target) triples for one sequence; burn-in steps get no target.
    Next-state values come from running `target` over the sequence's next observations.
    """
    next_qs = forward_sequence(target, [e.next_obs for e in sequence.experiences])
    steps = []
    for t, e in enumerate(sequence.experiences):
        if t < sequence.burn_in:
            steps.append((e.obs, None, None))
        else:
            steps.append((e.obs, e.action, td_target(e.reward, next_qs[t], e.terminal, gamma)))
    return steps


def batch_gradients(params: NetworkParams, target: NetworkParams, batch: Sequence[SampledSequence],
                    gamma: float, mask_fn: Optional[Callable[[], object]] = None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss and mean gradient over a batch; each sequence gets its own dropout mask."""
    grads = params.zeros_like()
    total = 0.0
    for sequence in batch:
        mask = mask_fn() if mask_fn is not None else None
        loss, g = backward(params, sequence_steps(target, sequence, gamma), sequence.burn_in,
                           dropout_mask=mask)
        total += loss
        for name in grads:
            grads[name] += g[name]
    n = len(batch)
    return total / n, {name: g / n for name, g in grads.items()}


@dataclass(frozen=True)
class TrainingResult:
    params: NetworkParams
    log: tuple[TrainingLogRow, ...]
    updates: int
    final_report: EvalReport | None


class Trainer:
    """
    Owns the online and target parameters, the optimizer, the replay buffer and one
    random stream per purpose (init, exploration, sampling, dropout). Training episode
    seeds and evaluation seeds are derived from the root seed in separate namespaces.
    """

    def __init__(self, config: RunConfig, run_dir: str | Path | None = None,
                 evaluate_fn: Callable[..., EvalReport] = evaluate) -> None:
        config.validate()
        self.config = config
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.evaluate_fn = evaluate_fn
        tc = config.trainer
        seed = config.seed

        self.params = init_params(config.network, derive_rng(seed, "init"), tc.use_lstm, tc.share_weights)
        self.target = self.params.copy()
        self.optimizer = OptimizerState.create(self.params, config.network)
        self.buffer = ReplayBuffer(tc.buffer_capacity)
        self.env = IntersectionEnv.from_run_config(config)
        self.explore_rng = derive_rng(seed, "exploration")
        self.sample_rng = derive_rng(seed, "sampling")
        self.dropout_rng = derive_rng(seed, "dropout")
        self.eval_seed = derive_seed(seed, "evaluation")

        self.updates = 0
        self.losses: CircularQueue[float] = CircularQueue(tc.loss_window)
        self.recent: CircularQueue[EpisodeStatus] = CircularQueue(TRAIN_STATS_WINDOW)
        self.log: list[TrainingLogRow] = []
        self._last_report: EvalReport | None = None
        self.csv: CsvLog | None = None
        if self.run_dir is not None:
            self.csv = CsvLog(self.run_dir / "training_log.csv", TRAINING_LOG_COLUMNS)

    @property
    def epsilon_horizon(self) -> int:
        tc = self.config.trainer
        return max(1, round(tc.epsilon_decay_fraction * tc.episodes))

    def epsilon(self, episode_index: int) -> float:
        tc = self.config.trainer
        return linear_epsilon(episode_index, tc.epsilon_start, tc.epsilon_end, self.epsilon_horizon)

    def training_seed(self, episode: int) -> int:
        return derive_seed(self.config.seed, "train", episode)

    def _mask(self):
        return sample_dropout_mask(self.config.network, self.dropout_rng)

    def update(self, batch: Sequence[SampledSequence]) -> float:
        """
        One optimizer step on a batch of sequences.

        :raises DivergenceError: on a non-finite loss or gradient.
        """
        tc = self.config.trainer
        target = self.target if tc.target_sync_interval > 0 else self.params
        mask_fn = self._mask if tc.use_dropout else None
        loss, grads = batch_gradients(self.params, target, batch, tc.gamma, mask_fn)
        if not math.isfinite(loss):
            raise DivergenceError(f"loss became {loss} at update {self.updates}")
        try:
            self.params, self.optimizer = apply_gradients(self.params, grads, self.optimizer)
        except TrainingError as e:
            raise DivergenceError(str(e)) from e
        self.updates += 1
        if tc.target_sync_interval > 0 and self.updates % tc.target_sync_interval == 0:
            self.target = self.params.copy()
        self.losses.push_evicting(loss)
        return loss

    def learn_from(self, result: EpisodeResult) -> None:
        tc = self.config.trainer
        length, steps = tc.effective_sequence_length, tc.effective_train_steps
        if tc.use_replay:
            self.buffer.add_episode(result.experiences)
            for _ in range(tc.updates_per_episode):
                self.update(sample_sequences(self.buffer, tc.batch_size, length, self.sample_rng, steps))
        else:
            sequences = episode_sequences(result.experiences, length, steps)
            for start in range(0, len(sequences), tc.batch_size):
                self.update(sequences[start:start + tc.batch_size])

    def loss_moving_avg(self) -> float:
        return av(*self.losses) if len(self.losses) else float("nan")

    def train_stats(self) -> tuple[float, float]:
        """Success rate and CTR over the recent training episodes."""
        if self.recent.is_empty():
            return 0.0, 0.0
        statuses = list(self.recent)
        collisions = statuses.count(EpisodeStatus.COLLISION)
        timeouts = statuses.count(EpisodeStatus.TIMEOUT)
        failures = collisions + timeouts
        return statuses.count(EpisodeStatus.SUCCESS) / len(statuses), (collisions / failures if failures else 0.0)

    def evaluation_point(self, episode: int, epsilon: float) -> TrainingLogRow:
        tc = self.config.trainer
        report = self.evaluate_fn(self.params, tc.eval_episodes, self.eval_seed, self.config)
        train_success, train_ctr = self.train_stats()
        row = TrainingLogRow(
            episode=episode,
            success_rate=report.success_rate,
            collision_rate=report.collision_rate,
            timeout_rate=report.timeout_rate,
            ctr=report.ctr,
            avg_reward=report.avg_reward,
            epsilon=epsilon,
            loss_moving_avg=self.loss_moving_avg(),
            train_success_last100=train_success,
            train_ctr_last100=train_ctr,
        )
        self.log.append(row)
        if self.csv is not None:
            write_training_rows(self.csv, [row])
        if self.run_dir is not None:
            self.checkpoint(f"episode_{episode:06d}.npz", episode=episode, updates=self.updates)
        logger.info(
            "episode %d: success %.3f collision %.4f ctr %.3f reward %.3f epsilon %.3f loss %.5f",
            episode, row.success_rate, row.collision_rate, row.ctr, row.avg_reward, epsilon, row.loss_moving_avg,
        )
        self._last_report = report
        return row

    def checkpoint(self, name: str, **extra) -> Path | None:
        if self.run_dir is None:
            return None
        return save_checkpoint(self.run_dir / "checkpoints" / name, self.params, self.config, **extra)

    def train(self) -> TrainingResult:
        """
        Run the configured number of episodes, evaluating every eval_interval episodes
        and after the last one.

        :raises DivergenceError: after writing a `diverged.npz` checkpoint.
        """
        tc = self.config.trainer
        mode = "DRQN" if tc.use_lstm else "DQN"
        logger.info(
            "training %s (%s) seed %d config %s: replay=%s dropout=%s shared=%s",
            self.config.name, mode, self.config.seed, self.config.hash()[:12],
            tc.use_replay, tc.use_dropout, tc.share_weights,
        )
        for episode in range(1, tc.episodes + 1):
            epsilon = self.epsilon(episode - 1)
            result = run_episode(
                self.env, self.params,
                lambda q: select_action(q, epsilon, self.explore_rng),
                self.training_seed(episode), tc.gamma, episode_id=episode,
            )
            self.recent.push_evicting(result.status)
            try:
                self.learn_from(result)
            except DivergenceError:
                self.checkpoint("diverged.npz", episode=episode, updates=self.updates)
                logger.warning("training diverged at episode %d after %d updates", episode, self.updates)
                raise
            logger.debug("episode %d %s in %d steps, return %.3f", episode, result.status.name,
                         result.steps, result.discounted_return)
            if episode % tc.eval_interval == 0 or episode == tc.episodes:
                self.evaluation_point(episode, epsilon)
        self.checkpoint("final.npz", episode=tc.episodes, updates=self.updates)
        return TrainingResult(self.params, tuple(self.log), self.updates, self._last_report)
