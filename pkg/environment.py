"""
The agent's view of the crossing: observations in, short-term goals out, rewards back.
Shared by training, evaluation and rollouts.
"""
from __future__ import annotations
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from config import ControllerGains, EpisodeConfig, RewardConfig, RunConfig
from constants import EpisodeStatus, StgKind
from intersection import Intersection, StepOutcome
from percept import Observation, build_observation
from qnet import NetworkParams, RecurrentState, forward
from replay_buffer import Experience
from reward import RewardContext, compute_reward, default_jerk_max, ego_jerk
from stg_control import ALL_ACTIONS, StgAction, predict_next_accel, stg_accel

@dataclass(frozen=True)
class EnvStep:
    next_obs: Observation
    reward: float
    outcome: StepOutcome
    action_valid: bool
    jerk: float
    # Request of the goal actually actuated (keep set speed for invalid follows), before clamping.
    requested_accel: float

    @property
    def terminal(self) -> bool:
        return self.outcome.status.is_terminal


class IntersectionEnv:
    """
    Wraps one Intersection. Driver intentions stay inside the simulator;
    the agent only ever sees Observations.
    """

    def __init__(self, episode: EpisodeConfig | None = None, gains: ControllerGains | None = None,
                 reward: RewardConfig | None = None) -> None:
        self.episode_config = episode if episode is not None else EpisodeConfig()
        self.gains = gains if gains is not None else ControllerGains()
        self.reward_config = reward if reward is not None else RewardConfig()
        self.sim = Intersection(self.episode_config, self.gains)
        self.previous_accel = 0.0
        self.first_step = True

    @classmethod
    def from_run_config(cls, config: RunConfig) -> IntersectionEnv:
        return cls(config.episode, config.controller, config.reward)

    @property
    def jerk_max(self) -> float:
        if self.reward_config.jerk_max is not None:
            return self.reward_config.jerk_max
        return default_jerk_max(self.episode_config.a_max, self.episode_config.dt)

    @property
    def outcome(self) -> StepOutcome:
        return self.sim.outcome

    def reset(self, seed: int) -> Observation:
        self.sim.reset(replace(self.episode_config, seed=seed))
        self.previous_accel = self.sim.outcome.ego.acceleration
        self.first_step = True
        return self.observe()

    def place(self, states, elapsed: float = 0.0) -> Observation:
        """Start from a hand-built scene instead of a random spawn."""
        self.sim.place(states, elapsed)
        self.previous_accel = self.sim.outcome.ego.acceleration
        self.first_step = True
        return self.observe()

    def observe(self) -> Observation:
        outcome = self.sim.outcome
        config = self.episode_config
        predicted = predict_next_accel(
            outcome.ego, outcome.others, self.sim.follow_target_valid(),
            self.gains, config.v_max, config.a_max,
        )
        return build_observation(outcome.states, predicted, self.sim.visibility(), config)

    def action_valid(self, action: StgAction) -> bool:
        """Follow goals need a visible vehicle in their slot that hasn't crossed yet."""
        if action.kind != StgKind.KEEP_DISTANCE_TO:
            return True
        return self.sim.follow_target_valid()[action.target - 1]

    def step(self, action_index: int) -> EnvStep:
        """
        :raises IndexError: for an action index outside 0..5.
        :raises SimulationStateError: after the episode has ended.
        """
        action = StgAction.from_index(action_index)
        valid = self.action_valid(action)
        actuated = action if valid else ALL_ACTIONS[0]
        before = self.sim.outcome
        request = stg_accel(actuated, before.ego, before.others, self.gains, self.episode_config.v_max)
        outcome = self.sim.step(request)

        applied = outcome.ego.acceleration
        jerk = ego_jerk(self.previous_accel, applied, self.episode_config.dt, self.first_step)
        reward = compute_reward(RewardContext(
            status=outcome.status,
            elapsed=outcome.elapsed,
            dt=self.episode_config.dt,
            timeout=self.episode_config.timeout,
            jerk=jerk,
            jerk_max=self.jerk_max,
            action_valid=valid,
        ), self.reward_config)
        self.previous_accel = applied
        self.first_step = False
        return EnvStep(self.observe(), reward, outcome, valid, jerk, request)


@dataclass(frozen=True)
class EpisodeResult:
    episode_id: int
    seed: int
    status: EpisodeStatus
    steps: int
    total_reward: float
    discounted_return: float
    experiences: tuple[Experience, ...]


StepCallback = Callable[[int, int, np.ndarray, EnvStep], None]


def run_episode(env: IntersectionEnv, params: NetworkParams, choose: Callable[[np.ndarray], int],
                seed: int, gamma: float = 0.95, episode_id: int = 0,
                on_step: Optional[StepCallback] = None) -> EpisodeResult:
    """
    Play one episode. The recurrent state starts at zero and is carried step to step;
    `choose` maps the Q-values to an action index. No dropout is applied.
    """
    obs = env.reset(seed)
    rstate = RecurrentState.zeros(params.recurrent_width)
    experiences = []
    total = 0.0
    discounted = 0.0
    discount = 1.0
    t = 0
    while True:
        q, rstate = forward(params, obs, rstate)
        action = int(choose(q))
        step = env.step(action)
        experiences.append(Experience(obs, action, step.reward, step.next_obs, step.terminal, episode_id, t))
        total += step.reward
        discounted += discount * step.reward
        discount *= gamma
        if on_step is not None:
            on_step(t, action, q, step)
        obs = step.next_obs
        t += 1
        if step.terminal:
            return EpisodeResult(episode_id, seed, step.outcome.status, t, total, discounted, tuple(experiences))
