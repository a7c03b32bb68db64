from __future__ import annotations
import dataclasses

import numpy as np

from config import NetworkConfig, RunConfig, TrainConfig
from constants import EGO_LANE, Intention
from percept import Observation
from qnet import NetworkParams, init_params, tensor_layout
from vehicle import VehicleState

SMALL_NETWORK = NetworkConfig(vehicle_hidden=5, vehicle_out=4, ego_hidden=3, combine=6, lstm=5)

# Overrides that shrink a run to a few seconds.
TINY_OVERRIDES = [
    "name=tiny",
    "seed=3",
    "network.vehicle_hidden=6",
    "network.vehicle_out=4",
    "network.ego_hidden=4",
    "network.combine=8",
    "network.lstm=6",
    "trainer.episodes=4",
    "trainer.buffer_capacity=1000",
    "trainer.batch_size=4",
    "trainer.updates_per_episode=2",
    "trainer.target_sync_interval=3",
    "trainer.eval_interval=2",
    "trainer.eval_episodes=2",
    "trainer.loss_window=10",
]


def tiny_config(**trainer_changes) -> RunConfig:
    trainer = TrainConfig(
        episodes=4, buffer_capacity=1000, batch_size=4, updates_per_episode=2,
        target_sync_interval=3, eval_interval=2, eval_episodes=2, loss_window=10,
    )
    trainer = dataclasses.replace(trainer, **trainer_changes)
    return RunConfig(
        name="tiny", seed=3,
        network=NetworkConfig(vehicle_hidden=6, vehicle_out=4, ego_hidden=4, combine=8, lstm=6),
        trainer=trainer,
    )


def ego(position: float, velocity: float, acceleration: float = 0.0) -> VehicleState:
    return VehicleState(0, position, velocity, acceleration, -6.0, Intention.EGO, EGO_LANE)


def other(vehicle_id: int, position: float, velocity: float, intention: Intention = Intention.TAKE_WAY,
          lane: str = "cross_left", acceleration: float = 0.0) -> VehicleState:
    return VehicleState(vehicle_id, position, velocity, acceleration, -6.0, intention, lane)


def random_observation(rng: np.random.Generator, hidden_slots: int = 1) -> Observation:
    xi = rng.uniform(-1.0, 1.0, size=(4, 8))
    mask = np.ones(4, dtype=bool)
    for slot in rng.choice(4, size=hidden_slots, replace=False):
        xi[slot] = -1.0
        mask[slot] = False
    return Observation(xi, rng.uniform(-1.0, 1.0, size=6), mask)


def random_params(rng: np.random.Generator, config: NetworkConfig = SMALL_NETWORK,
                  use_lstm: bool = True, share_weights: bool = True, scale: float = 0.5) -> NetworkParams:
    """Every tensor, biases included, drawn from N(0, scale^2)."""
    tensors = {name: rng.normal(0.0, scale, size=shape) for name, shape in tensor_layout(config, use_lstm, share_weights)}
    return NetworkParams(tensors, config, use_lstm, share_weights)


def initial_params(seed: int = 0, config: NetworkConfig = SMALL_NETWORK, **flags) -> NetworkParams:
    return init_params(config, np.random.default_rng(seed), **flags)
