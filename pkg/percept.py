from __future__ import annotations
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from config import EpisodeConfig
from constants import MAX_OTHER_VEHICLES, NUM_ACTIONS, VEHICLE_FEATURES
from vehicle import VehicleState

SENTINEL = -1.0

@dataclass(frozen=True)
class Observation:
    """
    The network input: one 8-feature block per vehicle slot and the six predicted
    ego accelerations, all scaled into [-1, 1].
    """

    xi: np.ndarray            # (MAX_OTHER_VEHICLES, VEHICLE_FEATURES)
    xi5: np.ndarray           # (NUM_ACTIONS,)
    visible_mask: np.ndarray  # (MAX_OTHER_VEHICLES,) bool

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xi.ravel(), self.xi5])


def _scaled(value: float, scale: float) -> float:
    return float(np.clip(value / scale, -1.0, 1.0))


def build_observation(
    states: Sequence[VehicleState], predicted_accels: np.ndarray,
    visible: Sequence[bool], config: EpisodeConfig,
) -> Observation:
    """
    Assemble the scaled observation. `states` is ego first then the crossing vehicles
    in spawn order, so vehicle k always lands in slot k. Slots that are empty or not
    visible hold the all -1 sentinel.
    """
    if len(predicted_accels) != NUM_ACTIONS:
        raise ValueError(f"expected {NUM_ACTIONS} predicted accelerations, got {len(predicted_accels)}")
    ego, others = states[0], states[1:]
    p_max, v_max, a_max = config.sight_range, config.v_max, config.a_max
    ego_block = [
        _scaled(ego.position, p_max),
        _scaled(ego.velocity, v_max),
        _scaled(ego.acceleration, a_max),
        _scaled(ego.intersection_start, p_max),
    ]

    xi = np.full((MAX_OTHER_VEHICLES, VEHICLE_FEATURES), SENTINEL)
    mask = np.zeros(MAX_OTHER_VEHICLES, dtype=bool)
    for k, other in enumerate(others[:MAX_OTHER_VEHICLES]):
        if not visible[k]:
            continue
        mask[k] = True
        xi[k] = ego_block + [
            _scaled(other.position, p_max),
            _scaled(other.velocity, v_max),
            _scaled(other.acceleration, a_max),
            _scaled(other.intersection_start, p_max),
        ]
    xi5 = np.clip(np.asarray(predicted_accels, dtype=float) / a_max, -1.0, 1.0)
    return Observation(xi, xi5, mask)
