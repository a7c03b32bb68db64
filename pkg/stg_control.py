"""
Short-Term Goal actuation.

Each high-level action the agent picks is turned into an acceleration request by a
P-controller on speed, a sliding-mode controller on the gap to a target, or the
minimum of both.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from config import ControllerGains
from constants import MAX_OTHER_VEHICLES, NUM_ACTIONS, StgKind
from vehicle import VehicleState

class InvalidTargetError(LookupError):
    pass


@dataclass(frozen=True)
class StgAction:
    """
    One of the six short-term goals.
    `target` is the 1-based slot of the vehicle to follow and only set for KEEP_DISTANCE_TO.
    """

    kind: StgKind
    target: int | None = None

    @classmethod
    def from_index(cls, index: int) -> StgAction:
        """Index 0 is keep set speed, 1 stop at intersection, 2..5 follow slots 1..4."""
        if not 0 <= index < NUM_ACTIONS:
            raise IndexError(f"action index {index} out of range")
        if index == 0:
            return cls(StgKind.KEEP_SET_SPEED)
        if index == 1:
            return cls(StgKind.STOP_AT_INTERSECTION)
        return cls(StgKind.KEEP_DISTANCE_TO, index - 1)

    @property
    def index(self) -> int:
        if self.kind == StgKind.KEEP_SET_SPEED:
            return 0
        if self.kind == StgKind.STOP_AT_INTERSECTION:
            return 1
        return self.target + 1

    @property
    def label(self) -> str:
        if self.kind == StgKind.KEEP_DISTANCE_TO:
            return f"keep_distance_{self.target}"
        return self.kind.name.lower()


ALL_ACTIONS = tuple(StgAction.from_index(k) for k in range(NUM_ACTIONS))


def p_control(v_ego: float, v_max: float, K: float) -> float:
    """Speed tracking K*(v_max - v). Not clamped, the simulator does that."""
    return K * (v_max - v_ego)


def sgn_smooth(sigma: float, phi: float = 1.0) -> float:
    """Saturated sign sat(sigma/phi): linear inside the boundary layer, +-1 outside."""
    return float(np.clip(sigma / phi, -1.0, 1.0))


def sliding_mode_accel(x1: float, x2: float, gains: ControllerGains) -> float:
    """
    Sliding-mode request on the surface sigma = c1*x1 + c2*x2,
    with x1 the gap to the target (after standoff) and x2 = v_target - v_ego.

    The switching term drives sigma to zero at rate mu whenever the request isn't clamped.
    """
    sigma = gains.c1 * x1 + gains.c2 * x2
    return (gains.c1 * x2 + gains.mu * sgn_smooth(sigma, gains.phi)) / gains.c2


def regulate_to(
    position: float, velocity: float,
    target_position: float, target_velocity: float,
    standoff: float, set_speed: float, gains: ControllerGains,
) -> float:
    """
    min(sliding mode towards the target, P-control towards set speed).
    Shared by the ego's actions and by the scripted drivers.
    """
    x1 = target_position - position - standoff
    x2 = target_velocity - velocity
    return min(sliding_mode_accel(x1, x2, gains), p_control(velocity, set_speed, gains.K))


def stg_accel(
    action: StgAction, ego: VehicleState, world: Sequence[VehicleState],
    gains: ControllerGains, v_max: float,
) -> float:
    """
    Acceleration request for the ego under one short-term goal.
    `world` holds the crossing vehicles in slot order.

    :raises InvalidTargetError: when KEEP_DISTANCE_TO names a slot with no vehicle.
    """
    if action.kind == StgKind.KEEP_SET_SPEED:
        return p_control(ego.velocity, v_max, gains.K)
    if action.kind == StgKind.STOP_AT_INTERSECTION:
        return regulate_to(ego.position, ego.velocity, ego.intersection_start, 0.0, 0.0, v_max, gains)
    if action.target is None or not 1 <= action.target <= len(world):
        raise InvalidTargetError(f"no vehicle in slot {action.target}")
    target = world[action.target - 1]
    return regulate_to(ego.position, ego.velocity, target.position, target.velocity, gains.standoff, v_max, gains)


def predict_next_accel(
    ego: VehicleState, world: Sequence[VehicleState], valid: Sequence[bool],
    gains: ControllerGains, v_max: float, a_max: float,
) -> np.ndarray:
    """
    Clamped request of every action; follow actions whose target is invalid
    report the keep-set-speed value instead.

    `valid` has one flag per slot (MAX_OTHER_VEHICLES of them).
    """
    keep = float(np.clip(p_control(ego.velocity, v_max, gains.K), -a_max, a_max))
    out = np.full(NUM_ACTIONS, keep)
    for action in ALL_ACTIONS[1:]:
        if action.kind == StgKind.KEEP_DISTANCE_TO:
            slot = action.target
            if slot > len(world) or slot > MAX_OTHER_VEHICLES or not valid[slot - 1]:
                continue
        out[action.index] = np.clip(stg_accel(action, ego, world, gains, v_max), -a_max, a_max)
    return out
