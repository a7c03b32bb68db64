"""
Simulation of one four-way crossing.

The ego drives along the main road; one to four scripted vehicles approach on the
crossing road. All positions are signed distances to the common crossing point.
"""
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from config import ControllerGains, EpisodeConfig
from constants import (
    CROSSING_LANES, DRIVER_INTENTIONS, EGO_LANE, MAX_OTHER_VEHICLES,
    EpisodeStatus, Intention,
)
from driver import behavior_accel, clamp
from vehicle import VehicleState

class SimulationStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepOutcome:
    status: EpisodeStatus
    elapsed: float
    # Ego first, then the crossing vehicles in spawn (slot) order.
    states: tuple[VehicleState, ...]
    step_index: int = 0

    @property
    def ego(self) -> VehicleState:
        return self.states[0]

    @property
    def others(self) -> tuple[VehicleState, ...]:
        return self.states[1:]


def detect_collision(states: Sequence[VehicleState], config: EpisodeConfig) -> bool:
    """
    True iff the ego and a crossing vehicle are both strictly inside the collision
    zone, or two vehicles sharing a lane overlap. Vehicles that have left the
    scene are ignored.
    """
    halfwidth = config.collision_halfwidth
    active = [s for s in states if s.position <= config.exit_threshold]
    ego = next((s for s in active if s.is_ego), None)
    if ego is not None and abs(ego.position) < halfwidth:
        for other in active:
            if other.lane_id != ego.lane_id and abs(other.position) < halfwidth:
                return True
    for i, first in enumerate(active):
        for second in active[i + 1:]:
            if first.lane_id == second.lane_id and abs(first.position - second.position) < config.vehicle_length:
                return True
    return False


def is_visible(vehicle: VehicleState, config: EpisodeConfig) -> bool:
    """In sight range and not yet past the exit threshold."""
    return -config.sight_range <= vehicle.position <= config.exit_threshold


def has_crossed(vehicle: VehicleState, config: EpisodeConfig) -> bool:
    return vehicle.position > config.collision_halfwidth


class Intersection:
    """
    Single-writer simulator: `reset` then `step` until a terminal status.

    Unless stated otherwise, all methods are O(n) in the number of vehicles
    (O(n^2) for collision checks, n <= 5).
    """

    def __init__(self, config: EpisodeConfig | None = None, gains: ControllerGains | None = None) -> None:
        self.config = config if config is not None else EpisodeConfig()
        self.gains = gains if gains is not None else ControllerGains()
        self.outcome: StepOutcome | None = None

    @property
    def max_steps(self) -> int:
        """Upper bound on the steps of any episode."""
        return math.ceil(self.config.timeout / self.config.dt) + 1

    def reset(self, config: EpisodeConfig | None = None) -> StepOutcome:
        """
        Spawn a new episode. Same config (seed included) gives a bit-identical start.

        :raises ConfigError: when the config is invalid.
        """
        if config is not None:
            self.config = config
        config = self.config
        config.validate()
        rng = np.random.default_rng(config.seed)

        if config.intentions is not None:
            intentions = [Intention.from_name(name) for name in config.intentions]
            n_others = len(intentions)
        else:
            n_others = config.n_other_vehicles
            if n_others is None:
                n_others = int(rng.integers(1, MAX_OTHER_VEHICLES + 1))
            intentions = [DRIVER_INTENTIONS[int(rng.integers(0, len(DRIVER_INTENTIONS)))] for _ in range(n_others)]

        ego = VehicleState(
            vehicle_id=0,
            position=float(rng.uniform(*config.ego_spawn_position)),
            velocity=float(rng.uniform(*config.ego_spawn_velocity)),
            acceleration=0.0,
            intersection_start=config.ego_intersection_start,
            intention=Intention.EGO,
            lane_id=EGO_LANE,
        )
        lanes = [CROSSING_LANES[int(rng.integers(0, len(CROSSING_LANES)))] for _ in range(n_others)]
        positions = self._spawn_positions(rng, lanes)
        others = tuple(
            VehicleState(
                vehicle_id=k + 1,
                position=positions[k],
                velocity=float(rng.uniform(*config.other_spawn_velocity)),
                acceleration=0.0,
                intersection_start=config.other_intersection_start,
                intention=intentions[k],
                lane_id=lanes[k],
            )
            for k in range(n_others)
        )
        self.outcome = StepOutcome(EpisodeStatus.RUNNING, 0.0, (ego,) + others, 0)
        return self.outcome

    def _spawn_positions(self, rng: np.random.Generator, lanes: list[str]) -> list[float]:
        """
        Positions in the spawn window with every pair sharing a lane min_lane_gap apart.
        Per lane, n draws from the window shrunk by (n - 1) gaps are sorted and spread
        by one gap each, then dealt to that lane's vehicles in random order.
        """
        low, high = self.config.other_spawn_position
        gap = self.config.min_lane_gap
        positions = [0.0] * len(lanes)
        for lane in sorted(set(lanes)):
            members = [k for k, name in enumerate(lanes) if name == lane]
            n = len(members)
            draws = np.sort(rng.uniform(low, high - (n - 1) * gap, size=n))
            for k, slot in enumerate(rng.permutation(n)):
                positions[members[int(slot)]] = float(draws[k] + k * gap)
        return positions

    def step(self, ego_accel_request: float) -> StepOutcome:
        """
        Advance every vehicle by one dt. Crossing drivers decide on the pre-step world,
        then everyone integrates; termination is checked collision, success, timeout.

        :raises SimulationStateError: before reset or after a terminal status.
        :raises ValueError: for a non-finite request.
        """
        if self.outcome is None:
            raise SimulationStateError("step called before reset")
        if self.outcome.status.is_terminal:
            raise SimulationStateError(f"episode already ended with {self.outcome.status.name}")
        if not math.isfinite(ego_accel_request):
            raise ValueError(f"acceleration request must be finite, got {ego_accel_request}")
        config = self.config
        world = self.outcome.states

        accels = [clamp(ego_accel_request, config.a_max)]
        accels += [behavior_accel(v, world, self.gains, config) for v in world[1:]]
        states = tuple(v.advanced(a, config.dt) for v, a in zip(world, accels))

        step_index = self.outcome.step_index + 1
        elapsed = step_index * config.dt
        status = EpisodeStatus.RUNNING
        if detect_collision(states, config):
            status = EpisodeStatus.COLLISION
        elif states[0].position > config.exit_threshold:
            status = EpisodeStatus.SUCCESS
        elif elapsed >= config.timeout:
            status = EpisodeStatus.TIMEOUT
        self.outcome = StepOutcome(status, elapsed, states, step_index)
        return self.outcome

    def visibility(self) -> list[bool]:
        """One flag per slot; empty slots are not visible."""
        flags = [False] * MAX_OTHER_VEHICLES
        for k, other in enumerate(self.outcome.others):
            flags[k] = is_visible(other, self.config)
        return flags

    def follow_target_valid(self) -> list[bool]:
        """A slot can be followed when its vehicle is visible and hasn't crossed."""
        flags = [False] * MAX_OTHER_VEHICLES
        for k, other in enumerate(self.outcome.others):
            flags[k] = is_visible(other, self.config) and not has_crossed(other, self.config)
        return flags

    def place(self, states: Sequence[VehicleState], elapsed: float = 0.0) -> StepOutcome:
        """Install a hand-built scene (ego first) instead of a random spawn."""
        if not states or not states[0].is_ego:
            raise ValueError("the first state must be the ego")
        step_index = int(round(elapsed / self.config.dt))
        self.outcome = StepOutcome(EpisodeStatus.RUNNING, elapsed, tuple(states), step_index)
        return self.outcome


TRACE_VEHICLE_FIELDS = ("id", "lane", "intention", "p", "v", "a")


def trace_header(extra: Sequence[str] = ()) -> list[str]:
    """Header of the episode trace; room for the ego and every slot."""
    header = ["step_index", "elapsed_s", "status", *extra]
    for k in range(MAX_OTHER_VEHICLES + 1):
        header += [f"veh{k}_{name}" for name in TRACE_VEHICLE_FIELDS]
    return header


def trace_row(outcome: StepOutcome, extra: Sequence[object] = ()) -> list[object]:
    row: list[object] = [outcome.step_index, outcome.elapsed, outcome.status.name, *extra]
    for k in range(MAX_OTHER_VEHICLES + 1):
        if k < len(outcome.states):
            s = outcome.states[k]
            row += [s.vehicle_id, s.lane_id, s.intention.name, s.position, s.velocity, s.acceleration]
        else:
            row += [""] * len(TRACE_VEHICLE_FIELDS)
    return row
