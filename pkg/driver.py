from __future__ import annotations
from abc import ABC, abstractmethod
from typing import Sequence

from config import ControllerGains, EpisodeConfig
from constants import Intention
from stg_control import p_control, regulate_to
from vehicle import VehicleState

class DriverBehaviour(ABC):
    """
    A scripted crossing driver. Every driver keeps its own law and, on top of it,
    keeps `follow_standoff` metres to the vehicle in front of it in its lane.
    """

    def __init__(self, gains: ControllerGains, config: EpisodeConfig) -> None:
        self.gains = gains
        self.config = config

    @abstractmethod
    def desired_accel(self, vehicle: VehicleState, ego: VehicleState) -> float:
        raise NotImplementedError()

    def accel(self, vehicle: VehicleState, world: Sequence[VehicleState]) -> float:
        ego = ego_of(world)
        accel = self.desired_accel(vehicle, ego)
        leader = lane_leader(vehicle, world)
        if leader is not None:
            accel = min(accel, regulate_to(
                vehicle.position, vehicle.velocity,
                leader.position, leader.velocity,
                self.config.follow_standoff, self.config.v_max, self.gains,
            ))
        return clamp(accel, self.config.a_max)

class TakeWayDriver(DriverBehaviour):
    def desired_accel(self, vehicle: VehicleState, ego: VehicleState) -> float:
        # Never yields to crossing traffic.
        return p_control(vehicle.velocity, self.config.v_max, self.gains.K)

class GiveWayDriver(DriverBehaviour):
    def desired_accel(self, vehicle: VehicleState, ego: VehicleState) -> float:
        """
        Stop at the start of the intersection until the ego has left the collision
        zone, then carry on at set speed.
        """
        if ego.position >= self.config.collision_halfwidth:
            return p_control(vehicle.velocity, self.config.v_max, self.gains.K)
        return regulate_to(
            vehicle.position, vehicle.velocity,
            vehicle.intersection_start, 0.0, 0.0,
            self.config.v_max, self.gains,
        )

class CautiousDriver(DriverBehaviour):
    def desired_accel(self, vehicle: VehicleState, ego: VehicleState) -> float:
        """
        Slow to a fraction of set speed while the ego is in sight and hasn't reached
        the crossing point. The reduced speed is positive, so it never stops.
        """
        ego_approaching = -self.config.sight_range <= ego.position < 0.0
        set_speed = self.config.v_max
        if ego_approaching:
            set_speed = self.config.cautious_factor * self.config.v_max
        return p_control(vehicle.velocity, set_speed, self.gains.K)


BEHAVIOURS = {
    Intention.TAKE_WAY: TakeWayDriver,
    Intention.GIVE_WAY: GiveWayDriver,
    Intention.CAUTIOUS: CautiousDriver,
}


def clamp(value: float, limit: float) -> float:
    return max(-limit, min(limit, value))


def ego_of(world: Sequence[VehicleState]) -> VehicleState:
    for state in world:
        if state.is_ego:
            return state
    raise ValueError("world holds no ego vehicle")


def lane_leader(vehicle: VehicleState, world: Sequence[VehicleState]) -> VehicleState | None:
    """Nearest vehicle ahead in the same lane, if any."""
    leader = None
    for other in world:
        if other.vehicle_id == vehicle.vehicle_id or other.lane_id != vehicle.lane_id:
            continue
        if other.position > vehicle.position and (leader is None or other.position < leader.position):
            leader = other
    return leader


def behavior_accel(
    vehicle: VehicleState, world: Sequence[VehicleState],
    gains: ControllerGains, config: EpisodeConfig,
) -> float:
    """
    Acceleration a scripted driver applies this step, clamped to +-a_max.

    :raises ValueError: for the ego, which has no scripted behaviour.
    """
    if vehicle.intention == Intention.EGO:
        raise ValueError("the ego vehicle is driven by the agent")
    return BEHAVIOURS[vehicle.intention](gains, config).accel(vehicle, world)
