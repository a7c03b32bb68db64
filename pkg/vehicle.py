from __future__ import annotations
from dataclasses import dataclass, replace

from constants import Intention

@dataclass(frozen=True)
class VehicleState:
    """
    Kinematic state of one vehicle along its own path.

    Positions are signed distances to the crossing point: negative before it,
    positive after. The intention is hidden from the agent.
    """

    vehicle_id: int
    position: float
    velocity: float
    acceleration: float
    intersection_start: float
    intention: Intention
    lane_id: str

    def __post_init__(self) -> None:
        if self.velocity < 0:
            raise ValueError(f"vehicle {self.vehicle_id} has negative velocity {self.velocity}")
        if not self.intersection_start < 0:
            raise ValueError(f"vehicle {self.vehicle_id} has its intersection start after the crossing point")

    @property
    def is_ego(self) -> bool:
        return self.intention == Intention.EGO

    def advanced(self, acceleration: float, dt: float) -> VehicleState:
        """
        Returns the state one step later under semi-implicit Euler:
        v += a*dt, then p += v*dt, with v floored at 0.

        When the floor binds the stored acceleration is the one actually applied, -v/dt.
        """
        velocity = self.velocity + acceleration * dt
        if velocity < 0.0:
            acceleration = -self.velocity / dt
            velocity = 0.0
        return replace(
            self,
            position=self.position + velocity * dt,
            velocity=velocity,
            acceleration=acceleration,
        )
