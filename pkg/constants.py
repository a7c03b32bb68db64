from enum import auto
from base_enum import BaseEnum

VERSION = "0.3.0"

# Slots available to crossing vehicles, and so the number of follow actions.
MAX_OTHER_VEHICLES = 4
NUM_ACTIONS = 2 + MAX_OTHER_VEHICLES
# Features per vehicle block: ego (p, v, a, delta) followed by the other vehicle's.
VEHICLE_FEATURES = 8

EGO_LANE = "main"
CROSSING_LANES = ("cross_left", "cross_right")

class Intention(BaseEnum):
    TAKE_WAY = auto()
    GIVE_WAY = auto()
    CAUTIOUS = auto()
    EGO = auto()

# Intentions a scripted crossing driver can be given.
DRIVER_INTENTIONS = (Intention.TAKE_WAY, Intention.GIVE_WAY, Intention.CAUTIOUS)

class EpisodeStatus(BaseEnum):
    RUNNING = auto()
    SUCCESS = auto()
    COLLISION = auto()
    TIMEOUT = auto()

    @property
    def is_terminal(self) -> bool:
        return self != EpisodeStatus.RUNNING

class StgKind(BaseEnum):
    KEEP_SET_SPEED = auto()
    STOP_AT_INTERSECTION = auto()
    KEEP_DISTANCE_TO = auto()
