from __future__ import annotations
from dataclasses import dataclass

from config import RewardConfig
from constants import EpisodeStatus

@dataclass(frozen=True)
class RewardContext:
    status: EpisodeStatus
    elapsed: float
    dt: float
    timeout: float
    jerk: float
    jerk_max: float
    action_valid: bool


def default_jerk_max(a_max: float, dt: float) -> float:
    """Largest jerk one step can produce: from -a_max to +a_max in dt."""
    return 2.0 * a_max / dt


def ego_jerk(previous_accel: float, accel: float, dt: float, first_step: bool) -> float:
    """Jerk of the applied ego acceleration. The first step of an episode has none."""
    if first_step:
        return 0.0
    return (accel - previous_accel) / dt


def compute_reward(ctx: RewardContext, weights: RewardConfig | None = None) -> float:
    """
    Per-step reward: an invalid-action penalty plus exactly one of the success bonus
    (1 - elapsed/timeout), collision, timeout, or the jerk penalty on ordinary steps.
    """
    weights = weights if weights is not None else RewardConfig()
    base = weights.invalid_action if not ctx.action_valid else 0.0
    if ctx.status == EpisodeStatus.SUCCESS:
        return base + (1.0 - ctx.elapsed / ctx.timeout)
    if ctx.status == EpisodeStatus.COLLISION:
        return base + weights.collision
    if ctx.status == EpisodeStatus.TIMEOUT:
        return base + weights.timeout
    return base - (ctx.jerk / ctx.jerk_max) ** 2 * (ctx.dt / ctx.timeout)
