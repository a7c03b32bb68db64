"""
Run configuration.

Every tunable of the simulator, controllers, reward, network and trainer lives in one
of the dataclasses below. A run is described by a single YAML document whose sections
mirror these classes; anything not given falls back to the dataclass default.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from constants import MAX_OTHER_VEHICLES, DRIVER_INTENTIONS, Intention

class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeConfig:
    """Simulation settings for one episode. Distances in m, speeds in m/s, times in s."""

    seed: int = 0
    # None draws the count uniformly from 1..MAX_OTHER_VEHICLES every episode.
    n_other_vehicles: int | None = None
    dt: float = 0.25
    timeout: float = 30.0
    v_max: float = 15.0
    a_max: float = 5.0
    sight_range: float = 100.0
    collision_halfwidth: float = 2.5
    vehicle_length: float = 4.0
    ego_intersection_start: float = -6.0
    other_intersection_start: float = -6.0
    exit_threshold: float = 6.0
    ego_spawn_position: tuple[float, float] = (-60.0, -30.0)
    ego_spawn_velocity: tuple[float, float] = (5.0, 15.0)
    other_spawn_position: tuple[float, float] = (-100.0, -30.0)
    other_spawn_velocity: tuple[float, float] = (5.0, 15.0)
    min_lane_gap: float = 20.0
    cautious_factor: float = 0.5
    follow_standoff: float = 10.0
    # Optional scripted intentions, one per crossing vehicle in spawn order.
    intentions: tuple[str, ...] | None = None

    def validate(self) -> None:
        """
        :raises ConfigError: naming the first offending key.
        """
        if not self.dt > 0:
            raise ConfigError(f"episode.dt must be positive, got {self.dt}")
        if not self.timeout > self.dt:
            raise ConfigError(f"episode.timeout must exceed dt, got {self.timeout}")
        if self.n_other_vehicles is not None and not 1 <= self.n_other_vehicles <= MAX_OTHER_VEHICLES:
            raise ConfigError(
                f"episode.n_other_vehicles must be in [1, {MAX_OTHER_VEHICLES}], got {self.n_other_vehicles}"
            )
        for name in ("v_max", "a_max", "sight_range", "collision_halfwidth", "vehicle_length"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"episode.{name} must be positive")
        for name in ("ego_intersection_start", "other_intersection_start"):
            if not getattr(self, name) < 0:
                raise ConfigError(f"episode.{name} must be negative (before the crossing point)")
        for name in ("ego_spawn_position", "ego_spawn_velocity", "other_spawn_position", "other_spawn_velocity"):
            low, high = getattr(self, name)
            if low > high:
                raise ConfigError(f"episode.{name} has low > high")
        if self.ego_spawn_position[1] >= self.ego_intersection_start:
            raise ConfigError("episode.ego_spawn_position must end before the ego's intersection start")
        if self.other_spawn_position[0] < -self.sight_range:
            raise ConfigError("episode.other_spawn_position must lie within sight range")
        if self.min_lane_gap < 0:
            raise ConfigError("episode.min_lane_gap must be non-negative")
        low, high = self.other_spawn_position
        if high - low < (MAX_OTHER_VEHICLES - 1) * self.min_lane_gap:
            raise ConfigError(
                f"episode.other_spawn_position is too narrow for {MAX_OTHER_VEHICLES} vehicles "
                f"{self.min_lane_gap} m apart in one lane"
            )
        if self.ego_spawn_velocity[0] < 0 or self.other_spawn_velocity[0] < 0:
            raise ConfigError("episode spawn velocities must be non-negative")
        if not 0 < self.cautious_factor < 1:
            raise ConfigError("episode.cautious_factor must lie in (0, 1)")
        if self.intentions is not None:
            for name in self.intentions:
                try:
                    intention = Intention.from_name(name)
                except KeyError:
                    raise ConfigError(f"episode.intentions has unknown intention '{name}'")
                if intention not in DRIVER_INTENTIONS:
                    raise ConfigError("episode.intentions may not contain the ego intention")
            if self.n_other_vehicles is not None and len(self.intentions) != self.n_other_vehicles:
                raise ConfigError("episode.intentions length must equal n_other_vehicles")
            if not 1 <= len(self.intentions) <= MAX_OTHER_VEHICLES:
                raise ConfigError(f"episode.intentions must name 1..{MAX_OTHER_VEHICLES} vehicles")


@dataclass(frozen=True)
class ControllerGains:
    K: float = 0.8
    c1: float = 0.6
    c2: float = 2.0
    mu: float = 4.0
    # Boundary layer of the saturated switching term.
    phi: float = 1.0
    standoff: float = 8.0

    def validate(self) -> None:
        if not self.K > 0:
            raise ConfigError("controller.K must be positive")
        if not self.c2 > 0:
            raise ConfigError("controller.c2 must be positive")
        if not self.mu > 0:
            raise ConfigError("controller.mu must be positive")
        if not self.phi > 0:
            raise ConfigError("controller.phi must be positive")
        if self.standoff < 0:
            raise ConfigError("controller.standoff must be non-negative")


@dataclass(frozen=True)
class RewardConfig:
    collision: float = -2.0
    timeout: float = -0.1
    invalid_action: float = -1.0
    # None means the largest one-step jerk, 2 * a_max / dt.
    jerk_max: float | None = None

    def validate(self) -> None:
        if self.jerk_max is not None and not self.jerk_max > 0:
            raise ConfigError("reward.jerk_max must be positive")


@dataclass(frozen=True)
class NetworkConfig:
    vehicle_hidden: int = 32
    vehicle_out: int = 16
    ego_hidden: int = 16
    combine: int = 64
    lstm: int = 64
    keep_prob: float = 0.8
    learning_rate: float = 5e-4
    rms_decay: float = 0.95
    rms_epsilon: float = 1e-6
    grad_clip: float = 1.0

    def validate(self) -> None:
        for name in ("vehicle_hidden", "vehicle_out", "ego_hidden", "combine", "lstm"):
            if getattr(self, name) < 1:
                raise ConfigError(f"network.{name} must be at least 1")
        if not 0 < self.keep_prob <= 1:
            raise ConfigError("network.keep_prob must lie in (0, 1]")
        if not self.learning_rate > 0:
            raise ConfigError("network.learning_rate must be positive")
        if not 0 <= self.rms_decay < 1:
            raise ConfigError("network.rms_decay must lie in [0, 1)")
        if not self.grad_clip > 0:
            raise ConfigError("network.grad_clip must be positive")


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.4
    episodes: int = 30000
    buffer_capacity: int = 50000
    batch_size: int = 32
    sequence_length: int = 4
    train_steps: int = 1
    updates_per_episode: int = 8
    # 0 disables the target snapshot (targets come from the online parameters).
    target_sync_interval: int = 500
    eval_interval: int = 300
    eval_episodes: int = 300
    loss_window: int = 100
    use_replay: bool = True
    use_dropout: bool = True
    use_lstm: bool = True
    share_weights: bool = True

    def validate(self) -> None:
        if not 0 < self.gamma < 1:
            raise ConfigError("trainer.gamma must lie in (0, 1)")
        for name in ("epsilon_start", "epsilon_end", "epsilon_decay_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"trainer.{name} must lie in [0, 1]")
        for name in ("episodes", "buffer_capacity", "batch_size", "sequence_length",
                     "train_steps", "eval_interval", "eval_episodes", "loss_window"):
            if getattr(self, name) < 1:
                raise ConfigError(f"trainer.{name} must be at least 1")
        if self.train_steps > self.sequence_length:
            raise ConfigError("trainer.train_steps cannot exceed sequence_length")
        if self.updates_per_episode < 0 or self.target_sync_interval < 0:
            raise ConfigError("trainer.updates_per_episode and target_sync_interval must be non-negative")

    @property
    def effective_sequence_length(self) -> int:
        """The DQN ablation trains on single transitions."""
        return self.sequence_length if self.use_lstm else 1

    @property
    def effective_train_steps(self) -> int:
        return self.train_steps if self.use_lstm else 1


@dataclass(frozen=True)
class RunConfig:
    name: str = "drqn"
    seed: int = 0
    out_dir: str = "runs"
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    controller: ControllerGains = field(default_factory=ControllerGains)
    reward: RewardConfig = field(default_factory=RewardConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    trainer: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        for section in SECTIONS:
            getattr(self, section).validate()

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        return config_hash(self)


SECTIONS = {
    "episode": EpisodeConfig,
    "controller": ControllerGains,
    "reward": RewardConfig,
    "network": NetworkConfig,
    "trainer": TrainConfig,
}
TOP_LEVEL = ("name", "seed", "out_dir")


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _coerce(key: str, value: Any, default: Any) -> Any:
    """
    Coerce a YAML value to the type of the field's default.

    :raises ConfigError: when the value can't stand in for the default.
    """
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} expects true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} expects an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a dot, like 1e-4, as strings.
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"{key} expects a number, got {value!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} expects a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(default):
            raise ConfigError(f"{key} expects a list of {len(default)} numbers, got {value!r}")
        return tuple(_coerce(key, v, d) for v, d in zip(value, default))
    # Optional fields (default None) keep whatever YAML produced, lists become tuples.
    if value is None:
        return None
    if isinstance(value, list):
        return tuple(value)
    return value


def _build_section(section: str, klass: type, values: Any) -> Any:
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f"section '{section}' must be a mapping")
    defaults = klass()
    known = {f.name for f in dataclasses.fields(klass)}
    kwargs = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key '{section}.{key}'")
        kwargs[key] = _coerce(f"{section}.{key}", value, getattr(defaults, key))
    if section == "episode" and kwargs.get("n_other_vehicles") is not None:
        kwargs["n_other_vehicles"] = _coerce("episode.n_other_vehicles", kwargs["n_other_vehicles"], 0)
    if section == "reward" and kwargs.get("jerk_max") is not None:
        kwargs["jerk_max"] = _coerce("reward.jerk_max", kwargs["jerk_max"], 0.0)
    return klass(**kwargs)


def build_run_config(document: dict[str, Any] | None) -> RunConfig:
    """
    Resolve a parsed YAML document against the defaults.

    :raises ConfigError: for unknown keys, wrong types or invalid values.
    """
    document = dict(document or {})
    unknown = set(document) - set(SECTIONS) - set(TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown config key '{sorted(unknown)[0]}'")
    defaults = RunConfig()
    top = {key: _coerce(key, document[key], getattr(defaults, key)) for key in TOP_LEVEL if key in document}
    sections = {name: _build_section(name, klass, document.get(name)) for name, klass in SECTIONS.items()}
    config = RunConfig(**top, **sections)
    config.validate()
    return config


def apply_overrides(document: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """
    Apply `section.key=value` overrides onto a raw document.
    Values are parsed as YAML scalars, so `false`, `3` and `1e-4` get their natural types.

    :raises ConfigError: for malformed overrides.
    """
    document = {k: (dict(v) if isinstance(v, dict) else v) for k, v in (document or {}).items()}
    for override in overrides:
        if "=" not in override:
            raise ConfigError(f"override '{override}' must look like key=value")
        key, raw = override.split("=", 1)
        key = key.strip()
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigError(f"override '{key}' has an unparsable value: {e}")
        parts = key.split(".")
        if len(parts) == 1:
            document[parts[0]] = value
        elif len(parts) == 2:
            section = document.setdefault(parts[0], {})
            if not isinstance(section, dict):
                raise ConfigError(f"override '{key}' targets a non-section")
            section[parts[1]] = value
        else:
            raise ConfigError(f"override key '{key}' is nested too deeply")
    return document


def load_run_config(path: str | Path | None, overrides: list[str] | None = None) -> RunConfig:
    """
    Read, override and resolve a config file. `path=None` starts from the defaults.

    :raises ConfigError: when the file is missing or unreadable, or anything in it is invalid.
    """
    document: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            document = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {path} is not valid YAML: {e}")
        if not isinstance(document, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
    return build_run_config(apply_overrides(document, overrides or []))


def dump_run_config(config: RunConfig) -> str:
    """YAML text of a resolved config; tuples are written as lists."""
    def plain(value: Any) -> Any:
        if isinstance(value, dict):
            return {k: plain(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [plain(v) for v in value]
        return value
    return yaml.safe_dump(plain(config.to_dict()), sort_keys=False, default_flow_style=False)
