"""
Everything that leaves the process: checkpoints, JSON reports, CSV logs and traces,
and the self-describing files of a run directory.

Checkpoint layout (a plain .npz archive, loaded with allow_pickle=False):

    <tensor name>  one float64 array per network tensor, in the order of
                   qnet.tensor_layout (row-major, (out, in) for matrices)
    __meta__       0-d unicode array holding a JSON document with
                   format, format_version, package_version, config_hash, config,
                   use_lstm, share_weights, tensors [[name, shape], ...],
                   digest (SHA-256 over every name, shape and tensor bytes) and extra
"""
from __future__ import annotations
import csv
import dataclasses
import hashlib
import json
import logging
import zipfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import serpy

from config import ConfigError, RunConfig, build_run_config, dump_run_config
from constants import VERSION
from qnet import NetworkParams, StructuralError, tensor_layout

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "intersection-drqn-checkpoint"
CHECKPOINT_FORMAT_VERSION = 1
META_KEY = "__meta__"

class CheckpointError(ValueError):
    pass


# https://stackoverflow.com/questions/51286748/make-the-python-json-encoder-support-pythons-new-dataclasses
class EnhancedJSONEncoder(json.JSONEncoder):
    def default(self, o):
        if dataclasses.is_dataclass(o):
            return dataclasses.asdict(o)
        if isinstance(o, Enum):
            return o.name
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, Path):
            return str(o)
        return super().default(o)

def serialize(obj: Any) -> str:
    return json.dumps(obj, cls=EnhancedJSONEncoder, sort_keys=True, indent=2)


class EvalReportSerializer(serpy.Serializer):
    n_episodes = serpy.IntField()
    successes = serpy.IntField()
    collisions = serpy.IntField()
    timeouts = serpy.IntField()
    success_rate = serpy.FloatField()
    collision_rate = serpy.FloatField()
    timeout_rate = serpy.FloatField()
    ctr = serpy.FloatField()
    avg_reward = serpy.FloatField()
    seed = serpy.IntField()


@dataclass(frozen=True)
class TrainingLogRow:
    episode: int
    success_rate: float
    collision_rate: float
    timeout_rate: float
    ctr: float
    avg_reward: float
    epsilon: float
    loss_moving_avg: float
    train_success_last100: float
    train_ctr_last100: float


class TrainingLogRowSerializer(serpy.Serializer):
    episode = serpy.IntField()
    success_rate = serpy.FloatField()
    collision_rate = serpy.FloatField()
    timeout_rate = serpy.FloatField()
    ctr = serpy.FloatField()
    avg_reward = serpy.FloatField()
    epsilon = serpy.FloatField()
    loss_moving_avg = serpy.FloatField()
    train_success_last100 = serpy.FloatField()
    train_ctr_last100 = serpy.FloatField()


TRAINING_LOG_COLUMNS = [f.name for f in dataclasses.fields(TrainingLogRow)]


def eval_report_dict(report, checkpoint_hash: str | None = None) -> dict[str, Any]:
    """JSON form of a standalone evaluation."""
    data = EvalReportSerializer(report).data
    return {
        "counts": {k: data[k] for k in ("n_episodes", "successes", "collisions", "timeouts")},
        "rates": {k: data[k] for k in ("success_rate", "collision_rate", "timeout_rate")},
        "ctr": data["ctr"],
        "avg_reward": data["avg_reward"],
        "seed": data["seed"],
        "checkpoint_hash": checkpoint_hash,
    }


class CsvLog:
    """
    A CSV file written row by row and flushed after every row,
    so a run that aborts keeps everything logged so far.
    """

    def __init__(self, path: str | Path, columns: Sequence[str]) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.columns = list(columns)
        with self.path.open("w", newline="", encoding="utf-8") as f:
            csv.writer(f, lineterminator="\n").writerow(self.columns)

    def append(self, row: dict[str, Any]) -> None:
        with self.path.open("a", newline="", encoding="utf-8") as f:
            csv.DictWriter(f, fieldnames=self.columns, lineterminator="\n").writerow(row)


def write_training_rows(log: CsvLog, rows: Iterable[TrainingLogRow], **extra: Any) -> None:
    for row in TrainingLogRowSerializer(list(rows), many=True).data:
        log.append({**extra, **row})


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_run_files(run_dir: str | Path, config: RunConfig, **extra: Any) -> Path:
    """Write the resolved config and a version stamp, enough to reproduce the run."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.yaml").write_text(dump_run_config(config), encoding="utf-8")
    info = {"version": VERSION, "name": config.name, "seed": config.seed, "config_hash": config.hash(), **extra}
    (run_dir / "run_info.json").write_text(serialize(info) + "\n", encoding="utf-8")
    return run_dir


def tensor_digest(params: NetworkParams) -> str:
    digest = hashlib.sha256()
    for name, value in params.tensors.items():
        digest.update(name.encode("utf-8"))
        digest.update(repr(value.shape).encode("utf-8"))
        digest.update(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class Checkpoint:
    params: NetworkParams
    config: RunConfig
    meta: dict[str, Any]

    @property
    def config_hash(self) -> str:
        return self.meta["config_hash"]

    @property
    def digest(self) -> str:
        return self.meta["digest"]


def save_checkpoint(path: str | Path, params: NetworkParams, config: RunConfig, **extra: Any) -> Path:
    """Write params with the config they were trained under. Round-trips bit-exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "package_version": VERSION,
        "config_hash": config.hash(),
        "config": config.to_dict(),
        "use_lstm": params.use_lstm,
        "share_weights": params.share_weights,
        "tensors": [[name, list(value.shape)] for name, value in params.tensors.items()],
        "digest": tensor_digest(params),
        "extra": extra,
    }
    arrays = {name: np.ascontiguousarray(value, dtype="<f8") for name, value in params.tensors.items()}
    arrays[META_KEY] = np.array(serialize(meta))
    with path.open("wb") as f:
        np.savez(f, **arrays)
    logger.info("wrote checkpoint %s", path)
    return path


def load_checkpoint(path: str | Path, expected_config_hash: str | None = None) -> Checkpoint:
    """
    :raises CheckpointError: when the file is missing, unreadable or corrupted, fails its
        integrity check, or was trained under a config other than `expected_config_hash`.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            if META_KEY not in archive.files:
                raise CheckpointError(f"checkpoint {path} has no metadata")
            meta = json.loads(str(archive[META_KEY]))
            tensors = {name: archive[name] for name in archive.files if name != META_KEY}
    except CheckpointError:
        raise
    except (OSError, ValueError, EOFError, KeyError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"checkpoint {path} is corrupted or unreadable: {e}")

    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a network checkpoint")
    if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"{path} has unsupported format version {meta.get('format_version')}")
    try:
        config = build_run_config(meta["config"])
    except ConfigError as e:
        raise CheckpointError(f"checkpoint {path} holds an invalid config: {e}")
    if config.hash() != meta["config_hash"]:
        raise CheckpointError(f"checkpoint {path} config does not match its stored hash")

    layout = tensor_layout(config.network, meta["use_lstm"], meta["share_weights"])
    if [[n, list(s)] for n, s in layout] != meta["tensors"]:
        raise CheckpointError(f"checkpoint {path} tensor table does not match its network shape")
    try:
        params = NetworkParams({n: tensors[n] for n, _ in layout}, config.network,
                               meta["use_lstm"], meta["share_weights"])
    except (KeyError, StructuralError) as e:
        raise CheckpointError(f"checkpoint {path} is missing or misshapes a tensor: {e}")
    if tensor_digest(params) != meta["digest"]:
        raise CheckpointError(f"checkpoint {path} failed its integrity check")
    if expected_config_hash is not None and expected_config_hash != meta["config_hash"]:
        raise CheckpointError(
            f"config hash mismatch: checkpoint {path} was trained under {meta['config_hash'][:12]}, "
            f"not {expected_config_hash[:12]}"
        )
    return Checkpoint(params, config, meta)
