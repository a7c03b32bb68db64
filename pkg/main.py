"""
Command line entry point.

    python main.py train   --config stores/default.yaml --override trainer.use_lstm=false
    python main.py eval    --checkpoint runs/drqn/checkpoints/final.npz --episodes 1000
    python main.py ablate  --config stores/default.yaml
    python main.py rollout --checkpoint runs/drqn/checkpoints/final.npz --seed 3 --trace trace.csv
    python main.py inspect-checkpoint --checkpoint runs/drqn/checkpoints/final.npz

Exit status is 0 on success, 1 for configuration or checkpoint problems and 2 when
training diverged.
"""
from __future__ import annotations
import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Sequence

from config import ConfigError, RunConfig, load_run_config
from environment import IntersectionEnv, run_episode
from evaluation import evaluate, greedy
from intersection import trace_header, trace_row
from serialize import (
    CheckpointError, CsvLog, TRAINING_LOG_COLUMNS, eval_report_dict, load_checkpoint,
    serialize, write_csv, write_run_files, write_training_rows,
)
from stg_control import ALL_ACTIONS
from trainer import DivergenceError, Trainer, TrainingResult

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2

# Four paired experiments; each flag off against the all-on baseline.
ABLATION_VARIANTS = {
    "replay_on": {"use_replay": True},
    "replay_off": {"use_replay": False},
    "dropout_on": {"use_dropout": True},
    "dropout_off": {"use_dropout": False},
    "lstm_on": {"use_lstm": True},
    "lstm_off": {"use_lstm": False},
    "shared_on": {"share_weights": True},
    "shared_off": {"share_weights": False},
}

TRACE_EXTRA = ["action", "goal", "action_valid", "jerk", "reward"] + [f"q_{k + 1}" for k in range(6)]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "out_dir", None) is not None:
        overrides.append(f"out_dir={args.out_dir}")
    return load_run_config(args.config, overrides)


def run_directory(config: RunConfig) -> Path:
    return Path(config.out_dir) / config.name


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    run_dir = write_run_files(run_directory(config), config)
    Trainer(config, run_dir).train()
    logger.info("training finished, outputs in %s", run_dir)
    return EXIT_OK


def variant_config(config: RunConfig, variant: str) -> RunConfig:
    trainer = dataclasses.replace(config.trainer, **ABLATION_VARIANTS[variant])
    return dataclasses.replace(config, trainer=trainer)


def run_ablation(config: RunConfig, out_dir: Path) -> dict[str, TrainingResult]:
    """
    Train every variant on the same seeds. Variants whose resolved config is identical
    are trained once and share the result. Writes one run directory per variant and a
    combined `ablation.csv` keyed by variant.
    """
    results: dict[str, TrainingResult] = {}
    trained: dict[str, str] = {}
    combined = CsvLog(out_dir / "ablation.csv", ["variant"] + TRAINING_LOG_COLUMNS)
    for variant in ABLATION_VARIANTS:
        vconfig = variant_config(config, variant)
        key = vconfig.hash()
        run_dir = out_dir / variant
        if key in trained:
            source = trained[key]
            logger.info("variant %s has the same config as %s, reusing its run", variant, source)
            write_run_files(run_dir, vconfig, same_as=source)
            write_training_rows(CsvLog(run_dir / "training_log.csv", TRAINING_LOG_COLUMNS), results[source].log)
            results[variant] = results[source]
        else:
            logger.info("ablation variant %s starting", variant)
            write_run_files(run_dir, vconfig)
            results[variant] = Trainer(vconfig, run_dir).train()
            trained[key] = variant
            logger.info("ablation variant %s done after %d updates", variant, results[variant].updates)
        write_training_rows(combined, results[variant].log, variant=variant)
    return results


def cmd_ablate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    out_dir = run_directory(config)
    write_run_files(out_dir, config)
    run_ablation(config, out_dir)
    return EXIT_OK


def expected_config_hash(args: argparse.Namespace) -> str | None:
    """
    Hash of the config named by --config, --override and --out-dir, or None when none of
    them is given. --seed is left out: for eval and rollout it picks the episodes.
    """
    if args.config is None and not args.override and args.out_dir is None:
        return None
    overrides = list(args.override or [])
    if args.out_dir is not None:
        overrides.append(f"out_dir={args.out_dir}")
    return load_run_config(args.config, overrides).hash()


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint, expected_config_hash=expected_config_hash(args))
    config = checkpoint.config
    n = args.episodes if args.episodes is not None else config.trainer.eval_episodes
    seed = args.seed if args.seed is not None else config.seed
    report = evaluate(checkpoint.params, n, seed, config)
    text = serialize(eval_report_dict(report, checkpoint.digest))
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(text + "\n", encoding="utf-8")
        logger.info("wrote evaluation report %s", args.report)
    else:
        print(text)
    return EXIT_OK


def rollout_trace(checkpoint, seed: int) -> tuple[list[str], list[list[object]]]:
    """Play one greedy episode and return the trace header and one row per step."""
    config = checkpoint.config
    env = IntersectionEnv.from_run_config(config)
    rows: list[list[object]] = []

    def record(t, action, q, step):
        extra = [action, ALL_ACTIONS[action].label, int(step.action_valid), step.jerk, step.reward, *q.tolist()]
        rows.append(trace_row(step.outcome, extra))

    run_episode(env, checkpoint.params, greedy, seed, config.trainer.gamma, on_step=record)
    return trace_header(TRACE_EXTRA), rows


def cmd_rollout(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint, expected_config_hash=expected_config_hash(args))
    header, rows = rollout_trace(checkpoint, args.seed if args.seed is not None else 0)
    write_csv(args.trace, header, rows)
    logger.info("wrote %d trace rows to %s", len(rows), args.trace)
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        checkpoint = load_checkpoint(args.checkpoint)
    except CheckpointError as e:
        print(f"integrity: FAILED ({e})")
        return EXIT_CONFIG
    meta = checkpoint.meta
    print(f"checkpoint: {args.checkpoint}")
    print(f"format version: {meta['format_version']} (package {meta['package_version']})")
    print(f"config hash: {meta['config_hash']}")
    print(f"mode: {'DRQN' if meta['use_lstm'] else 'DQN'}, shared weights: {meta['share_weights']}")
    for name, shape in meta["tensors"]:
        print(f"  {name:<10} {'x'.join(str(s) for s in shape)}")
    print(f"digest: {meta['digest']}")
    print("integrity: OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config; defaults are used when omitted.")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="Override one config value, e.g. trainer.use_lstm=false. Repeatable.")
    common.add_argument("--seed", type=int,
                        help="Root seed for train and ablate; for eval and rollout, the episode seed (rollout default 0).")
    common.add_argument("--out-dir", dest="out_dir", help="Output directory, overriding the config.")
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")

    p = argparse.ArgumentParser(description="Intersection crossing with deep recurrent Q-learning.")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="Train one agent.").set_defaults(func=cmd_train)
    sub.add_parser("ablate", parents=[common], help="Train the eight ablation variants.").set_defaults(func=cmd_ablate)

    ev = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint greedily.")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--episodes", type=int)
    ev.add_argument("--report", help="Write the JSON report here instead of stdout.")
    ev.set_defaults(func=cmd_eval)

    ro = sub.add_parser("rollout", parents=[common], help="Trace one greedy episode.")
    ro.add_argument("--checkpoint", required=True)
    ro.add_argument("--trace", required=True, help="CSV file for the episode trace.")
    ro.set_defaults(func=cmd_rollout)

    ins = sub.add_parser("inspect-checkpoint", parents=[common], help="Show a checkpoint's contents.")
    ins.add_argument("--checkpoint", required=True)
    ins.set_defaults(func=cmd_inspect)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DivergenceError as e:
        logger.warning("aborted: %s", e)
        return EXIT_DIVERGED
    except (ConfigError, CheckpointError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
