#!/usr/bin/env python3
"""Command-line entry point for ordinal reward modeling."""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ValidationError

from config import LOG_FORMAT
from errors import ContractError, NumericError, OrdinalRMError, SchemaError, UsageError

logger = logging.getLogger(__name__)


def load_config(path: str, model: type[BaseModel], **overrides) -> BaseModel:
    """Parse a flat JSON config file into ``model``."""
    from utils.artifacts import read_json

    try:
        data = read_json(path)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Malformed config {path}: {e}") from None
    if not isinstance(data, dict):
        raise SchemaError(f"Config {path} must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return model.model_validate(data)


def _manifest_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}.manifest.json")


def cmd_gen(args) -> int:
    """Generate a synthetic dataset."""
    from prefdata import GenConfig, generate, write_dataset
    from utils.artifacts import RunManifest, all_or_nothing, digest_json

    cfg = load_config(args.config, GenConfig)
    ds = generate(cfg)

    out = Path(args.out)
    manifest = RunManifest(
        command=["gen"],
        config_digest=digest_json(cfg.model_dump(mode="json")),
        seeds=[cfg.seed],
        paths={"config": args.config, "out": str(out)},
    )
    ds.metadata["manifest_digest"] = manifest.digest
    with all_or_nothing() as written:
        written.extend(write_dataset(ds, out))
        for path in written:
            manifest.record_artifact(path)
        written.append(manifest.write(_manifest_path(out)))
    print(f"wrote {ds.n} examples to {out}")
    return 0


def cmd_noise(args) -> int:
    """Corrupt labels of an existing dataset."""
    from prefdata import inject_noise, read_jsonl, write_dataset
    from utils.artifacts import RunManifest, all_or_nothing, digest_file

    if not 0.0 <= args.rate <= 1.0:
        raise UsageError(f"--rate must be in [0, 1], got {args.rate}")
    ds = read_jsonl(args.data)
    noisy = inject_noise(ds, args.kind, args.rate, args.seed)

    out = Path(args.out)
    manifest = RunManifest(
        command=["noise", f"--kind={args.kind}", f"--rate={args.rate!r}"],
        dataset_digests={"data": digest_file(args.data)},
        seeds=[args.seed],
        paths={"data": args.data, "out": str(out)},
    )
    noisy.metadata["manifest_digest"] = manifest.digest
    with all_or_nothing() as written:
        written.extend(write_dataset(noisy, out))
        for path in written:
            manifest.record_artifact(path)
        written.append(manifest.write(_manifest_path(out)))
    stats = noisy.metadata["noise"]
    print(f"{args.kind} noise: {stats['selected']} of {noisy.n} selected, {stats['changed']} labels changed")
    return 0


def _parse_seeds(text: Optional[str]) -> Optional[list[int]]:
    if text is None:
        return None
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds must be a comma-separated list of integers, got {text!r}") from None
    if not seeds or any(s < 0 for s in seeds):
        raise UsageError("--seeds needs at least one non-negative seed")
    return seeds


def _write_run(cfg, state, report, out: Path, data_digests: dict, paths: dict, written: list) -> None:
    """Write one run's artifacts, appending each path to ``written`` as it lands."""
    from utils.artifacts import RunManifest, digest_json, write_csv, write_json

    th = state.thresholds
    K = cfg.K

    manifest = RunManifest(
        command=["train", f"--loss={cfg.loss.value}"],
        config_digest=digest_json(cfg.echo()),
        dataset_digests=data_digests,
        seeds=[cfg.seed],
        extra={"skipped_per_epoch": report.skipped_per_epoch},
        paths={**paths, "out": str(out)},
    )
    tag = {"manifest_digest": manifest.digest}
    zeta_cols = [f"zeta_{k}" for k in range(-K, 0)] + [f"zeta_{k}" for k in range(1, K + 1)]

    start = len(written)
    written.append(write_json(out / "model.json", {**state.scorer.to_dict(), **tag}))
    if th is not None:
        written.append(write_json(out / "thresholds.json", {**th.to_dict(), **tag}))
        written.append(write_csv(out / "trajectory.csv", ["step"] + zeta_cols,
                                 ([step] + [float(v) for v in zeta] for step, zeta in report.trajectory)))
    else:
        written.append(write_csv(out / "trajectory.csv", ["step"], []))
    written.append(write_csv(out / "loss.csv", ["step", "loss"], report.loss_curve))
    best = report.best
    if best is not None:
        written.append(write_json(out / "best_model.json", {**best.scorer.to_dict(), **tag}))
        if best.thresholds is not None:
            written.append(write_json(out / "best_thresholds.json", {**best.thresholds.to_dict(), **tag}))
    written.append(write_json(out / "report.json", {**report.to_dict(), "config": cfg.echo(), **tag}))
    for path in written[start:]:
        manifest.record_artifact(path)
    written.append(manifest.write(out / "manifest.json"))

    print(f"seed {cfg.seed}: {report.steps} steps, final objective {report.final_objective:.6f}")
    if th is not None:
        print("thresholds: " + " ".join(f"{v:+.4f}" for v in th.zeta))


def cmd_train(args) -> int:
    """Train a scorer (and thresholds for ordinal losses)."""
    from prefdata import read_jsonl
    from training import TrainConfig, train
    from utils.artifacts import all_or_nothing, digest_file

    if args.resume_from is not None:
        raise UsageError("--resume-from is not supported; training always starts from the configured initialization")
    seeds = _parse_seeds(args.seeds)
    if seeds is not None and args.seed is not None:
        raise UsageError("Use either --seed or --seeds, not both")

    cfg = load_config(args.config, TrainConfig, loss=args.loss, seed=args.seed)
    ds = read_jsonl(args.data, K=cfg.K)
    val = read_jsonl(args.val, K=cfg.K) if args.val else None
    digests = {"data": digest_file(args.data)}
    paths = {"config": args.config, "data": args.data}
    if args.val:
        digests["val"] = digest_file(args.val)
        paths["val"] = args.val

    out = Path(args.out)
    if seeds is None:
        state, report = train(ds, cfg, val=val)
        with all_or_nothing() as written:
            _write_run(cfg, state, report, out, digests, paths, written)
        return 0
    # every seed finishes before anything is written
    runs = [cfg.model_copy(update={"seed": seed}) for seed in seeds]
    results = [(run, *train(ds, run, val=val)) for run in runs]
    with all_or_nothing() as written:
        for run, state, report in results:
            _write_run(run, state, report, out / f"seed_{run.seed}", digests, paths, written)
    return 0


def _load_scorer(path: str):
    from scoring import RewardScorer
    from utils.artifacts import read_json

    try:
        return RewardScorer.from_dict(read_json(path))
    except json.JSONDecodeError as e:
        raise SchemaError(f"Malformed model file {path}: {e}") from None


def _load_thresholds(path: str):
    from ordinal import Thresholds
    from utils.artifacts import read_json

    try:
        return Thresholds.from_dict(read_json(path))
    except json.JSONDecodeError as e:
        raise SchemaError(f"Malformed threshold file {path}: {e}") from None


def cmd_eval(args) -> int:
    """Evaluate a scorer; level metrics when thresholds are supplied."""
    from evaluation import binary_report, confusion_rows, format_report, histogram_rows, ordinal_metrics
    from prefdata import read_jsonl
    from utils.artifacts import RunManifest, all_or_nothing, digest_file, write_csv, write_json

    if args.ordinal and args.thresholds is None:
        raise UsageError("--ordinal needs --thresholds")
    scorer = _load_scorer(args.model)
    th = _load_thresholds(args.thresholds) if args.thresholds else None
    ds = read_jsonl(args.data, K=None if th is None else th.K)
    report = ordinal_metrics(scorer, th, ds) if th is not None else binary_report(scorer, ds)

    digests = {"model": digest_file(args.model), "data": digest_file(args.data)}
    if args.thresholds:
        digests["thresholds"] = digest_file(args.thresholds)
    out = Path(args.out)
    manifest = RunManifest(command=["eval"] + (["--ordinal"] if th is not None else []),
                           dataset_digests=digests, paths={"data": args.data, "out": str(out)})
    with all_or_nothing() as written:
        written.append(write_json(out, {**report.to_dict(), "manifest_digest": manifest.digest}))
        if args.csv:
            if report.ordinal is not None:
                header, rows = confusion_rows(report.ordinal.confusion, ds.K)
                written.append(write_csv(out.with_name(f"{out.stem}.confusion.csv"), header, rows))
            header, rows = histogram_rows(report.margins)
            written.append(write_csv(out.with_name(f"{out.stem}.margins.csv"), header, rows))
        for path in written:
            manifest.record_artifact(path)
        written.append(manifest.write(_manifest_path(out)))
    print(format_report(report))
    return 0


def cmd_calibrate(args) -> int:
    """Fit thresholds to a frozen scorer."""
    from evaluation import calibrate
    from prefdata import read_jsonl
    from utils.artifacts import RunManifest, all_or_nothing, digest_file, write_json

    scorer = _load_scorer(args.model)
    ds = read_jsonl(args.data, K=args.K)
    before = scorer.digest
    result = calibrate(scorer.diff_batch(ds.a, ds.b) if ds.n else np.zeros(0), ds.z, ds.K, args.epochs, args.lr)
    if scorer.digest != before:
        raise ContractError("Scorer changed during calibration")

    out = Path(args.out)
    manifest = RunManifest(
        command=["calibrate", f"--epochs={args.epochs}", f"--lr={args.lr!r}"],
        dataset_digests={"model": digest_file(args.model), "data": digest_file(args.data)},
        extra={"frozen_scorer_digest": before},
        paths={"model": args.model, "data": args.data, "out": str(out)},
    )
    payload = {**result.to_dict(), "frozen_scorer_digest": before, "manifest_digest": manifest.digest}
    with all_or_nothing() as written:
        written.append(write_json(out, payload))
        manifest.record_artifact(written[0])
        written.append(manifest.write(_manifest_path(out)))
    print("thresholds: " + " ".join(f"{v:+.4f}" for v in result.thresholds.zeta))
    if result.low_information:
        print("warning: score differences carry no information; thresholds reflect label frequencies only")
    return 0


def cmd_gradcheck(args) -> int:
    """Verify every analytic gradient against finite differences."""
    from utils.gradcheck import format_results, run_gradcheck

    results = run_gradcheck(seed=args.seed, draws=args.draws)
    print(format_results(results))
    failed = [r for r in results if not r.passed]
    if failed:
        for r in failed:
            print(f"FAILED {r.name}: draws {r.failures}", file=sys.stderr)
        raise NumericError(f"{len(failed)} of {len(results)} gradient checks failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Ordinal reward modeling toolkit")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="Generate a synthetic dataset")
    p.add_argument("--config", required=True, help="Generator config (JSON)")
    p.add_argument("--out", required=True, help="Output JSONL path")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("noise", help="Inject label noise")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", required=True, choices=["shift", "random"])
    p.add_argument("--rate", required=True, type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("train", help="Train a reward scorer")
    p.add_argument("--config", required=True, help="Run config (JSON)")
    p.add_argument("--data", required=True)
    p.add_argument("--val", default=None, help="Validation set for checkpoint selection")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--loss", default=None, help="Override the configured loss")
    p.add_argument("--seed", type=int, default=None, help="Override the configured seed")
    p.add_argument("--seeds", default=None, help="Comma-separated seeds; one subdirectory per seed")
    p.add_argument("--resume-from", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Evaluate a trained scorer")
    p.add_argument("--model", required=True)
    p.add_argument("--thresholds", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="Report JSON path")
    p.add_argument("--ordinal", action="store_true", help="Require level metrics")
    p.add_argument("--csv", action="store_true", help="Also export confusion matrix and margin histogram")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="Post-hoc threshold calibration")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--K", type=int, default=None, help="Expected number of positive levels")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("gradcheck", help="Finite-difference gradient checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=None)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Parse arguments and run; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format=LOG_FORMAT,
        force=True,
    )
    from config import CALIBRATION_EPOCHS, CALIBRATION_LR, GRADCHECK_DRAWS

    if getattr(args, "epochs", 0) is None:
        args.epochs = CALIBRATION_EPOCHS
    if getattr(args, "lr", 0) is None:
        args.lr = CALIBRATION_LR
    if getattr(args, "draws", 0) is None:
        args.draws = GRADCHECK_DRAWS

    try:
        return args.func(args)
    except OrdinalRMError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"error: invalid configuration\n{e}", file=sys.stderr)
        return SchemaError.exit_code
    except (FileNotFoundError, IsADirectoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return SchemaError.exit_code


if __name__ == "__main__":
    sys.exit(main())
