"""Command-line pipeline: build datasets, audit, train, test, predict.

One executable with subcommands. Human-readable progress goes to standard
error; every artifact (split files, logs, checkpoints, reports) is written
to files, and each command leaves a manifest capturing the resolved options
so the run can be repeated.

Exit codes: 0 success, 1 internal error, 2 usage or file problem, 3 data
validation failure, 4 checkpoint mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import datasets as ds
from .checkpoint import load_checkpoint, restore_model, save_checkpoint
from .encoding import MAX_SEQUENCE_LENGTH
from .errors import (
    ConfigError,
    CorruptFile,
    IoFailure,
    ModelKindMismatch,
    PPIKitError,
    VersionMismatch,
)
from .models import FC, MODEL_KINDS, RECURRENT, build_model
from .training import (
    EncodedPairSet,
    TrainingConfig,
    TrainingLog,
    evaluate,
    predict_probabilities,
    retrain_final,
    train,
)

EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CHECKPOINT = 4

_CHECKPOINT_ERRORS = (VersionMismatch, ModelKindMismatch, CorruptFile)


class _LeakFailure(PPIKitError):
    """Raised when --fail-on-leak trips; mapped to the data exit code."""


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _write_json(payload, path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out_dir_or_file, command: str, options: dict, extra: dict) -> None:
    target = Path(out_dir_or_file)
    if target.suffix:
        path = target.with_name(target.stem + ".manifest.json")
    else:
        target.mkdir(parents=True, exist_ok=True)
        path = target / "manifest.json"
    _write_json(
        {
            "command": command,
            "options": {k: str(v) if isinstance(v, Path) else v for k, v in options.items()},
            "version": __version__,
            **extra,
        },
        path,
    )


# --------------------------------------------------------------------------
# Option handling: flat key=value config files, flags override
# --------------------------------------------------------------------------

def _parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _coerce(key: str, text: str, kind):
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot read {text!r} as {kind.__name__}") from None


def _apply_config(args: argparse.Namespace, option_types: dict[str, type], defaults: dict) -> None:
    """Fill in unset options from the config file, then from the defaults."""
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = _parse_config_file(_require_file(args.config, "config file"))
        unknown = set(file_values) - {k.replace("_", "-") for k in option_types}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for dest, kind in option_types.items():
        if getattr(args, dest, None) is not None:
            continue
        key = dest.replace("_", "-")
        if key in file_values:
            setattr(args, dest, _coerce(key, file_values[key], kind))
        elif dest in defaults:
            setattr(args, dest, defaults[dest])


_TRAIN_OPTION_TYPES = {
    "seed": int,
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "lr_factor": float,
    "lr_floor": float,
    "patience": int,
    "max_len": int,
    "branch_units": int,
    "conv_filters": int,
    "kernel_size": int,
    "pool_size": int,
    "conv_blocks": int,
    "lstm_units": int,
    "head_units": int,
}

_TRAIN_DEFAULTS = {
    "seed": 0,
    "epochs": 100,
    "batch_size": 2048,
    "lr": 0.001,
    "lr_factor": 0.9,
    "lr_floor": 0.0008,
    "patience": 5,
    "max_len": MAX_SEQUENCE_LENGTH,
    "branch_units": 20,
    "conv_filters": 5,
    "kernel_size": 20,
    "pool_size": 3,
    "conv_blocks": 3,
    "lstm_units": 32,
    "head_units": None,
}


def _add_train_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epochs", type=int, help="maximum training epochs")
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr", type=float, help="initial learning rate")
    parser.add_argument("--lr-factor", type=float)
    parser.add_argument("--lr-floor", type=float)
    parser.add_argument("--patience", type=int, help="plateau patience in epochs")
    parser.add_argument("--max-len", type=int)
    parser.add_argument("--branch-units", type=int)
    parser.add_argument("--conv-filters", type=int)
    parser.add_argument("--kernel-size", type=int)
    parser.add_argument("--pool-size", type=int)
    parser.add_argument("--conv-blocks", type=int)
    parser.add_argument("--lstm-units", type=int)
    parser.add_argument("--head-units", type=int)
    parser.add_argument("--config", help="flat key = value file; flags override it")


def _training_config(args) -> TrainingConfig:
    return TrainingConfig(
        batch_size=args.batch_size,
        learning_rate=args.lr,
        lr_factor=args.lr_factor,
        lr_floor=args.lr_floor,
        plateau_patience=args.patience,
        max_epochs=args.epochs,
        seed=args.seed,
    )


def _model_kwargs(args) -> dict:
    if args.model == FC:
        kwargs = dict(max_len=args.max_len, branch_units=args.branch_units, seed=args.seed)
        if args.head_units is not None:
            kwargs["head_units"] = args.head_units
        return kwargs
    kwargs = dict(
        max_len=args.max_len,
        conv_filters=args.conv_filters,
        kernel_size=args.kernel_size,
        pool_size=args.pool_size,
        conv_blocks=args.conv_blocks,
        lstm_units=args.lstm_units,
        seed=args.seed,
    )
    if args.head_units is not None:
        kwargs["head_units"] = args.head_units
    return kwargs


def _load_split_sets(split_dir: Path, which) -> dict[str, ds.InteractionCorpus]:
    sets = {}
    for name in which:
        path = _require_file(split_dir / ds.SPLIT_FILES[name], f"{name} set")
        sets[name] = ds.load_corpus(path, provenance=name)
    return sets


def _options_dict(args, keys) -> dict:
    return {key: getattr(args, key) for key in keys}


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_build_dataset(args) -> int:
    pairs_path = _require_file(args.pairs, "pairs file")
    out_dir = Path(args.out)
    result = ds.ingest_pairs(pairs_path, provenance=str(pairs_path))
    corpus = result.corpus
    _say(f"ingested {len(corpus)} pairs, rejected {len(result.rejections)} rows")
    corpus = ds.filter_by_length(corpus, args.max_len)
    _say(f"{len(corpus)} pairs within length {args.max_len}")

    if args.negatives:
        if args.proteins:
            proteins, rejected = ds.ingest_proteins(_require_file(args.proteins, "proteins file"))
            if rejected:
                _say(f"proteins file: {len(rejected)} rows rejected")
        else:
            proteins = corpus.proteins()
        proteins = [p for p in proteins if len(p.sequence) <= args.max_len]
        negatives = ds.sample_negatives(corpus, proteins, args.negatives, seed=args.seed)
        corpus = ds.InteractionCorpus(corpus.pairs + negatives.pairs, corpus.provenance)
        _say(f"sampled {len(negatives)} negatives")

    corpus, dropped_for_balance = ds.balance_classes(corpus, seed=args.seed)
    if dropped_for_balance:
        _say(f"dropped {len(dropped_for_balance)} couples to balance classes")

    if args.mode == ds.REGULAR:
        ratios = (1.0 - 2 * args.val_fraction, args.val_fraction, args.val_fraction)
        split = ds.split_regular(corpus, ratios, seed=args.seed)
    else:
        split = ds.split_strict(corpus, val_fraction=args.val_fraction, seed=args.seed)
    if args.mirror:
        split = ds.augment_mirrors(split)

    report = ds.audit_split(split)
    written = ds.write_split(split, out_dir)
    (out_dir / "leak_report.txt").write_text(report.to_text(), encoding="utf-8")
    _write_json(report.to_dict(), out_dir / "leak_report.json")

    options = _options_dict(
        args, ["pairs", "proteins", "mode", "out", "seed", "negatives", "max_len", "val_fraction", "mirror"]
    )
    _write_manifest(
        out_dir,
        "build-dataset",
        options,
        {
            "sizes": split.sizes(),
            "balance": report.balance,
            "discarded": len(split.discarded) + len(dropped_for_balance),
            "rejections": len(result.rejections),
            "strictness_violations": report.strictness_violations,
            "kind": split.kind,
            "augmented": split.augmented,
            "files": written,
        },
    )
    for name, size in split.sizes().items():
        _say(f"{name}: {size} pairs")
    _say(f"wrote split to {out_dir}")
    return 0


def cmd_audit(args) -> int:
    split_dir = Path(args.split_dir)
    kind = args.kind
    augmented = False
    manifest_path = split_dir / "manifest.json"
    if kind is None and manifest_path.is_file():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        kind = manifest.get("kind")
        augmented = bool(manifest.get("augmented", False))
    if kind is None:
        kind = ds.REGULAR
    split = ds.read_split(split_dir, kind=kind, augmented=augmented)
    report = ds.audit_split(split)
    out_dir = Path(args.out) if args.out else split_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "leak_report.txt").write_text(report.to_text(), encoding="utf-8")
    _write_json(report.to_dict(), out_dir / "leak_report.json")
    _say(report.to_text().rstrip())
    _write_manifest(
        out_dir, "audit", _options_dict(args, ["split_dir", "kind", "out", "fail_on_leak"]), {"kind": kind}
    )
    leaking = report.has_couple_leak or bool(report.strictness_violations)
    if args.fail_on_leak and leaking:
        raise _LeakFailure("leak detected: see leak_report.txt")
    return 0


def _train_on_split(args, split_dir: Path):
    sets = _load_split_sets(split_dir, ("train", "validation"))
    config = _training_config(args)
    model = build_model(args.model, **_model_kwargs(args))
    train_set = EncodedPairSet.from_corpus(sets["train"], args.max_len)
    val_set = EncodedPairSet.from_corpus(sets["validation"], args.max_len)
    _say(f"training {args.model} model: {len(train_set)} train / {len(val_set)} validation pairs")
    log, best = train(model, train_set, val_set, config)
    _say(f"best validation loss {log.best_val_loss:.6f} at epoch {log.best_epoch}")
    return sets, config, log, best


def cmd_train(args) -> int:
    split_dir = Path(args.split_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, config, log, best = _train_on_split(args, split_dir)
    log.to_csv(out_dir / "training_log.csv")
    save_checkpoint(best, out_dir / "model.ckpt")
    _write_manifest(
        out_dir,
        "train",
        _options_dict(args, ["split_dir", "model", "out"] + list(_TRAIN_OPTION_TYPES)),
        {"best_epoch": log.best_epoch, "best_val_loss": log.best_val_loss},
    )
    _say(f"wrote {out_dir / 'training_log.csv'} and {out_dir / 'model.ckpt'}")
    return 0


def cmd_final_test(args) -> int:
    split_dir = Path(args.split_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sets, config, log, _ = _train_on_split(args, split_dir)
    test_corpus = ds.load_corpus(
        _require_file(split_dir / ds.SPLIT_FILES["test"], "test set"), provenance="test"
    )

    merged = ds.InteractionCorpus(sets["train"].pairs + sets["validation"].pairs)
    merged_set = EncodedPairSet.from_corpus(merged, args.max_len)
    _say(f"retraining on {len(merged_set)} pairs for {log.best_epoch} epochs")
    final = retrain_final(args.model, merged_set, log.best_epoch, config, _model_kwargs(args))

    model = restore_model(final)
    metrics = evaluate(model, EncodedPairSet.from_corpus(test_corpus, args.max_len),
                       batch_size=args.batch_size)
    log.to_csv(out_dir / "training_log.csv")
    save_checkpoint(final, out_dir / "final_model.ckpt")
    payload = metrics.to_dict()
    payload["best_epoch"] = log.best_epoch
    _write_json(payload, out_dir / "metrics.json")
    _write_manifest(
        out_dir,
        "final-test",
        _options_dict(args, ["split_dir", "model", "out"] + list(_TRAIN_OPTION_TYPES)),
        {"metrics": payload},
    )
    _say(f"test accuracy {metrics.accuracy:.4f}, F-score "
         f"{'n/a' if metrics.f_score is None else f'{metrics.f_score:.4f}'}")
    return 0


def cmd_evaluate(args) -> int:
    checkpoint = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    model = restore_model(checkpoint)
    corpus = ds.load_corpus(_require_file(args.dataset, "dataset file"))
    dataset = EncodedPairSet.from_corpus(corpus, model.max_len)
    metrics = evaluate(model, dataset, threshold=args.threshold, threads=args.threads)
    _write_json(metrics.to_dict(), args.out)
    _write_manifest(
        args.out, "evaluate", _options_dict(args, ["checkpoint", "dataset", "threshold", "threads", "out"]), {}
    )
    _say(f"accuracy {metrics.accuracy:.4f} on {len(dataset)} pairs; wrote {args.out}")
    return 0


def _read_prediction_pairs(path):
    """Pairs for prediction: label column optional."""
    ids, seqs_a, seqs_b = [], [], []
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (4, 5):
            raise PPIKitError(f"{path}:{line_no}: expected 4 or 5 columns, got {len(cols)}")
        ids.append((cols[0], cols[2]))
        seqs_a.append(cols[1])
        seqs_b.append(cols[3])
    return ids, seqs_a, seqs_b


def cmd_predict(args) -> int:
    checkpoint = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    model = restore_model(checkpoint)
    ids, seqs_a, seqs_b = _read_prediction_pairs(_require_file(args.pairs, "pairs file"))
    dataset = EncodedPairSet(seqs_a, seqs_b, np.zeros(len(seqs_a)), model.max_len)
    probs = predict_probabilities(model, dataset, threads=args.threads).reshape(-1)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("# id_a\tid_b\tprobability\n")
        for (id_a, id_b), p in zip(ids, probs):
            fh.write(f"{id_a}\t{id_b}\t{p:.10f}\n")
    _write_manifest(args.out, "predict", _options_dict(args, ["checkpoint", "pairs", "threads", "out"]), {})
    _say(f"wrote {len(ids)} predictions to {args.out}")
    return 0


def cmd_export_curves(args) -> int:
    log = TrainingLog.from_csv(_require_file(args.log, "training log"))
    series = {
        "epoch": [r.epoch for r in log.epochs],
        "train_loss": [r.train_loss for r in log.epochs],
        "train_acc": [r.train_acc for r in log.epochs],
        "val_loss": [r.val_loss for r in log.epochs],
        "val_acc": [r.val_acc for r in log.epochs],
        "lr": [r.lr for r in log.epochs],
        "best_epoch": log.best_epoch,
    }
    _write_json(series, args.out)
    if args.png:
        try:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            raise ConfigError("--png needs matplotlib (install the 'plots' extra)") from None
        fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
        ax_loss.plot(series["epoch"], series["train_loss"], label="train loss")
        ax_loss.plot(series["epoch"], series["val_loss"], label="validation loss")
        ax_loss.axvline(log.best_epoch, linestyle="--", color="gray")
        ax_loss.set_xlabel("epoch")
        ax_loss.legend()
        ax_acc.plot(series["epoch"], series["train_acc"], label="train accuracy")
        ax_acc.plot(series["epoch"], series["val_acc"], label="validation accuracy")
        ax_acc.axvline(log.best_epoch, linestyle="--", color="gray")
        ax_acc.set_xlabel("epoch")
        ax_acc.legend()
        fig.tight_layout()
        fig.savefig(args.png, dpi=120)
        _say(f"wrote {args.png}")
    _write_manifest(args.out, "export-curves", _options_dict(args, ["log", "out", "png"]), {})
    _say(f"wrote {args.out}")
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppikit",
        description="Sequence-based protein interaction models with leak-audited dataset tooling.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="split a pair corpus into train/validation/test")
    p.add_argument("--pairs", required=True, help="TSV: id_a seq_a id_b seq_b label")
    p.add_argument("--proteins", help="TSV: id sequence (negative-sampling pool)")
    p.add_argument("--mode", required=True, choices=[ds.REGULAR, ds.STRICT])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negatives", type=int, default=0, help="sample this many non-interacting couples")
    p.add_argument("--max-len", type=int, default=MAX_SEQUENCE_LENGTH)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--mirror", action=argparse.BooleanOptionalAction, default=True,
                   help="add mirrored couples to every set")
    p.set_defaults(handler=cmd_build_dataset)

    p = sub.add_parser("audit", help="measure leakage of an existing split")
    p.add_argument("split_dir")
    p.add_argument("--kind", choices=[ds.REGULAR, ds.STRICT])
    p.add_argument("--out", help="report directory (defaults to the split directory)")
    p.add_argument("--fail-on-leak", action="store_true")
    p.set_defaults(handler=cmd_audit)

    p = sub.add_parser("train", help="train on a split, keeping the best-validation weights")
    p.add_argument("split_dir")
    p.add_argument("--model", required=True, choices=list(MODEL_KINDS))
    p.add_argument("--out", required=True)
    _add_train_options(p)
    p.set_defaults(handler=cmd_train, needs_train_options=True)

    p = sub.add_parser(
        "final-test",
        help="train, retrain on train+validation for the best epoch count, evaluate on test",
    )
    p.add_argument("split_dir")
    p.add_argument("--model", required=True, choices=list(MODEL_KINDS))
    p.add_argument("--out", required=True)
    _add_train_options(p)
    p.set_defaults(handler=cmd_final_test, needs_train_options=True)

    p = sub.add_parser("evaluate", help="metrics of a checkpoint on a labeled TSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("predict", help="interaction probabilities for a pairs TSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", required=True, help="TSV with 4 or 5 columns; labels ignored")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output TSV path")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("export-curves", help="training-log CSV to plot-ready JSON (and PNG)")
    p.add_argument("--log", required=True, help="training_log.csv from train/final-test")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--png", help="also render the curves to this image")
    p.set_defaults(handler=cmd_export_curves)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "needs_train_options", False):
            _apply_config(args, _TRAIN_OPTION_TYPES, _TRAIN_DEFAULTS)
        return args.handler(args)
    except FileNotFoundError as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except (ConfigError, IoFailure) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except _CHECKPOINT_ERRORS as exc:
        _say(f"error: {exc}")
        return EXIT_CHECKPOINT
    except PPIKitError as exc:
        _say(f"error: {exc}")
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        _say(f"internal error: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
