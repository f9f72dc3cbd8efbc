"""Command-line entry point.

Subcommands: gen, train, eval, ablate, baselines, noise-sweep. Exit codes:
0 success, 1 usage/config error, 2 runtime failure. All randomness flows
from the config (or --seed override) through named derivation, so every
subcommand is idempotent given identical inputs and seeds; timestamps only
ever appear inside report metadata fields.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import config as cfgmod
from .config import ConfigError
from .data_model import (
    DatasetFormatError,
    dataset_fingerprint,
    load_dataset,
    save_dataset,
)
from .model import build, load_checkpoint, save_checkpoint
from .nn_core import Adam
from .pulse_sim import add_noise, generate_dataset
from .train_eval import (
    evaluate,
    noise_sweep,
    run_ablation,
    run_baselines,
    train,
    write_confusion_csv,
    write_noise_gnuplot,
    write_report_json,
    write_rows_csv,
)

__all__ = ["main"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser, *, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="run configuration file")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable; comma-separate multi-values)",
    )


def _load_cfg(args) -> dict:
    cfg = cfgmod.load_config(args.config) if args.config else {}
    return cfgmod.apply_overrides(cfg, args.set)


def _outdir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    if args.from_dataset:
        ds = load_dataset(args.from_dataset)
        seed = args.seed if args.seed is not None else 0
        out = add_noise(ds, args.noise, seed)
        save_dataset(out, args.out)
    else:
        if not args.config:
            raise UsageError("gen needs --config (or --from-dataset for a noisy copy)")
        cfg = _load_cfg(args)
        sim = cfgmod.sim_config(cfg, seed=args.seed)
        out = generate_dataset(sim)
        save_dataset(out, args.out)
    counts = ",".join(str(int(c)) for c in out.class_counts)
    print(f"wrote {args.out}: N={out.n} C={out.num_classes} class_counts={counts}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    if getattr(args, "norm", None):
        cfg = cfgmod.apply_overrides(cfg, [f"model.norm={args.norm}"])
    train_cfg = cfgmod.train_config(cfg, seed=args.seed)
    train_ds = load_dataset(args.data)
    if args.resume:
        ck = load_checkpoint(args.resume)
        model = ck.model
        stats = ck.stats
        optimizer = Adam(
            model.params,
            train_cfg.learning_rate,
            train_cfg.beta1,
            train_cfg.beta2,
            train_cfg.eps,
        )
        if ck.opt_tensors is None or ck.adam_t is None:
            raise ValueError(f"{args.resume}: checkpoint carries no optimizer state to resume")
        optimizer.load_state(ck.opt_tensors, ck.adam_t)
        start_epoch = int(ck.meta.get("epochs_run", 0))
        prior = list(ck.meta.get("epoch_losses", []))
    else:
        model_cfg = cfgmod.model_config(cfg, num_classes=train_ds.num_classes)
        model = build(model_cfg, seed=train_cfg.seed)
        stats = None
        optimizer = None
        start_epoch = 0
        prior = []
    result = train(
        model,
        train_ds,
        train_cfg,
        stats=stats,
        start_epoch=start_epoch,
        optimizer=optimizer,
        prior_losses=prior,
        on_epoch=lambda e, l: print(f"epoch {e}: loss {l:.6f}"),
    )
    meta = {
        "epochs_run": len(result.epoch_losses),
        "epoch_losses": result.epoch_losses,
        "train_fingerprint": dataset_fingerprint(train_ds),
        "train_config": train_cfg.to_dict(),
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    save_checkpoint(args.out, result.model, result.stats, meta, optimizer=result.optimizer)
    if result.stats is not None:
        result.stats.save(str(args.out) + ".stats")
    print(f"wrote {args.out} ({model.config.architecture}, scheme {model.config.scheme})")
    return 0


def cmd_eval(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    test_ds = load_dataset(args.data)
    report = evaluate(
        ck.model,
        test_ds,
        ck.stats,
        metadata={
            "checkpoint": str(args.checkpoint),
            "data_fingerprint": dataset_fingerprint(test_ds),
            "train_fingerprint": ck.meta.get("train_fingerprint"),
            "evaluated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        },
    )
    out = _outdir(args)
    write_report_json(report, out / "report.json")
    write_confusion_csv(report, out / "confusion.csv")
    print(f"macro_accuracy {report.macro_accuracy:.6f} (n_test={report.n_test})")
    for c, acc in enumerate(report.per_class_accuracy):
        shown = "absent" if acc is None else f"{acc:.6f}"
        print(f"class {c}: acc {shown}")
    return 0


def _grid_inputs(args):
    cfg = _load_cfg(args)
    train_ds = load_dataset(args.train)
    test_ds = load_dataset(args.test)
    if train_ds.num_classes != test_ds.num_classes:
        raise ValueError("train and test datasets declare different class counts")
    base_cfg = cfgmod.model_config(cfg, num_classes=train_ds.num_classes)
    train_cfg = cfgmod.train_config(cfg, seed=args.seed)
    _, replicates = cfgmod.eval_params(cfg)
    seeds = tuple(train_cfg.seed + k for k in range(replicates))
    return cfg, train_ds, test_ds, base_cfg, train_cfg, seeds


def cmd_ablate(args) -> int:
    _, train_ds, test_ds, base_cfg, train_cfg, seeds = _grid_inputs(args)
    result = run_ablation(train_ds, test_ds, base_cfg, train_cfg, seeds=seeds, jobs=args.jobs)
    out = _outdir(args)
    write_rows_csv(
        result.rows, ("scheme", "architecture", "seed", "macro_accuracy"), out / "ablation_runs.csv"
    )
    write_rows_csv(
        result.summary,
        ("scheme", "architecture", "median_macro_accuracy"),
        out / "ablation.csv",
    )
    for row in result.summary:
        print(
            f"{row['scheme']:>14} | {row['architecture']:<24} | "
            f"median M = {row['median_macro_accuracy']:.4f}"
        )
    return 0


def cmd_baselines(args) -> int:
    _, train_ds, test_ds, base_cfg, train_cfg, seeds = _grid_inputs(args)
    result = run_baselines(train_ds, test_ds, base_cfg, train_cfg, seeds=seeds, jobs=args.jobs)
    out = _outdir(args)
    write_rows_csv(
        result.rows, ("method", "scheme", "seed", "macro_accuracy"), out / "baselines_runs.csv"
    )
    write_rows_csv(
        result.summary, ("method", "scheme", "median_macro_accuracy"), out / "baselines.csv"
    )
    for row in result.summary:
        print(f"{row['method']:<24} | median M = {row['median_macro_accuracy']:.4f}")
    return 0


def cmd_noise_sweep(args) -> int:
    cfg = _load_cfg(args)
    fractions, _ = cfgmod.eval_params(cfg)
    test_ds = load_dataset(args.data)
    named = []
    for path in args.checkpoint:
        ck = load_checkpoint(path)
        named.append((Path(path).stem, ck.model, ck.stats))
    seed = args.seed if args.seed is not None else cfgmod.train_config(cfg).seed
    rows = noise_sweep(named, test_ds, fractions=fractions, seed=seed)
    out = _outdir(args)
    write_rows_csv(rows, ("model", "noise_fraction", "macro_accuracy"), out / "noise_sweep.csv")
    for name, _, _ in named:
        write_noise_gnuplot(rows, name, out / f"noise_{name}.dat")
    for row in rows:
        print(
            f"{row['model']:<24} noise {row['noise_fraction']:.2f} -> "
            f"M = {row['macro_accuracy']:.4f}"
        )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="emitterclf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset (or a noisy copy)")
    _add_common(p, config_required=False)
    p.add_argument("--out", required=True, help="output dataset file")
    p.add_argument("--from-dataset", default=None, help="perturb an existing dataset instead")
    p.add_argument("--noise", type=float, default=0.0, help="noise fraction for --from-dataset")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="fit stats, train a model, write a checkpoint")
    _add_common(p)
    p.add_argument("--data", required=True, help="training dataset file")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--resume", default=None, help="continue training from a checkpoint")
    p.add_argument(
        "--norm",
        choices=["none", "minmax", "minmax+perseq", "standardize", "discretize"],
        default=None,
        help="override the configured normalization scheme",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _add_common(p, config_required=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="test dataset file")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the normalization x architecture grid")
    _add_common(p)
    p.add_argument("--train", required=True, help="training dataset file")
    p.add_argument("--test", required=True, help="test dataset file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1, help="max parallel grid workers")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("baselines", help="run the baseline comparison table")
    _add_common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("noise-sweep", help="noise-robustness curves for trained models")
    _add_common(p, config_required=False)
    p.add_argument("--data", required=True, help="test dataset file")
    p.add_argument("--checkpoint", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_noise_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (UsageError, ConfigError, DatasetFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - map to the documented exit code
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
