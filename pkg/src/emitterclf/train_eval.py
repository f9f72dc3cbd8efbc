"""Training loop, macro-averaged evaluation, and the experiment grids.

Evaluation is macro-averaged: per-class accuracy ACC_c is the diagonal of
the confusion matrix divided by the true class count, and M is the plain
mean of ACC_c over classes present in the test set, so rare classes weigh
the same as common ones.

Grids (the normalization x architecture ablation, the baseline table, and
the noise-robustness sweep) run each cell as an independent task with its
own derived seed; with jobs > 1, tasks execute in spawned worker processes
and results are identical regardless of worker count.
"""

from __future__ import annotations

import concurrent.futures
import math
import multiprocessing
from dataclasses import dataclass, field, replace

import numpy as np

from .data_model import Dataset
from .model import (
    ModelConfig,
    SequenceClassifier,
    backward,
    build,
    forward,
)
from .nn_core import (
    Adam,
    clip_gradients,
    global_grad_norm,
    median_frequency_weights,
    softmax,
    weighted_cross_entropy,
)
from .normalize import DomainStats, build_batch, fit_domain_stats, normalize_scheme
from .pulse_sim import add_noise
from .seeding import derive_int, derive_rng

__all__ = [
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "train",
    "EvalReport",
    "classification_report",
    "evaluate",
    "ABLATION_CELLS",
    "BASELINE_METHODS",
    "DEFAULT_NOISE_FRACTIONS",
    "GridResult",
    "run_ablation",
    "run_baselines",
    "noise_sweep",
    "summarize_rows",
    "write_report_json",
    "write_confusion_csv",
    "write_rows_csv",
    "write_noise_gnuplot",
]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 0
    shuffle: bool = True
    patience: int | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


class TrainingDiverged(RuntimeError):
    """Raised when the loss or gradient norm turns non-finite."""


@dataclass
class TrainResult:
    model: SequenceClassifier
    stats: DomainStats | None
    class_weights: np.ndarray
    epoch_losses: list[float]
    optimizer: Adam


def _normalize_all(ds: Dataset, stats, scheme: str, bins: int):
    return [normalize_scheme(s, stats, scheme, bins) for s in ds.sequences]


def train(
    model: SequenceClassifier,
    train_ds: Dataset,
    cfg: TrainConfig,
    *,
    stats: DomainStats | None = None,
    class_weights: np.ndarray | None = None,
    start_epoch: int = 0,
    optimizer: Adam | None = None,
    prior_losses: list[float] | None = None,
    on_epoch=None,
) -> TrainResult:
    """Train with weighted cross-entropy, BPTT, clipping, and Adam.

    Domain stats and class weights are fitted on `train_ds` only (pass them
    in to resume). Shuffling and dropout streams derive from
    (cfg.seed, epoch, batch), so a resumed run replays the identical
    trajectory of an uninterrupted one.
    """
    mcfg = model.config
    if stats is None and mcfg.scheme != "none":
        stats = fit_domain_stats(train_ds)
    if class_weights is None:
        class_weights = median_frequency_weights(train_ds.class_counts)
    normalized = _normalize_all(train_ds, stats, mcfg.scheme, mcfg.bins)
    if optimizer is None:
        optimizer = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    losses = list(prior_losses or [])
    n = len(normalized)
    for epoch in range(start_epoch, cfg.epochs):
        if cfg.shuffle:
            order = derive_rng(cfg.seed, "shuffle", epoch).permutation(n)
        else:
            order = np.arange(n)
        batch_losses = []
        for bi, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo : lo + cfg.batch_size]
            batch = build_batch([normalized[i] for i in idx])
            drop_rng = derive_rng(cfg.seed, "dropout", epoch, bi)
            logits, cache = forward(model, batch, training=True, rng=drop_rng)
            probs = softmax(logits)
            loss, dlogits = weighted_cross_entropy(probs, batch.labels, class_weights)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {bi}")
            grads = backward(model, cache, dlogits)
            gnorm = global_grad_norm(grads)
            if not math.isfinite(gnorm):
                raise TrainingDiverged(
                    f"non-finite gradient norm at epoch {epoch}, batch {bi} (loss {loss:.6g})"
                )
            clip_gradients(grads, cfg.clip_norm)
            optimizer.step(model.params, grads)
            batch_losses.append(loss)
        epoch_loss = float(np.mean(batch_losses))
        losses.append(epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
        if cfg.patience is not None and len(losses) > cfg.patience:
            best_old = min(losses[: -cfg.patience])
            if min(losses[-cfg.patience :]) >= best_old:
                break
    return TrainResult(
        model=model,
        stats=stats,
        class_weights=class_weights,
        epoch_losses=losses,
        optimizer=optimizer,
    )


@dataclass
class EvalReport:
    """Macro accuracy, per-class accuracies, and the confusion matrix.

    confusion[c][k] counts test sequences of true class c predicted as k.
    per_class_accuracy is None for classes absent from the test set; the
    macro average runs over present classes only.
    """

    macro_accuracy: float
    per_class_accuracy: list[float | None]
    confusion: np.ndarray
    n_test: int
    metadata: dict = field(default_factory=dict)

    def check_consistency(self, class_counts=None) -> None:
        row_sums = self.confusion.sum(axis=1)
        assert int(self.confusion.sum()) == self.n_test
        if class_counts is not None:
            assert np.array_equal(row_sums, class_counts)
        accs = []
        for c, acc in enumerate(self.per_class_accuracy):
            if row_sums[c] == 0:
                assert acc is None
            else:
                assert acc == self.confusion[c, c] / row_sums[c]
                accs.append(acc)
        assert self.macro_accuracy == sum(accs) / len(accs)


def classification_report(truths, preds, num_classes: int):
    """(macro accuracy, per-class accuracies, confusion) from raw pairs."""
    truths = np.asarray(truths, dtype=np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (truths, preds), 1)
    row_sums = confusion.sum(axis=1)
    per_class: list[float | None] = []
    present = []
    for c in range(num_classes):
        if row_sums[c] == 0:
            per_class.append(None)
        else:
            acc = confusion[c, c] / row_sums[c]
            per_class.append(float(acc))
            present.append(float(acc))
    macro = sum(present) / len(present)
    return macro, per_class, confusion


def evaluate(
    model: SequenceClassifier,
    test_ds: Dataset,
    stats: DomainStats | None,
    *,
    metadata: dict | None = None,
    batch_size: int = 256,
) -> EvalReport:
    """Inference-mode predictions for every sequence, macro-averaged."""
    mcfg = model.config
    normalized = _normalize_all(test_ds, stats, mcfg.scheme, mcfg.bins)
    preds = np.empty(len(normalized), dtype=np.int64)
    for lo in range(0, len(normalized), batch_size):
        chunk = normalized[lo : lo + batch_size]
        logits, _ = forward(model, build_batch(chunk), training=False)
        preds[lo : lo + len(chunk)] = np.argmax(logits, axis=1)
    truths = np.array([s.label for s in test_ds.sequences], dtype=np.int64)
    macro, per_class, confusion = classification_report(truths, preds, test_ds.num_classes)
    return EvalReport(
        macro_accuracy=macro,
        per_class_accuracy=per_class,
        confusion=confusion,
        n_test=test_ds.n,
        metadata=metadata or {},
    )


# ---------------------------------------------------------------------------
# Experiment grids

ABLATION_CELLS = (
    ("none", "joint_lstm"),
    ("none", "attribute_specific_lstm"),
    ("minmax", "joint_lstm"),
    ("minmax", "attribute_specific_lstm"),
    ("minmax+perseq", "joint_lstm"),
    ("minmax+perseq", "attribute_specific_lstm"),
)

BASELINE_METHODS = (
    "gru_discretized_pripw",
    "gru_discretized_rf",
    "stats_mlp_minmax",
    "stats_mlp_standardize",
    "proposed",
)

DEFAULT_NOISE_FRACTIONS = (0.0, 0.02, 0.04, 0.06, 0.08, 0.10)


@dataclass
class GridResult:
    rows: list[dict]
    summary: list[dict]
    models: dict[str, tuple[SequenceClassifier, DomainStats | None]] = field(default_factory=dict)


def _run_grid_task(payload: dict) -> dict:
    """One grid cell: build, train, evaluate. Top-level for picklability."""
    model_cfg = ModelConfig.from_dict(payload["model_cfg"])
    train_cfg = TrainConfig(**payload["train_cfg"])
    model = build(model_cfg, seed=train_cfg.seed)
    result = train(model, payload["train_ds"], train_cfg)
    report = evaluate(result.model, payload["test_ds"], result.stats)
    out = {
        **payload["row"],
        "seed": train_cfg.seed,
        "macro_accuracy": report.macro_accuracy,
        "n_test": report.n_test,
    }
    if payload.get("return_model"):
        out["model_params"] = result.model.params
        out["model_cfg"] = payload["model_cfg"]
        out["stats"] = result.stats
    return out


def _execute_tasks(payloads: list[dict], jobs: int) -> list[dict]:
    if jobs <= 1:
        return [_run_grid_task(p) for p in payloads]
    ctx = multiprocessing.get_context("spawn")
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as ex:
        return list(ex.map(_run_grid_task, payloads))


def summarize_rows(rows: list[dict], keys: tuple[str, ...]) -> list[dict]:
    """Median macro accuracy per cell, preserving first-seen cell order."""
    groups: dict[tuple, list[float]] = {}
    order: list[tuple] = []
    meta: dict[tuple, dict] = {}
    for row in rows:
        k = tuple(row[f] for f in keys)
        if k not in groups:
            groups[k] = []
            order.append(k)
            meta[k] = {f: row[f] for f in keys}
        groups[k].append(row["macro_accuracy"])
    return [
        {**meta[k], "median_macro_accuracy": float(np.median(groups[k]))} for k in order
    ]


def _collect_models(results: list[dict], keys: tuple[str, ...]) -> dict:
    models = {}
    for row in results:
        if "model_params" in row:
            label = "|".join(str(row[f]) for f in keys) + f"|seed={row['seed']}"
            clf = SequenceClassifier(
                config=ModelConfig.from_dict(row.pop("model_cfg")),
                params=row.pop("model_params"),
            )
            models[label] = (clf, row.pop("stats"))
    return models


def run_ablation(
    train_ds: Dataset,
    test_ds: Dataset,
    base_cfg: ModelConfig,
    train_cfg: TrainConfig,
    seeds: tuple[int, ...] = (0, 1, 2),
    jobs: int = 1,
    return_models: bool = False,
) -> GridResult:
    """The 6-cell normalization x architecture grid, each cell per seed.

    All cells share the same seed list so runs are comparable; the summary
    reports the per-cell median over seeds.
    """
    payloads = []
    for scheme, arch in ABLATION_CELLS:
        cell_cfg = replace(base_cfg, architecture=arch, scheme=scheme)
        for seed in seeds:
            payloads.append(
                {
                    "model_cfg": cell_cfg.to_dict(),
                    "train_cfg": replace(train_cfg, seed=seed).to_dict(),
                    "train_ds": train_ds,
                    "test_ds": test_ds,
                    "row": {"scheme": scheme, "architecture": arch},
                    "return_model": return_models,
                }
            )
    results = _execute_tasks(payloads, jobs)
    models = _collect_models(results, ("scheme", "architecture"))
    summary = summarize_rows(results, ("scheme", "architecture"))
    return GridResult(rows=results, summary=summary, models=models)


def _baseline_cfg(method: str, base_cfg: ModelConfig) -> ModelConfig:
    if method == "gru_discretized_pripw":
        return replace(base_cfg, architecture="gru_discretized", scheme="discretize", gru_use_rf=False)
    if method == "gru_discretized_rf":
        return replace(base_cfg, architecture="gru_discretized", scheme="discretize", gru_use_rf=True)
    if method == "stats_mlp_minmax":
        return replace(base_cfg, architecture="stats_mlp", scheme="minmax")
    if method == "stats_mlp_standardize":
        return replace(base_cfg, architecture="stats_mlp", scheme="standardize")
    if method == "proposed":
        return replace(base_cfg, architecture="attribute_specific_lstm", scheme="minmax+perseq")
    raise ValueError(f"unknown baseline method {method!r}")


def run_baselines(
    train_ds: Dataset,
    test_ds: Dataset,
    base_cfg: ModelConfig,
    train_cfg: TrainConfig,
    seeds: tuple[int, ...] = (0, 1, 2),
    jobs: int = 1,
    return_models: bool = False,
) -> GridResult:
    """Baseline comparison on identical splits and seeds."""
    payloads = []
    for method in BASELINE_METHODS:
        cell_cfg = _baseline_cfg(method, base_cfg)
        for seed in seeds:
            payloads.append(
                {
                    "model_cfg": cell_cfg.to_dict(),
                    "train_cfg": replace(train_cfg, seed=seed).to_dict(),
                    "train_ds": train_ds,
                    "test_ds": test_ds,
                    "row": {"method": method, "scheme": cell_cfg.scheme},
                    "return_model": return_models,
                }
            )
    results = _execute_tasks(payloads, jobs)
    models = _collect_models(results, ("method",))
    summary = summarize_rows(results, ("method", "scheme"))
    return GridResult(rows=results, summary=summary, models=models)


def noise_sweep(
    named_models: list[tuple[str, SequenceClassifier, DomainStats | None]],
    test_ds: Dataset,
    fractions: tuple[float, ...] = DEFAULT_NOISE_FRACTIONS,
    seed: int = 0,
) -> list[dict]:
    """Evaluate each model on noise-perturbed copies of the test set.

    Models stay fixed (trained clean); one fixed noise seed per fraction.
    Fraction 0 reproduces the clean evaluation exactly.
    """
    rows = []
    for k, fraction in enumerate(fractions):
        noisy = add_noise(test_ds, fraction, derive_int(seed, "sweep", k))
        for name, model, stats in named_models:
            report = evaluate(model, noisy, stats)
            rows.append(
                {"model": name, "noise_fraction": fraction, "macro_accuracy": report.macro_accuracy}
            )
    return rows


# ---------------------------------------------------------------------------
# Report writers (all byte-deterministic given identical inputs)


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)  # shortest float64 round-trip form
    return str(v)


def write_rows_csv(rows: list[dict], columns: tuple[str, ...], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row[c]) for c in columns) + "\n")


def write_report_json(report: EvalReport, path) -> None:
    import json

    payload = {
        "macro_accuracy": report.macro_accuracy,
        "per_class_accuracy": report.per_class_accuracy,
        "confusion": report.confusion.tolist(),
        "n_test": report.n_test,
        "metadata": report.metadata,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_confusion_csv(report: EvalReport, path) -> None:
    c = report.confusion.shape[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("truth_class," + ",".join(f"pred_{k}" for k in range(c)) + "\n")
        for row_c in range(c):
            fh.write(f"{row_c}," + ",".join(str(int(v)) for v in report.confusion[row_c]) + "\n")


def write_noise_gnuplot(rows: list[dict], model_name: str, path) -> None:
    """gnuplot-ready two-column curve file for one model."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# noise_fraction macro_accuracy\n")
        for row in rows:
            if row["model"] == model_name:
                fh.write(f"{_fmt_cell(row['noise_fraction'])} {_fmt_cell(row['macro_accuracy'])}\n")

