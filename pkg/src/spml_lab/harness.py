"""Training loop, pseudo-label lifecycle, multi-seed experiments and the
K/tau sweep.

Early stopping watches standard single-label top-1 accuracy on the
validation set and keeps the parameters from the best epoch. Pseudo-labels
are generated once before training unless refresh_epochs is set, in which
case they are regenerated from the current model's penultimate-layer
features every refresh_epochs epochs.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import losses, metrics, mlp, pseudo
from .data import DatasetManifest, load_manifest
from .errors import ConfigError, NumericalError
from .linalg import AdamState, RandomSource, adam_step

PSEUDO_MODES = ("none", "instance", "class_cooc", "ideal")


@dataclass
class ExperimentConfig:
    train_manifest: str
    val_manifest: str
    test_manifest: str
    loss: str = "an"
    k: int = 15
    tau: float = 0.1
    pseudo_mode: str = "none"
    similarity: str = "cosine"
    cooc_threshold: float = 0.5
    refresh_epochs: int | None = None
    batch_size: int = 64
    lr: float = 5e-6
    hidden_dim: int = 1024
    patience: int = 20
    max_epochs: int = 200
    seeds: list[int] = field(default_factory=lambda: [0])
    report_best_per_metric: bool = False

    def __post_init__(self):
        if self.pseudo_mode not in PSEUDO_MODES:
            raise ConfigError(f"pseudo_mode must be one of {PSEUDO_MODES}, "
                              f"got {self.pseudo_mode!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.refresh_epochs is not None and self.refresh_epochs < 1:
            raise ConfigError("refresh_epochs must be >= 1 when set")
        spec = losses.parse_loss_spec(self.loss)
        if spec.needs_pseudo and self.pseudo_mode == "none":
            raise ConfigError(
                f"loss {spec.kind!r} requires a pseudo mode other than 'none'")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        base = Path(path).parent
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        known = set(cls.__dataclass_fields__)
        bad = set(raw) - known
        if bad:
            raise ConfigError(f"{path}: unknown config fields {sorted(bad)}")
        missing = {"train_manifest", "val_manifest", "test_manifest"} - set(raw)
        if missing:
            raise ConfigError(f"{path}: missing config fields {sorted(missing)}")
        cfg = cls(**raw)
        # manifest paths resolve relative to the config file
        for attr in ("train_manifest", "val_manifest", "test_manifest"):
            cfg_path = Path(getattr(cfg, attr))
            if not cfg_path.is_absolute():
                setattr(cfg, attr, str(base / cfg_path))
        return cfg

    def snapshot(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    params: mlp.MlpParams
    best_epoch: int
    best_val_top1: float
    val_trace: list[float]
    pseudo_sets: list[pseudo.PseudoLabelSet]


def make_pseudo_sets(config: ExperimentConfig, train_manifest: DatasetManifest,
                     features: np.ndarray,
                     test_manifest: DatasetManifest | None = None,
                     ) -> list[pseudo.PseudoLabelSet]:
    """Build pseudo-label sets for the training set in the configured mode."""
    labels = train_manifest.single_labels()
    if config.pseudo_mode == "none":
        return [pseudo.PseudoLabelSet(instance_id=i, single_label=int(y),
                                      labels=set())
                for i, y in enumerate(labels)]
    if config.pseudo_mode == "instance":
        index = pseudo.build_index(features, config.similarity)
        return pseudo.instance_pseudo_labels(index, labels, config.k, config.tau)
    if config.pseudo_mode == "class_cooc":
        if test_manifest is None:
            raise ConfigError("class_cooc pseudo mode needs a manifest with "
                              "multi-label annotations")
        table = pseudo.CooccurrenceTable.from_label_sets(
            test_manifest.label_sets(), test_manifest.num_classes)
        per_class = pseudo.class_pseudo_labels(table, config.cooc_threshold)
        return pseudo.assign_class_pseudo_labels(per_class, labels)
    # ideal
    return pseudo.ideal_pseudo_labels(train_manifest.multi_label_sets(), labels)


def _val_top1(params: mlp.MlpParams, features: np.ndarray,
              labels: np.ndarray) -> float:
    conf = mlp.forward(params, features).confidences
    return float((np.argmax(conf, axis=1) == labels).mean())


def train(config: ExperimentConfig, seed: int,
          train_manifest: DatasetManifest | None = None,
          val_manifest: DatasetManifest | None = None,
          test_manifest: DatasetManifest | None = None) -> TrainResult:
    """Train one model; deterministic given (config, seed)."""
    train_manifest = train_manifest or load_manifest(config.train_manifest)
    val_manifest = val_manifest or load_manifest(config.val_manifest)
    if config.pseudo_mode == "class_cooc" and test_manifest is None:
        test_manifest = load_manifest(config.test_manifest)

    x_train = train_manifest.load_features()
    y_train = train_manifest.single_labels()
    x_val = val_manifest.load_features()
    y_val = val_manifest.single_labels()
    n, d = x_train.shape
    c = train_manifest.num_classes
    spec = losses.parse_loss_spec(config.loss)

    rng = RandomSource(seed)
    params = mlp.init_params(rng, d, config.hidden_dim, c)
    flat = params.flat()
    adam = AdamState.init(flat.size, lr=config.lr)

    pseudo_sets = make_pseudo_sets(config, train_manifest, x_train,
                                   test_manifest)
    pseudo_by_id = [ps.labels for ps in pseudo_sets]

    best_params = params.copy()
    best_epoch = -1
    best_val = -np.inf
    trace: list[float] = []

    for epoch in range(config.max_epochs):
        if (config.refresh_epochs and epoch > 0
                and epoch % config.refresh_epochs == 0
                and config.pseudo_mode == "instance"):
            penultimate = mlp.forward(params, x_train).a2
            pseudo_sets = make_pseudo_sets(config, train_manifest,
                                           penultimate, test_manifest)
            pseudo_by_id = [ps.labels for ps in pseudo_sets]

        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            cache = mlp.forward(params, x_train[idx])
            inp = losses.LossInput(
                confidences=cache.confidences,
                single_labels=y_train[idx],
                pseudo_sets=[pseudo_by_id[int(i)] for i in idx])
            value, grad_conf = losses.compute_loss(spec, inp)
            if not np.isfinite(value):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}")
            grads = mlp.backward(cache, params, grad_conf)
            flat, adam = adam_step(adam, params.flat(), grads.flat())
            params = mlp.MlpParams.from_flat(flat, d, config.hidden_dim, c)

        val_acc = _val_top1(params, x_val, y_val)
        trace.append(val_acc)
        if val_acc > best_val:
            best_val = val_acc
            best_epoch = epoch
            best_params = params.copy()
        elif epoch - best_epoch >= config.patience:
            break

    if best_epoch < 0:  # zero-epoch run
        best_params = params.copy()
        best_epoch = 0
        best_val = float("nan")
    return TrainResult(params=best_params, best_epoch=best_epoch,
                       best_val_top1=best_val, val_trace=trace,
                       pseudo_sets=pseudo_sets)


def evaluate(params: mlp.MlpParams,
             test_manifest: DatasetManifest) -> metrics.MetricsReport:
    features = test_manifest.load_features()
    conf = mlp.forward(params, features).confidences
    gt = metrics.EvalSet(test_manifest.label_sets(), test_manifest.num_classes)
    return metrics.compute_report(conf, gt)


AGGREGATE_FIELDS = ("top_set_ml", "top1_ml", "iou_acc", "f1", "map",
                    "avg_predicted_positives")


@dataclass
class RunResult:
    config: dict
    per_seed: list[dict]
    aggregate: dict

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "per_seed": self.per_seed,
                           "aggregate": self.aggregate},
                          sort_keys=True, indent=2)


def aggregate_reports(reports: list[metrics.MetricsReport],
                      best_per_metric: bool = False) -> dict:
    out = {}
    for name in AGGREGATE_FIELDS:
        vals = np.array([getattr(r, name) for r in reports])
        entry = {"mean": float(vals.mean()),
                 "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0}
        if best_per_metric:
            entry["best"] = float(vals.max())
        out[name] = entry
    out["reporting"] = ("mean over seeds; 'best' is the per-metric max "
                        "across seeds" if best_per_metric
                        else "mean over seeds at each seed's "
                             "best-validation checkpoint")
    return out


def run_experiment(config: ExperimentConfig, verbose: bool = False) -> RunResult:
    """Train and evaluate once per seed; aggregate mean +- sample std."""
    train_m = load_manifest(config.train_manifest)
    val_m = load_manifest(config.val_manifest)
    test_m = load_manifest(config.test_manifest)
    per_seed, reports = [], []
    for seed in config.seeds:
        t0 = time.monotonic()
        result = train(config, seed, train_m, val_m, test_m)
        report = evaluate(result.params, test_m)
        if verbose:
            print(f"seed {seed}: best epoch {result.best_epoch}, "
                  f"val top-1 {result.best_val_top1:.4f}, "
                  f"{time.monotonic() - t0:.1f}s", file=sys.stderr)
        reports.append(report)
        rep_dict = report.to_dict()
        rep_dict.pop("per_class_ap")  # keep reports compact
        per_seed.append({"seed": seed, "best_epoch": result.best_epoch,
                         "val_trace": result.val_trace,
                         "metrics": rep_dict})
    return RunResult(config=config.snapshot(), per_seed=per_seed,
                     aggregate=aggregate_reports(
                         reports, config.report_best_per_metric))


def sweep(config: ExperimentConfig, k_values: list[int],
          tau_values: list[float], verbose: bool = False
          ) -> dict[tuple[int, float], RunResult]:
    """One run_experiment per (K, tau) pair."""
    results = {}
    for tau in tau_values:
        for k in k_values:
            cell = ExperimentConfig(**{**config.snapshot(),
                                       "k": k, "tau": tau})
            if verbose:
                print(f"sweep cell K={k}, tau={tau}", file=sys.stderr)
            results[(k, tau)] = run_experiment(cell, verbose=verbose)
    return results


def format_sweep_table(results: dict[tuple[int, float], RunResult],
                       k_values: list[int], tau_values: list[float],
                       metric: str = "f1") -> str:
    """Grid of mean metric values: tau rows, K columns."""
    header = ["tau/K"] + [str(k) for k in k_values]
    lines = ["  ".join(f"{h:>8}" for h in header)]
    for tau in tau_values:
        cells = [f"{tau:>8.2f}"]
        for k in k_values:
            mean = results[(k, tau)].aggregate[metric]["mean"]
            cells.append(f"{mean:8.4f}")
        lines.append("  ".join(cells))
    return "\n".join(lines)


def sweep_to_json(results: dict[tuple[int, float], RunResult]) -> str:
    payload = [{"k": k, "tau": tau, "aggregate": res.aggregate}
               for (k, tau), res in sorted(results.items())]
    return json.dumps(payload, sort_keys=True, indent=2)
