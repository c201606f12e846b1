"""Experiment protocol: outer k-fold CV with an inner threshold-tuning loop.

For tunable methods, each outer fold first splits its training rows into
nine stratified sub-folds, the first three forming the inner validation set
and the remaining six the inner training set.  Every candidate threshold
trains a fresh ensemble-plus-templates model on the inner training rows
(phi coefficients included) and is scored on the inner validation rows with
the configured tuning metric; a strictly better score wins, so the earliest
grid value takes ties.  The selected threshold is then retrained on the full
training partition and evaluated on the held-out fold.

Seeds derive from the root seed through fixed purpose codes, so methods
sharing a root seed share their fold plans and final ensembles, and adding
a method to a benchmark never perturbs existing cells.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .chains import decision_profiles, train_br, train_ebr, train_ecc, predict_br
from .correlation import phi_matrix
from .datasets import FoldPlan, MultiLabelDataset, diversity, plan_folds
from .fusion import FusionModel, fit_dt, fit_stack, fit_uddt, fuse_batch
from .metrics import METRIC_NAMES, MetricReport, aggregate, tuning_score

DEFAULT_PHI_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
TUNING_METRICS = ("accuracy", "f1", "subset_accuracy", "hamming_loss")

# seed purpose codes
_OUTER_PLAN = 101
_ENSEMBLE = 102
_TUNE_PLAN = 103
_TUNE_ENSEMBLE = 104
_STACK = 105

_INNER_FOLDS = 9
_INNER_VALIDATION_FOLDS = 3


@dataclass(frozen=True)
class MethodSpec:
    name: str
    family: str  # "ecc" | "ebr" | "br"
    scheme: str | None  # fusion scheme, None for plain binary relevance
    tunable: bool


METHOD_SPECS = {
    spec.name: spec
    for spec in (
        MethodSpec("MVECC", "ecc", "MV", False),
        MethodSpec("MEECC", "ecc", "ME", False),
        MethodSpec("DTECC", "ecc", "DT", False),
        MethodSpec("UDDTECC", "ecc", "UDDT", True),
        MethodSpec("STACKECC", "ecc", "STACK", False),
        MethodSpec("BR", "br", None, False),
        MethodSpec("EBR", "ebr", "MV", False),
        MethodSpec("UDDTEBR", "ebr", "UDDT", True),
    )
}
METHOD_NAMES = tuple(METHOD_SPECS)


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    ensemble_size: int = 50
    threshold: float = 0.5
    phi_grid: tuple[float, ...] = DEFAULT_PHI_GRID
    outer_folds: int = 10
    seed: int = 0
    tuning_metric: str = "accuracy"

    def __post_init__(self):
        if self.method not in METHOD_SPECS:
            raise ValueError(
                f"unknown method {self.method!r}; expected one of {METHOD_NAMES}"
            )
        if self.ensemble_size < 1:
            raise ValueError("ensemble size must be at least 1")
        if self.outer_folds < 2:
            raise ValueError("outer fold count must be at least 2")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must lie in (0, 1]")
        if self.tuning_metric not in METRIC_NAMES:
            raise ValueError(f"unknown tuning metric {self.tuning_metric!r}")
        grid = tuple(float(v) for v in self.phi_grid)
        object.__setattr__(self, "phi_grid", grid)
        if self.spec.tunable:
            if not grid:
                raise ValueError("tunable methods need a non-empty phi grid")
            if any(not 0.0 <= v <= 1.0 for v in grid):
                raise ValueError("phi grid values must lie in [0, 1]")

    @property
    def spec(self) -> MethodSpec:
        return METHOD_SPECS[self.method]


@dataclass(frozen=True)
class PerformanceMatrix:
    """Per-fold metric reports plus the tuning choices that produced them."""

    reports: tuple[MetricReport, ...]
    chosen_phi: tuple[float | None, ...]
    plan: FoldPlan
    predictions: tuple[np.ndarray, ...] | None = None

    @property
    def k(self) -> int:
        return len(self.reports)

    def fold_values(self, metric: str) -> np.ndarray:
        return np.array([r[metric] for r in self.reports])

    def mean(self, metric: str) -> float:
        return float(self.fold_values(metric).mean())

    def std(self, metric: str) -> float:
        return float(self.fold_values(metric).std())

    def means(self) -> MetricReport:
        return MetricReport(**{m: self.mean(m) for m in METRIC_NAMES})

    def stds(self) -> MetricReport:
        return MetricReport(**{m: self.std(m) for m in METRIC_NAMES})


# ---------------------------------------------------------------------------
# Seed derivation
# ---------------------------------------------------------------------------


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from integer parts (splittable counter scheme)."""
    state = np.random.SeedSequence(entropy=[int(p) for p in parts]).generate_state(
        1, np.uint64
    )
    return int(state[0])


def cell_seed(root_seed: int, dataset_name: str, method: str) -> int:
    """Per-cell seed: a new method or dataset never perturbs existing cells."""
    digest = hashlib.sha256(f"{dataset_name}\x00{method}".encode()).digest()
    return derive_seed(root_seed, int.from_bytes(digest[:8], "big"))


def outer_plan_seed(seed: int) -> int:
    return derive_seed(seed, _OUTER_PLAN)


def ensemble_seed(seed: int, fold: int) -> int:
    return derive_seed(seed, fold, _ENSEMBLE)


# ---------------------------------------------------------------------------
# Model fitting / prediction for one fold
# ---------------------------------------------------------------------------


@dataclass
class FittedMethod:
    spec: MethodSpec
    base: object  # EnsembleModel or BRModel
    fusion: FusionModel | None


def _train_base(train_ds: MultiLabelDataset, cfg: ExperimentConfig, seed: int):
    family = cfg.spec.family
    if family == "ecc":
        return train_ecc(train_ds, cfg.ensemble_size, seed)
    if family == "ebr":
        return train_ebr(train_ds, cfg.ensemble_size, seed)
    return train_br(train_ds, seed)


def _fit_method(
    train_ds: MultiLabelDataset,
    cfg: ExperimentConfig,
    base_seed: int,
    stack_seed: int,
    phi_t: float | None,
) -> FittedMethod:
    spec = cfg.spec
    base = _train_base(train_ds, cfg, base_seed)
    if spec.scheme is None:
        return FittedMethod(spec, base, None)
    if spec.scheme in ("MV", "ME"):
        fusion = FusionModel(scheme=spec.scheme, threshold=cfg.threshold)
    elif spec.scheme == "DT":
        supports, _ = decision_profiles(base, train_ds.features)
        fusion = FusionModel(scheme="DT", templates=fit_dt(supports, train_ds.labels))
    elif spec.scheme == "UDDT":
        if phi_t is None:
            raise ValueError("UDDT fitting needs a phi threshold")
        pm = phi_matrix(train_ds)
        supports, _ = decision_profiles(base, train_ds.features)
        fusion = FusionModel(
            scheme="UDDT",
            templates=fit_uddt(supports, train_ds.labels, pm, phi_t),
            phi_t=float(phi_t),
        )
    else:  # STACK
        fusion = fit_stack(train_ds, base, stack_seed)
    return FittedMethod(spec, base, fusion)


def _predict_method(fitted: FittedMethod, rows: np.ndarray) -> np.ndarray:
    if fitted.fusion is None:
        _, hard = predict_br(fitted.base, rows)
        return hard
    supports, hard = decision_profiles(fitted.base, rows)
    return fuse_batch(fitted.fusion, supports, hard)


# ---------------------------------------------------------------------------
# Inner tuning loop
# ---------------------------------------------------------------------------


def inner_split(
    train_ds: MultiLabelDataset, cfg: ExperimentConfig, fold: int
) -> tuple[np.ndarray, np.ndarray]:
    """(inner_train_idx, inner_val_idx) within the fold's training partition.

    Nine stratified sub-folds; sub-folds 0-2 form the inner validation set.
    """
    plan = plan_folds(train_ds, _INNER_FOLDS, derive_seed(cfg.seed, fold, _TUNE_PLAN))
    val_mask = plan.assignment < _INNER_VALIDATION_FOLDS
    return np.flatnonzero(~val_mask), np.flatnonzero(val_mask)


def tune_phi(
    train_ds: MultiLabelDataset, cfg: ExperimentConfig, fold: int = 0
) -> tuple[float, list[float | None]]:
    """Grid-search the phi threshold on an inner train/validation split.

    Returns the winning threshold and the per-grid-value scores (loss
    metrics already negated).  A single-point grid is returned directly
    without training, since no comparison is possible.
    """
    if not cfg.spec.tunable:
        raise ValueError(f"method {cfg.method} does not tune a phi threshold")
    grid = cfg.phi_grid
    if len(grid) == 1:
        return grid[0], [None]
    if train_ds.n_instances < _INNER_FOLDS:
        raise ValueError(
            f"tuning needs at least {_INNER_FOLDS} training rows, "
            f"got {train_ds.n_instances}"
        )
    inner_train_idx, inner_val_idx = inner_split(train_ds, cfg, fold)
    inner_train = train_ds.subset(inner_train_idx)
    inner_val_X = train_ds.features[inner_val_idx]
    inner_val_y = train_ds.labels[inner_val_idx]

    tune_seed = derive_seed(cfg.seed, fold, _TUNE_ENSEMBLE)
    stack_seed = derive_seed(cfg.seed, fold, _STACK)
    best_phi: float | None = None
    best_score = -np.inf
    scores: list[float | None] = []
    for candidate in grid:
        fitted = _fit_method(inner_train, cfg, tune_seed, stack_seed, candidate)
        preds = _predict_method(fitted, inner_val_X)
        score = tuning_score(aggregate(inner_val_y, preds), cfg.tuning_metric)
        scores.append(score)
        if score > best_score:  # strict: earliest grid value wins ties
            best_score = score
            best_phi = candidate
    return float(best_phi), scores


# ---------------------------------------------------------------------------
# Outer cross-validation
# ---------------------------------------------------------------------------


def outer_folds(ds: MultiLabelDataset, cfg: ExperimentConfig) -> FoldPlan:
    return plan_folds(ds, cfg.outer_folds, outer_plan_seed(cfg.seed))


def _run_fold(
    ds: MultiLabelDataset,
    plan: FoldPlan,
    fold: int,
    cfg: ExperimentConfig,
    keep_predictions: bool,
):
    train_idx = plan.train_indices(fold)
    test_idx = plan.test_indices(fold)
    train_ds = ds.subset(train_idx)
    chosen_phi: float | None = None
    if cfg.spec.tunable:
        chosen_phi, _ = tune_phi(train_ds, cfg, fold)
    fitted = _fit_method(
        train_ds,
        cfg,
        ensemble_seed(cfg.seed, fold),
        derive_seed(cfg.seed, fold, _STACK),
        chosen_phi,
    )
    predictions = _predict_method(fitted, ds.features[test_idx])
    report = aggregate(ds.labels[test_idx], predictions)
    return report, chosen_phi, predictions if keep_predictions else None


def model_performance(
    ds: MultiLabelDataset,
    cfg: ExperimentConfig,
    keep_predictions: bool = False,
    jobs: int = 1,
) -> PerformanceMatrix:
    """Outer k-fold evaluation of one method; deterministic for a fixed seed.

    Each fold tunes (tunable methods only), retrains on all k-1 training
    folds with the selected threshold, and evaluates on the held-out fold.
    """
    plan = outer_folds(ds, cfg)
    folds = range(cfg.outer_folds)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    _run_fold_task,
                    [(ds, plan, fold, cfg, keep_predictions) for fold in folds],
                )
            )
    else:
        results = [_run_fold(ds, plan, fold, cfg, keep_predictions) for fold in folds]
    reports = tuple(r[0] for r in results)
    chosen = tuple(r[1] for r in results)
    preds = tuple(r[2] for r in results) if keep_predictions else None
    return PerformanceMatrix(
        reports=reports, chosen_phi=chosen, plan=plan, predictions=preds
    )


def _run_fold_task(args):
    return _run_fold(*args)


# ---------------------------------------------------------------------------
# Benchmark driver
# ---------------------------------------------------------------------------


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def cell_row(
    dataset_name: str, ds: MultiLabelDataset, cfg: ExperimentConfig, pm: PerformanceMatrix
) -> dict:
    return {
        "dataset": dataset_name,
        "method": cfg.method,
        "seed": cfg.seed,
        "tuning_metric": cfg.tuning_metric,
        "diversity": diversity(ds),
        "chosen_phi": [None if p is None else float(p) for p in pm.chosen_phi],
        "metrics": {
            name: {
                "mean": pm.mean(name),
                "std": pm.std(name),
                "folds": pm.fold_values(name).tolist(),
            }
            for name in METRIC_NAMES
        },
        "status": "ok",
    }


def load_result_rows(jsonl_path: Path) -> list[dict]:
    rows = []
    if jsonl_path.exists():
        for line in jsonl_path.read_text().splitlines():
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_results_csv(rows: list[dict], csv_path: Path) -> None:
    """One CSV row per (dataset, method, metric); fold lists are ;-joined."""
    fields = [
        "dataset",
        "method",
        "metric",
        "mean",
        "std",
        "fold_values",
        "chosen_phi_t",
        "diversity",
        "seed",
        "tuning_metric",
    ]
    with csv_path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            if row.get("status") != "ok":
                continue
            if all(p is None for p in row["chosen_phi"]):
                phi_cell = ""
            else:
                phi_cell = ";".join(
                    "" if p is None else repr(float(p)) for p in row["chosen_phi"]
                )
            for metric in METRIC_NAMES:
                cell = row["metrics"][metric]
                writer.writerow(
                    {
                        "dataset": row["dataset"],
                        "method": row["method"],
                        "metric": metric,
                        "mean": repr(float(cell["mean"])),
                        "std": repr(float(cell["std"])),
                        "fold_values": ";".join(repr(float(v)) for v in cell["folds"]),
                        "chosen_phi_t": phi_cell,
                        "diversity": repr(float(row["diversity"])),
                        "seed": row["seed"],
                        "tuning_metric": row["tuning_metric"],
                    }
                )


def run_experiment(
    datasets,
    methods,
    base_cfg: ExperimentConfig,
    out_dir: Path,
    resume: bool = True,
    jobs: int = 1,
    progress=None,
) -> list[dict]:
    """Run the dataset x method grid, emitting one JSONL row per cell.

    ``datasets`` is a sequence of ``(name, dataset_or_loader)`` pairs; a
    loader is any zero-argument callable, and its failures are recorded in
    the cell row instead of aborting the run.  Completed cells found in an
    existing ``results.jsonl`` are skipped, so interrupted runs resume.
    Every cell reseeds from (root seed, dataset, method).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jsonl_path = out_dir / "results.jsonl"
    rows = load_result_rows(jsonl_path) if resume else []
    done = {(r["dataset"], r["method"]) for r in rows if r.get("status") == "ok"}
    rows = [r for r in rows if (r["dataset"], r["method"]) in done]

    with jsonl_path.open("a" if resume else "w") as sink:
        for dataset_name, source in datasets:
            loaded: MultiLabelDataset | None = None
            load_error: str | None = None
            for method in methods:
                if (dataset_name, method) in done:
                    continue
                if loaded is None and load_error is None:
                    try:
                        loaded = source() if callable(source) else source
                    except Exception as exc:  # per-cell reporting, keep going
                        load_error = f"{type(exc).__name__}: {exc}"
                cfg = replace(
                    base_cfg,
                    method=method,
                    seed=cell_seed(base_cfg.seed, dataset_name, method),
                )
                if load_error is not None:
                    row = {
                        "dataset": dataset_name,
                        "method": method,
                        "status": "error",
                        "error": load_error,
                    }
                else:
                    try:
                        pm = model_performance(loaded, cfg, jobs=jobs)
                        row = cell_row(dataset_name, loaded, cfg, pm)
                    except Exception as exc:
                        row = {
                            "dataset": dataset_name,
                            "method": method,
                            "status": "error",
                            "error": f"{type(exc).__name__}: {exc}",
                        }
                rows.append(row)
                sink.write(json.dumps(row, sort_keys=True, default=_json_default) + "\n")
                sink.flush()
                if progress is not None:
                    progress(row)
    write_results_csv(rows, out_dir / "results.csv")
    return rows
