"""Cross-validated trade-off evaluation, sensitivity sweeps, and reports.

Folds are assigned by round-robin over a seeded shuffle, each fold fits
its own normalizer on its training side, and the optimizer runs per fold;
held-out changes are measured with the training normalizer and the fold's
optimal weights.  A revenue-threshold sweep reuses each fold's grid
evaluation, which is threshold-independent, so sweeping many thresholds
costs little more than one cross-validation run.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .auction import allocate
from .errors import ConfigError, ValidationError
from .metrics import (
    METRIC_NAMES,
    NUM_METRICS,
    MetricMatrix,
    apply_normalizer,
    assemble_raw,
    fit_normalizer,
)
from .optimize import (
    ChangeVector,
    GridEvaluation,
    OptimizationResult,
    TradeoffConfig,
    changes,
    evaluate_grid,
    optimize_from_evaluation,
)
from .rerank import WeightVector, rank_scores, select
from .simulate import SimulatedImpression
from .storage import write_csv, write_json, write_jsonl


def impressions_to_matrices(
    impressions: Sequence[SimulatedImpression],
) -> list[MetricMatrix]:
    """Run every impression's auction and assemble its raw metric matrix."""
    matrices = []
    for imp in impressions:
        allocation = allocate(imp.auction)
        matrices.append(
            assemble_raw(imp.auction, allocation, imp.records_by_advertiser())
        )
    return matrices


def assign_folds(n_items: int, k: int, seed: int) -> np.ndarray:
    """Fold index per item: round-robin over a seeded shuffle.

    Every item lands in exactly one fold and fold sizes differ by at most
    one, so the folds partition the set.
    """
    if k < 2:
        raise ConfigError(f"fold count must be >= 2, got {k}")
    if n_items < k:
        raise ConfigError(f"need at least {k} items for {k} folds, got {n_items}")
    order = np.random.default_rng(seed).permutation(n_items)
    fold_of = np.empty(n_items, dtype=int)
    fold_of[order] = np.arange(n_items) % k
    return fold_of


@dataclass(frozen=True)
class FoldReport:
    """One fold's optimum and its measured changes on both sides.

    Held-out changes are reported as observed: they may fall outside the
    thresholds (``test_within_bounds`` False) without failing the run,
    since only training changes are constrained.
    """

    fold: int
    n_train: int
    n_test: int
    infeasible: bool
    weights: WeightVector | None = None
    train_changes: ChangeVector | None = None
    test_changes: ChangeVector | None = None
    train_objective: float | None = None
    test_objective: float | None = None
    test_within_bounds: bool | None = None

    def to_dict(self) -> dict:
        return {
            "row": "fold",
            "fold": self.fold,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "infeasible": self.infeasible,
            "weights": list(self.weights.weights) if self.weights else None,
            "train_changes": list(self.train_changes.xi) if self.train_changes else None,
            "test_changes": list(self.test_changes.xi) if self.test_changes else None,
            "train_objective": self.train_objective,
            "test_objective": self.test_objective,
            "test_within_bounds": self.test_within_bounds,
        }


@dataclass(frozen=True)
class SummaryStats:
    """Mean or standard deviation across the feasible folds."""

    weights: np.ndarray
    train_xi: np.ndarray
    test_xi: np.ndarray
    train_objective: float
    test_objective: float

    def to_dict(self, label: str) -> dict:
        return {
            "row": label,
            "weights": list(self.weights),
            "train_changes": list(self.train_xi),
            "test_changes": list(self.test_xi),
            "train_objective": self.train_objective,
            "test_objective": self.test_objective,
        }


@dataclass(frozen=True)
class CrossValidationReport:
    folds: tuple[FoldReport, ...]
    mean: SummaryStats | None
    std: SummaryStats | None
    infeasible_count: int
    theta: tuple[float, ...]
    grid_step: float
    k: int
    seed: int


def _summarize(folds: Sequence[FoldReport]) -> tuple[SummaryStats | None, SummaryStats | None]:
    usable = [f for f in folds if not f.infeasible]
    if not usable:
        return None, None
    weights = np.array([f.weights.as_array() for f in usable])
    train_xi = np.array([f.train_changes.as_array() for f in usable])
    test_xi = np.array([f.test_changes.as_array() for f in usable])
    train_obj = np.array([f.train_objective for f in usable])
    test_obj = np.array([f.test_objective for f in usable])

    def stats(reduce):
        return SummaryStats(
            weights=reduce(weights),
            train_xi=reduce(train_xi),
            test_xi=reduce(test_xi),
            train_objective=float(reduce(train_obj)),
            test_objective=float(reduce(test_obj)),
        )

    mean = stats(lambda a: np.mean(a, axis=0))
    if len(usable) >= 2:
        std = stats(lambda a: np.std(a, axis=0, ddof=1))
    else:
        std = stats(lambda a: np.full(np.shape(np.mean(a, axis=0)), np.nan))
    return mean, std


def _test_side(
    test: Sequence[MetricMatrix],
    result: OptimizationResult,
    config: TradeoffConfig,
) -> tuple[ChangeVector, float, bool]:
    weights = result.weights
    picks = [select(m, weights) for m in test]
    cv = changes(test, picks)
    scores = np.array([rank_scores(m, weights)[s] for m, s in zip(test, picks)])
    return cv, float(np.sum(scores)), cv.satisfies(config.theta)


def _fold_report(
    fold: int,
    result: OptimizationResult,
    test: Sequence[MetricMatrix],
    n_train: int,
    config: TradeoffConfig,
) -> FoldReport:
    if result.infeasible:
        return FoldReport(
            fold=fold, n_train=n_train, n_test=len(test), infeasible=True
        )
    test_cv, test_obj, within = _test_side(test, result, config)
    return FoldReport(
        fold=fold,
        n_train=n_train,
        n_test=len(test),
        infeasible=False,
        weights=result.weights,
        train_changes=result.train_changes,
        test_changes=test_cv,
        train_objective=result.objective,
        test_objective=test_obj,
        test_within_bounds=within,
    )


def _fold_split(
    matrices: Sequence[MetricMatrix], fold_of: np.ndarray, fold: int
) -> tuple[list[MetricMatrix], list[MetricMatrix]]:
    train_raw = [m for m, f in zip(matrices, fold_of) if f != fold]
    test_raw = [m for m, f in zip(matrices, fold_of) if f == fold]
    norm = fit_normalizer(train_raw)
    return (
        [apply_normalizer(norm, m) for m in train_raw],
        [apply_normalizer(norm, m) for m in test_raw],
    )


def cross_validate(
    impressions: Sequence[SimulatedImpression],
    config: TradeoffConfig,
    k: int = 10,
    seed: int = 0,
) -> CrossValidationReport:
    """k-fold evaluation of the constrained weight search.

    Args:
        impressions: The full dataset.
        config: Thresholds and grid step, shared by all folds.
        k: Fold count; each impression is held out exactly once.
        seed: Shuffle seed for fold assignment.

    Returns:
        Per-fold reports plus mean and sample-std rows over the feasible
        folds; infeasible folds are counted and excluded from the summary.
    """
    matrices = impressions_to_matrices(impressions)
    fold_of = assign_folds(len(matrices), k, seed)
    folds = []
    for fold in range(k):
        train, test = _fold_split(matrices, fold_of, fold)
        result = optimize_from_evaluation(
            evaluate_grid(train, config.grid_step), config
        )
        folds.append(_fold_report(fold, result, test, len(train), config))
    mean, std = _summarize(folds)
    return CrossValidationReport(
        folds=tuple(folds),
        mean=mean,
        std=std,
        infeasible_count=sum(f.infeasible for f in folds),
        theta=config.theta,
        grid_step=config.grid_step,
        k=k,
        seed=seed,
    )


@dataclass(frozen=True)
class SweepPoint:
    """All folds' outcomes under one revenue threshold."""

    theta1: float
    folds: tuple[FoldReport, ...]
    infeasible_count: int

    def _mean_over_feasible(self, attr: str) -> float:
        vals = [getattr(f, attr) for f in self.folds if not f.infeasible]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def train_objective_mean(self) -> float:
        return self._mean_over_feasible("train_objective")

    @property
    def test_objective_mean(self) -> float:
        return self._mean_over_feasible("test_objective")

    def mean_changes(self, side: str) -> np.ndarray:
        rows = [
            getattr(f, f"{side}_changes").as_array()
            for f in self.folds
            if not f.infeasible
        ]
        if not rows:
            return np.full(NUM_METRICS, np.nan)
        return np.mean(np.array(rows), axis=0)

    def to_dict(self) -> dict:
        return {
            "theta1": self.theta1,
            "infeasible_count": self.infeasible_count,
            "folds": [f.to_dict() for f in self.folds],
        }


def sweep_theta1(
    impressions: Sequence[SimulatedImpression],
    config: TradeoffConfig,
    theta1_values: Sequence[float],
    k: int = 10,
    seed: int = 0,
) -> list[SweepPoint]:
    """Cross-validate under a strictly decreasing series of revenue caps.

    Folds, normalizers, and grid evaluations are computed once and shared
    across thresholds; only the feasibility filter changes per point, so
    results across thresholds are exactly comparable.
    """
    values = [float(t) for t in theta1_values]
    if not values:
        raise ConfigError("sweep needs at least one threshold value")
    if any(not -1.0 <= t <= 0.0 for t in values):
        raise ConfigError(f"sweep thresholds must lie in [-1, 0], got {values}")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep thresholds must be strictly decreasing")
    matrices = impressions_to_matrices(impressions)
    fold_of = assign_folds(len(matrices), k, seed)
    per_theta: dict[float, list[FoldReport]] = {t: [] for t in values}
    for fold in range(k):
        train, test = _fold_split(matrices, fold_of, fold)
        evaluation = evaluate_grid(train, config.grid_step)
        for theta1 in values:
            cfg = config.with_theta1(theta1)
            result = optimize_from_evaluation(evaluation, cfg)
            per_theta[theta1].append(
                _fold_report(fold, result, test, len(train), cfg)
            )
    return [
        SweepPoint(
            theta1=t,
            folds=tuple(per_theta[t]),
            infeasible_count=sum(f.infeasible for f in per_theta[t]),
        )
        for t in values
    ]


@dataclass(frozen=True)
class CorrelationReport:
    """Pairwise linear correlations of the raw metrics on ground truths.

    Entries are NaN where a metric is constant over the dataset, in which
    case its correlation is undefined and reported as such.
    """

    n: int
    matrix: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "metrics": list(METRIC_NAMES),
            "matrix": [list(row) for row in self.matrix],
        }


def correlation_report(
    impressions: Sequence[SimulatedImpression],
) -> CorrelationReport:
    """Correlate the six raw metrics over the ground-truth ads."""
    if len(impressions) < 2:
        raise ValidationError("correlation needs at least 2 impressions")
    matrices = impressions_to_matrices(impressions)
    data = np.array([m.raw[m.ground_truth_index] for m in matrices])
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(data, rowvar=False)
    return CorrelationReport(n=len(impressions), matrix=corr)


# ---------------------------------------------------------------------------
# Report files


def _xi_cells(cv: ChangeVector | np.ndarray | None) -> list:
    if cv is None:
        return [None] * NUM_METRICS
    arr = cv.as_array() if isinstance(cv, ChangeVector) else np.asarray(cv)
    return [float(v) for v in arr]


def _weight_cells(w: WeightVector | np.ndarray | None) -> list:
    if w is None:
        return [None] * NUM_METRICS
    arr = w.as_array() if isinstance(w, WeightVector) else np.asarray(w)
    return [float(v) for v in arr]


FOLD_CSV_HEADER = (
    ["fold", "n_train", "n_test", "infeasible"]
    + [f"omega_{i}" for i in range(1, 7)]
    + [f"train_xi_{i}" for i in range(1, 7)]
    + [f"test_xi_{i}" for i in range(1, 7)]
    + ["train_objective", "test_objective", "test_within_bounds"]
)


def _fold_row(f: FoldReport) -> list:
    return (
        [f.fold + 1, f.n_train, f.n_test, f.infeasible]
        + _weight_cells(f.weights)
        + _xi_cells(f.train_changes)
        + _xi_cells(f.test_changes)
        + [f.train_objective, f.test_objective, f.test_within_bounds]
    )


def _summary_row(label: str, s: SummaryStats | None) -> list:
    if s is None:
        return [label] + [None] * (len(FOLD_CSV_HEADER) - 1)
    return (
        [label, None, None, None]
        + _weight_cells(s.weights)
        + _xi_cells(s.train_xi)
        + _xi_cells(s.test_xi)
        + [s.train_objective, s.test_objective, None]
    )


def write_fold_report(report: CrossValidationReport, out_dir: str | Path) -> None:
    """Emit folds.jsonl and its CSV mirror: one row per fold, then Mean, Std."""
    out = Path(out_dir)
    lines = [f.to_dict() for f in report.folds]
    if report.mean is not None:
        lines.append(report.mean.to_dict("mean"))
        lines.append(report.std.to_dict("std"))
    lines.append(
        {
            "row": "config",
            "theta": list(report.theta),
            "grid_step": report.grid_step,
            "k": report.k,
            "seed": report.seed,
            "infeasible_count": report.infeasible_count,
        }
    )
    write_jsonl(out / "folds.jsonl", lines)
    rows = [_fold_row(f) for f in report.folds]
    rows.append(_summary_row("Mean", report.mean))
    rows.append(_summary_row("Std", report.std))
    write_csv(out / "folds.csv", FOLD_CSV_HEADER, rows)


SWEEP_CSV_HEADER = (
    ["theta1", "fold", "infeasible"]
    + [f"omega_{i}" for i in range(1, 7)]
    + [f"train_xi_{i}" for i in range(1, 7)]
    + [f"test_xi_{i}" for i in range(1, 7)]
    + ["train_objective", "test_objective"]
)


def write_sweep_report(points: Sequence[SweepPoint], out_dir: str | Path) -> None:
    """Emit sweep.jsonl (one point per line) and a flat per-fold CSV mirror."""
    out = Path(out_dir)
    write_jsonl(out / "sweep.jsonl", (p.to_dict() for p in points))
    rows = []
    for p in points:
        for f in p.folds:
            rows.append(
                [p.theta1, f.fold + 1, f.infeasible]
                + _weight_cells(f.weights)
                + _xi_cells(f.train_changes)
                + _xi_cells(f.test_changes)
                + [f.train_objective, f.test_objective]
            )
    write_csv(out / "sweep.csv", SWEEP_CSV_HEADER, rows)


def write_correlation_report(report: CorrelationReport, out_dir: str | Path) -> None:
    """Emit correlation.json and a CSV mirror of the 6x6 matrix."""
    out = Path(out_dir)
    write_json(out / "correlation.json", report.to_dict())
    rows = [
        [name] + [report.matrix[i, j] for j in range(NUM_METRICS)]
        for i, name in enumerate(METRIC_NAMES)
    ]
    write_csv(out / "correlation.csv", ["metric"] + list(METRIC_NAMES), rows)
