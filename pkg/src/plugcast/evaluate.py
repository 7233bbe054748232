"""Forecast scoring and residual diagnostics.

The residual convention everywhere is prediction minus actual: a negative
residual means the forecast fell below the observed plug-in count. Point
metrics (RMSE, MAE, MAPE) score each split; residual summaries and per-day
breakdowns describe how the test errors are distributed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, UndefinedStatisticError
from .features import FeatureMatrix
from .series import PluginSeries

DAY_NAMES = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")

SPLIT_ORDER = ("train", "validation", "test")

GROUP_KEYS = ("dow", "month", "hour")


def residuals(predictions, actuals) -> np.ndarray:
    """Prediction minus actual, elementwise."""
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise DataError(f"shape mismatch: predictions {p.shape}, actuals {a.shape}")
    return p - a


@dataclass(frozen=True)
class MetricSet:
    rmse: float
    mae: float
    mape_pct: float  # NaN when every actual is zero
    n: int
    n_skipped_zero_actual: int

    def as_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "mape_pct": None if math.isnan(self.mape_pct) else self.mape_pct,
            "n": self.n,
            "n_skipped_zero_actual": self.n_skipped_zero_actual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSet":
        return cls(
            rmse=d["rmse"],
            mae=d["mae"],
            mape_pct=float("nan") if d["mape_pct"] is None else d["mape_pct"],
            n=d["n"],
            n_skipped_zero_actual=d["n_skipped_zero_actual"],
        )


def compute_metrics(predictions, actuals) -> MetricSet:
    """RMSE, MAE, and MAPE of a prediction vector.

    MAPE skips steps whose actual is zero and reports how many were
    skipped; with no nonzero actual at all it is NaN (undefined), while
    rmse and mae are still returned.
    """
    r = residuals(predictions, actuals)
    if len(r) == 0:
        raise DataError("cannot score an empty prediction vector")
    a = np.asarray(actuals, dtype=float)
    rmse = float(np.sqrt(np.mean(r * r)))
    mae = float(np.mean(np.abs(r)))
    nonzero = a != 0
    n_skipped = int(len(a) - nonzero.sum())
    if n_skipped == len(a):
        mape = float("nan")
    else:
        mape = float(100.0 * np.mean(np.abs(r[nonzero]) / np.abs(a[nonzero])))
    return MetricSet(rmse=rmse, mae=mae, mape_pct=mape, n=len(a), n_skipped_zero_actual=n_skipped)


@dataclass(frozen=True)
class ResidualStats:
    mean: float
    median: float
    std: float  # population (divide by n)
    value_range: float
    iqr: float
    n: int

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "std": self.std,
            "range": self.value_range,
            "iqr": self.iqr,
            "n": self.n,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResidualStats":
        return cls(
            mean=d["mean"], median=d["median"], std=d["std"],
            value_range=d["range"], iqr=d["iqr"], n=d["n"],
        )


def residual_stats(values) -> ResidualStats:
    """Location and spread of a residual vector.

    Median averages the middle two for even n; quartiles use linear
    interpolation; std divides by n, not n-1.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) == 0:
        raise DataError("residual_stats needs a non-empty vector")
    q1, q3 = np.percentile(v, [25, 75])
    return ResidualStats(
        mean=float(np.mean(v)),
        median=float(np.median(v)),
        std=float(np.std(v)),
        value_range=float(np.max(v) - np.min(v)),
        iqr=float(q3 - q1),
        n=len(v),
    )


# ---------------------------------------------------------------------------
# correlation
# ---------------------------------------------------------------------------

def pearson(x, y) -> float:
    """Product-moment correlation; raises when either side has no variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("pearson needs two equal-length vectors")
    if len(x) < 2:
        raise UndefinedStatisticError("correlation needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise UndefinedStatisticError("correlation undefined for a constant vector")
    return float((dx @ dy) / math.sqrt(sx * sy))


def average_ranks(x) -> np.ndarray:
    """1-based ranks, ties sharing the mean of their positions."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("spearman needs two equal-length vectors")
    if len(x) < 2:
        raise UndefinedStatisticError("correlation needs at least two points")
    return pearson(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class DayCorrelation:
    dow: int
    day_name: str
    n_pairs: int
    pearson: float | None  # None when undefined (no pairs or no variance)
    spearman: float | None


def lag_correlation_by_day(series: PluginSeries) -> list[DayCorrelation]:
    """Per day of week: correlation with the same half hour one day before.

    Pairs whose target step is masked are excluded; the day-before value is
    used as stored even when that step is masked. Days with fewer than two
    usable pairs, or without variation, come back with None correlations.
    """
    if series.resolution != "half-hour":
        raise DataError("day-lag correlation expects the half-hourly series")
    if int((~series.mask).sum()) < 2 * 7 * 48:
        raise DataError("need at least two weeks of unmasked data")
    dow, _, _ = series.calendar_fields()
    values = series.values.astype(float)
    out = []
    for d in range(7):
        idx = np.flatnonzero((dow == d) & ~series.mask)
        idx = idx[idx >= 48]
        x = values[idx]
        w = values[idx - 48]
        try:
            pe = pearson(x, w)
            sp = spearman(x, w)
        except UndefinedStatisticError:
            pe = sp = None
        out.append(DayCorrelation(d, DAY_NAMES[d], len(idx), pe, sp))
    return out


# ---------------------------------------------------------------------------
# grouped distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupStats:
    n: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def as_dict(self) -> dict:
        return {
            "n": self.n, "min": self.minimum, "q1": self.q1,
            "median": self.median, "q3": self.q3, "max": self.maximum,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupStats":
        return cls(
            n=d["n"], minimum=d["min"], q1=d["q1"],
            median=d["median"], q3=d["q3"], maximum=d["max"],
        )


def _five_numbers(v: np.ndarray) -> GroupStats:
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return GroupStats(
        n=len(v), minimum=float(np.min(v)), q1=float(q1),
        median=float(med), q3=float(q3), maximum=float(np.max(v)),
    )


@dataclass(frozen=True)
class GroupedDistribution:
    """Five-number summaries keyed by an integer calendar label."""

    key: str  # "dow" | "month" | "hour"
    groups: dict  # label -> GroupStats, only labels with data present

    def labels(self) -> list[int]:
        return sorted(self.groups)

    def as_dict(self) -> dict:
        return {
            "key": self.key,
            "groups": {str(k): v.as_dict() for k, v in sorted(self.groups.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupedDistribution":
        return cls(
            key=d["key"],
            groups={int(k): GroupStats.from_dict(v) for k, v in d["groups"].items()},
        )


def group_values(values: np.ndarray, labels: np.ndarray, key: str) -> GroupedDistribution:
    """Five-number summary of ``values`` per distinct label."""
    if key not in GROUP_KEYS:
        raise ValueError(f"unknown grouping key {key!r}")
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    if len(values) == 0:
        raise DataError("nothing to group")
    groups = {
        int(label): _five_numbers(values[labels == label])
        for label in np.unique(labels)
    }
    return GroupedDistribution(key=key, groups=groups)


def grouped_distribution(series: PluginSeries, key: str) -> GroupedDistribution:
    """Distribution of unmasked plug-in counts by dow, month, or hour."""
    if key not in GROUP_KEYS:
        raise ValueError(f"unknown grouping key {key!r}")
    dow, month, hour = series.calendar_fields()
    labels = {"dow": dow, "month": month, "hour": hour}[key]
    keep = ~series.mask
    if not keep.any():
        raise DataError("every step is masked; nothing to group")
    return group_values(series.values[keep].astype(float), labels[keep], key)


# ---------------------------------------------------------------------------
# exogenous series
# ---------------------------------------------------------------------------

def _fill_interior_nans(values: np.ndarray) -> np.ndarray:
    """Linear interpolation across interior gaps; edge gaps stay NaN."""
    v = np.asarray(values, dtype=float).copy()
    ok = np.isfinite(v)
    if ok.sum() < 2:
        raise DataError("exogenous series needs at least two finite values")
    pos = np.arange(len(v))
    first, last = pos[ok][0], pos[ok][-1]
    inner = slice(first, last + 1)
    v[inner] = np.interp(pos[inner], pos[ok], v[ok])
    return v


def exogenous_correlation(
    series: PluginSeries,
    exo_timestamps,
    exo_values,
) -> tuple[float, float, int]:
    """Correlate unmasked counts with an aligned exogenous series.

    Join is by exact timestamp; interior exogenous gaps are linearly
    interpolated first, leading and trailing gaps are dropped. Returns
    (pearson, spearman, n_pairs).
    """
    exo_timestamps = list(exo_timestamps)
    filled = _fill_interior_nans(exo_values)
    if len(exo_timestamps) != len(filled):
        raise DataError("exogenous timestamps and values differ in length")
    lookup = {ts: i for i, ts in enumerate(exo_timestamps)}
    xs, ys = [], []
    ts = series.start
    for i in range(len(series)):
        j = lookup.get(ts)
        if j is not None and not series.mask[i] and np.isfinite(filled[j]):
            xs.append(float(series.values[i]))
            ys.append(filled[j])
        ts += series.step
    if len(xs) < 2:
        raise DataError("fewer than two joined exogenous observations")
    x = np.array(xs)
    y = np.array(ys)
    return pearson(x, y), spearman(x, y), len(xs)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class EvaluationReport:
    model_order: list
    metrics: dict  # label -> split -> MetricSet
    residual_stats: dict  # label -> ResidualStats (test split)
    residuals_by_day: dict  # label -> GroupedDistribution of test residuals

    def as_dict(self) -> dict:
        return {
            "models": list(self.model_order),
            "metrics": {
                label: {split: ms.as_dict() for split, ms in by_split.items()}
                for label, by_split in self.metrics.items()
            },
            "residual_stats": {
                label: rs.as_dict() for label, rs in self.residual_stats.items()
            },
            "residuals_by_day": {
                label: gd.as_dict() for label, gd in self.residuals_by_day.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(
            model_order=list(d["models"]),
            metrics={
                label: {split: MetricSet.from_dict(ms) for split, ms in by_split.items()}
                for label, by_split in d["metrics"].items()
            },
            residual_stats={
                label: ResidualStats.from_dict(rs)
                for label, rs in d["residual_stats"].items()
            },
            residuals_by_day={
                label: GroupedDistribution.from_dict(gd)
                for label, gd in d["residuals_by_day"].items()
            },
        )


def floor_predictions(predictions: np.ndarray) -> np.ndarray:
    """Conservative post-processing: floor to whole counts, never below 0."""
    return np.maximum(np.floor(np.asarray(predictions, dtype=float)), 0.0)


def build_report(
    models,
    matrix: FeatureMatrix,
    floor: bool = False,
) -> EvaluationReport:
    """Score each model on every split of an already-partitioned matrix.

    Test-split residuals additionally get summary statistics and a per-day
    five-number breakdown. ``floor`` applies the integer flooring step to
    every prediction before scoring.
    """
    if not matrix.has_split():
        raise DataError("matrix rows carry no split labels; run split_rows first")
    order = []
    metrics: dict = {}
    stats: dict = {}
    by_day: dict = {}
    for model in models:
        label = model.label
        if label in metrics:
            raise DataError(f"duplicate model label {label!r}")
        order.append(label)
        metrics[label] = {}
        for split in SPLIT_ORDER:
            idx = matrix.indices_of(split)
            if len(idx) == 0:
                raise DataError(f"split {split!r} is empty")
            preds = np.asarray(model.predict_rows(matrix, idx), dtype=float)
            if floor:
                preds = floor_predictions(preds)
            actual = matrix.targets[idx]
            metrics[label][split] = compute_metrics(preds, actual)
            if split == "test":
                r = residuals(preds, actual)
                stats[label] = residual_stats(r)
                by_day[label] = group_values(r, matrix.dow[idx], "dow")
    return EvaluationReport(
        model_order=order, metrics=metrics,
        residual_stats=stats, residuals_by_day=by_day,
    )


# ---------------------------------------------------------------------------
# delimited writers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def write_metrics_csv(report: EvaluationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "split", "n", "rmse", "mae", "mape_pct", "n_skipped_zero_actual"])
        for label in report.model_order:
            for split in SPLIT_ORDER:
                ms = report.metrics[label][split]
                writer.writerow(
                    [label, split, ms.n, _fmt(ms.rmse), _fmt(ms.mae),
                     _fmt(ms.mape_pct), ms.n_skipped_zero_actual]
                )


def write_residual_stats_csv(report: EvaluationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "n", "mean", "median", "std", "range", "iqr"])
        for label in report.model_order:
            rs = report.residual_stats[label]
            writer.writerow(
                [label, rs.n, _fmt(rs.mean), _fmt(rs.median), _fmt(rs.std),
                 _fmt(rs.value_range), _fmt(rs.iqr)]
            )


def write_grouped_csv(dist: GroupedDistribution, path: str | Path, label_names=None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([dist.key, "label", "n", "min", "q1", "median", "q3", "max"])
        for k in dist.labels():
            g = dist.groups[k]
            name = label_names[k] if label_names else str(k)
            writer.writerow(
                [k, name, g.n, _fmt(g.minimum), _fmt(g.q1), _fmt(g.median),
                 _fmt(g.q3), _fmt(g.maximum)]
            )


def write_residuals_by_day_csv(report: EvaluationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "dow", "day", "n", "min", "q1", "median", "q3", "max"])
        for label in report.model_order:
            dist = report.residuals_by_day[label]
            for k in dist.labels():
                g = dist.groups[k]
                writer.writerow(
                    [label, k, DAY_NAMES[k], g.n, _fmt(g.minimum), _fmt(g.q1),
                     _fmt(g.median), _fmt(g.q3), _fmt(g.maximum)]
                )


def write_lag_correlation_csv(rows: list[DayCorrelation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dow", "day", "n_pairs", "pearson", "spearman"])
        for row in rows:
            writer.writerow(
                [row.dow, row.day_name, row.n_pairs, _fmt(row.pearson), _fmt(row.spearman)]
            )
