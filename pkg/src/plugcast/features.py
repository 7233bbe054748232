"""Supervised rows from a half-hourly series.

Each row pairs a target step with calendar-lagged values of the same
series (defaults: one day, three days, one week at half-hour resolution)
plus the target's day of week, month, and hour. Masked steps never become
targets, but their values may be read through the lag window; that is the
point of masking instead of deleting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataError, InsufficientHistoryError
from .series import PluginSeries

DEFAULT_LAGS = (48, 144, 336)

SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class FeatureSpec:
    """Which lags and categorical encodings a model consumes."""

    lags: tuple = DEFAULT_LAGS
    use_dow: bool = False
    use_month: bool = False
    use_hour: bool = False

    def __post_init__(self):
        lags = tuple(int(l) for l in self.lags)
        if not lags:
            raise ValueError("at least one lag required")
        if any(l <= 0 for l in lags):
            raise ValueError("lags must be positive")
        if any(b >= a for a, b in zip(lags[1:], lags)):
            raise ValueError("lags must be strictly increasing")
        object.__setattr__(self, "lags", lags)

    @classmethod
    def for_variant(cls, variant: str) -> "FeatureSpec":
        """v1: lags + day of week; v2 adds month; v3 adds hour of day."""
        flags = {
            "v1": (True, False, False),
            "v2": (True, True, False),
            "v3": (True, True, True),
        }
        if variant not in flags:
            raise ValueError(f"unknown variant {variant!r}")
        dow, month, hour = flags[variant]
        return cls(lags=DEFAULT_LAGS, use_dow=dow, use_month=month, use_hour=hour)

    @property
    def input_width(self) -> int:
        return (
            len(self.lags)
            + (7 if self.use_dow else 0)
            + (12 if self.use_month else 0)
            + (24 if self.use_hour else 0)
        )

    def as_dict(self) -> dict:
        return {
            "lags": list(self.lags),
            "use_dow": self.use_dow,
            "use_month": self.use_month,
            "use_hour": self.use_hour,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(
            lags=tuple(d["lags"]),
            use_dow=bool(d["use_dow"]),
            use_month=bool(d["use_month"]),
            use_hour=bool(d["use_hour"]),
        )


def one_hot(index: int, size: int) -> np.ndarray:
    """Unit vector of length size with a one at index."""
    if not 0 <= index < size:
        raise ValueError(f"index {index} outside [0, {size})")
    v = np.zeros(size)
    v[index] = 1.0
    return v


@dataclass
class FeatureMatrix:
    """Row-aligned arrays; split labels are empty strings until assigned."""

    spec: FeatureSpec
    timestamps: list
    targets: np.ndarray
    lag_values: np.ndarray
    dow: np.ndarray
    month: np.ndarray
    hour: np.ndarray
    split: np.ndarray = field(default=None)

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float)
        self.lag_values = np.asarray(self.lag_values, dtype=float)
        self.dow = np.asarray(self.dow, dtype=np.int64)
        self.month = np.asarray(self.month, dtype=np.int64)
        self.hour = np.asarray(self.hour, dtype=np.int64)
        n = len(self.targets)
        if self.lag_values.shape != (n, len(self.spec.lags)):
            raise ValueError("lag_values shape does not match targets and spec")
        for name, arr in (("dow", self.dow), ("month", self.month), ("hour", self.hour)):
            if len(arr) != n:
                raise ValueError(f"{name} length does not match targets")
        if len(self.timestamps) != n:
            raise ValueError("timestamps length does not match targets")
        if self.split is None:
            self.split = np.full(n, "", dtype="<U10")
        else:
            self.split = np.asarray(self.split, dtype="<U10")
            if len(self.split) != n:
                raise ValueError("split length does not match targets")

    def __len__(self) -> int:
        return len(self.targets)

    def indices_of(self, split_name: str) -> np.ndarray:
        if split_name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {split_name!r}")
        return np.flatnonzero(self.split == split_name)

    def has_split(self) -> bool:
        return bool(np.all(np.isin(self.split, SPLIT_NAMES))) and len(self) > 0

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            lag_cols = [f"lag_{l}" for l in self.spec.lags]
            writer.writerow(["timestamp", "target", *lag_cols, "dow", "month", "hour", "split"])
            for i in range(len(self)):
                writer.writerow(
                    [
                        self.timestamps[i].isoformat(),
                        repr(float(self.targets[i])),
                        *[repr(float(v)) for v in self.lag_values[i]],
                        int(self.dow[i]),
                        int(self.month[i]),
                        int(self.hour[i]),
                        self.split[i],
                    ]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureMatrix":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[0] != "timestamp" or header[1] != "target":
                raise DataError(f"{path}: not a feature matrix file")
            lag_cols = [h for h in header if h.startswith("lag_")]
            lags = tuple(int(h[4:]) for h in lag_cols)
            stamps, targets, lag_rows, dow, month, hour, split = [], [], [], [], [], [], []
            for row in reader:
                if not row:
                    continue
                stamps.append(datetime.fromisoformat(row[0]))
                targets.append(float(row[1]))
                lag_rows.append([float(v) for v in row[2 : 2 + len(lags)]])
                dow.append(int(row[2 + len(lags)]))
                month.append(int(row[3 + len(lags)]))
                hour.append(int(row[4 + len(lags)]))
                split.append(row[5 + len(lags)])
        return cls(
            spec=FeatureSpec(lags=lags),
            timestamps=stamps,
            targets=np.array(targets),
            lag_values=np.array(lag_rows).reshape(len(targets), len(lags)),
            dow=dow,
            month=month,
            hour=hour,
            split=split,
        )


def build_matrix(series: PluginSeries, spec: FeatureSpec = FeatureSpec()) -> FeatureMatrix:
    """One row per unmasked step with full lag history.

    Steps earlier than max(lags) have no complete history and produce no
    row; a series shorter than max(lags) cannot produce any row at all and
    raises. Lag values are read from the raw series, masked or not.
    """
    if series.resolution != "half-hour":
        raise DataError("feature rows are built from the half-hourly series")
    max_lag = max(spec.lags)
    if len(series) < max_lag:
        raise InsufficientHistoryError(
            f"series has {len(series)} steps, lags need {max_lag}"
        )
    idx = np.arange(max_lag, len(series))
    idx = idx[~series.mask[idx]]
    values = series.values.astype(float)
    lag_values = np.column_stack([values[idx - l] for l in spec.lags]) if len(idx) else \
        np.empty((0, len(spec.lags)))
    dow_all, month_all, hour_all = series.calendar_fields()
    return FeatureMatrix(
        spec=spec,
        timestamps=[series.timestamp(int(i)) for i in idx],
        targets=values[idx],
        lag_values=lag_values,
        dow=dow_all[idx],
        month=month_all[idx],
        hour=hour_all[idx],
    )


def split_rows(
    matrix: FeatureMatrix,
    ratios: tuple = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> FeatureMatrix:
    """Assign shuffled train/validation/test labels.

    Row order is untouched; only labels move. Sizes are floor(r*n) for
    train and validation, remainder test. The shuffle uses numpy's
    default_rng (PCG64) seeded with ``seed``, so a split is reproducible
    from (matrix, ratios, seed) alone.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three non-negative numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios sum to {sum(ratios)}, expected 1")
    n = len(matrix)
    if n < 10:
        raise DataError(f"need at least 10 rows to split, have {n}")
    n_train = int(ratios[0] * n)
    n_val = int(ratios[1] * n)
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.full(n, "", dtype="<U10")
    labels[perm[:n_train]] = "train"
    labels[perm[n_train : n_train + n_val]] = "validation"
    labels[perm[n_train + n_val :]] = "test"
    return replace(matrix, split=labels)


def lag_scaler(matrix: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-lag mean and standard deviation over the training rows only.

    A zero deviation falls back to 1 so constant columns pass through
    centered instead of dividing by zero.
    """
    idx = matrix.indices_of("train")
    if len(idx) == 0:
        raise DataError("no training rows to compute scaling statistics from")
    sub = matrix.lag_values[idx]
    means = sub.mean(axis=0)
    stds = sub.std(axis=0)
    stds = np.where(stds == 0, 1.0, stds)
    return means, stds
