"""Seasonal persistence baseline.

The prediction for a step is the value observed at the most recent step of
the matching kind: ordinary days and Sundays copy the same half hour of the
previous day, Mondays reach back three days to the preceding Friday
(skipping the weekend), and Saturdays reach back a full week to the
preceding Saturday.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError, InsufficientHistoryError
from ..features import FeatureMatrix
from ..series import PluginSeries

# Half-hour steps back from the target, keyed by target day of week
# (Monday = 0).
OFFSET_BY_DOW = {0: 144, 1: 48, 2: 48, 3: 48, 4: 48, 5: 336, 6: 48}

MAX_OFFSET = max(OFFSET_BY_DOW.values())


def persistence_offset(dow: int) -> int:
    if dow not in OFFSET_BY_DOW:
        raise ValueError(f"day of week {dow} outside 0..6")
    return OFFSET_BY_DOW[dow]


def persistence_predict(series: PluginSeries, target_step: int) -> float:
    """Copy the reference value for one target step of a half-hourly series."""
    if series.resolution != "half-hour":
        raise DataError("persistence operates on the half-hourly series")
    if not 0 <= target_step < len(series):
        raise IndexError(f"target step {target_step} outside series")
    if target_step < MAX_OFFSET:
        raise InsufficientHistoryError(
            f"step {target_step} has less than {MAX_OFFSET} steps of history"
        )
    offset = persistence_offset(series.timestamp(target_step).weekday())
    return float(series.values[target_step - offset])


class PersistenceModel:
    """Matrix-facing wrapper so the baseline evaluates like a fitted model."""

    family = "persistence"
    label = "persistence"

    def __init__(self, lags=(48, 144, 336)):
        self.lags = tuple(lags)
        missing = [o for o in set(OFFSET_BY_DOW.values()) if o not in self.lags]
        if missing:
            raise DataError(f"matrix lags {self.lags} lack persistence offsets {missing}")

    def predict_rows(self, matrix: FeatureMatrix, indices: np.ndarray) -> np.ndarray:
        col = {lag: j for j, lag in enumerate(matrix.spec.lags)}
        missing = [o for o in set(OFFSET_BY_DOW.values()) if o not in col]
        if missing:
            raise DataError(f"matrix lacks lag columns {missing} needed for persistence")
        cols = np.array([col[OFFSET_BY_DOW[d]] for d in range(7)])
        rows = np.asarray(indices, dtype=np.int64)
        return matrix.lag_values[rows, cols[matrix.dow[rows]]]
