"""Per-day linear model on calendar lags.

One least-squares fit per day of week, no intercept, lags unscaled: the
prediction is a weighted blend of the same half hour one day, three days,
and one week earlier, with weights specific to the target's day of week.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, FitError
from ..features import FeatureMatrix

DAY_NAMES = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")

MIN_ROWS_PER_DAY = 3


@dataclass
class GlmModel:
    lags: tuple
    coefficients: np.ndarray  # (7, len(lags)), row per day of week

    family = "glm"
    label = "glm"

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (7, len(self.lags)):
            raise ValueError(
                f"coefficients shape {self.coefficients.shape} does not match lags"
            )

    def predict_rows(self, matrix: FeatureMatrix, indices: np.ndarray) -> np.ndarray:
        if tuple(matrix.spec.lags) != tuple(self.lags):
            raise DataError(
                f"matrix lags {matrix.spec.lags} differ from model lags {self.lags}"
            )
        rows = np.asarray(indices, dtype=np.int64)
        coef = self.coefficients[matrix.dow[rows]]
        return np.einsum("ij,ij->i", matrix.lag_values[rows], coef)


def fit_glm(matrix: FeatureMatrix, split: str = "train") -> GlmModel:
    """Fit the seven per-day weight vectors on one split.

    Solved with an orthogonal decomposition (lstsq). Any day of week with
    fewer rows than coefficients, or with linearly dependent lag columns,
    cannot be identified and raises a FitError naming the day.
    """
    idx = matrix.indices_of(split)
    if len(idx) == 0:
        raise FitError(f"no rows in split {split!r}")
    n_lags = len(matrix.spec.lags)
    coefficients = np.zeros((7, n_lags))
    for d in range(7):
        rows = idx[matrix.dow[idx] == d]
        if len(rows) < max(MIN_ROWS_PER_DAY, n_lags):
            raise FitError(
                f"{DAY_NAMES[d]}: {len(rows)} rows, need at least "
                f"{max(MIN_ROWS_PER_DAY, n_lags)}"
            )
        X = matrix.lag_values[rows]
        y = matrix.targets[rows]
        beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < n_lags:
            raise FitError(f"{DAY_NAMES[d]}: lag columns are rank deficient")
        coefficients[d] = beta
    return GlmModel(lags=tuple(matrix.spec.lags), coefficients=coefficients)
