"""Plug-in count series: aggregation, resampling, exclusions, stationarity.

The pipeline turns charging events into a minutely occupancy count
(half-open intervals, so a session occupies [start, end)), then collapses
each half hour to its minimum. Unreliable stretches (warm-up days, holidays,
the trailing weeks) are masked rather than deleted so that calendar lags
stay aligned; masked steps keep their true values and may serve as lag
inputs, but never as prediction targets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    DataError,
    DegenerateSeriesError,
)
from .ingest import ChargingEvent

RESOLUTION_STEP = {
    "minute": timedelta(minutes=1),
    "half-hour": timedelta(minutes=30),
}

# Constant-only asymptotic critical values for the unit-root t statistic.
ADF_CRITICAL_VALUES = {"1%": -3.43, "5%": -2.86, "10%": -2.57}


@dataclass
class PluginSeries:
    """Regularly spaced count series with an exclusion mask."""

    start: datetime
    resolution: str
    values: np.ndarray
    mask: np.ndarray = field(default=None)  # True = excluded

    def __post_init__(self):
        if self.resolution not in RESOLUTION_STEP:
            raise ValueError(f"unknown resolution {self.resolution!r}")
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if self.mask is None:
            self.mask = np.zeros(len(self.values), dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if len(self.mask) != len(self.values):
            raise ValueError("mask and values lengths differ")
        if np.any(self.values < 0):
            raise ValueError("negative plug-in count")
        step = RESOLUTION_STEP[self.resolution]
        if (self.start - datetime.min) % step != timedelta(0):
            raise ValueError(f"start {self.start} not aligned to {self.resolution} grid")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def step(self) -> timedelta:
        return RESOLUTION_STEP[self.resolution]

    @property
    def end(self) -> datetime:
        return self.start + len(self) * self.step

    def timestamp(self, i: int) -> datetime:
        return self.start + i * self.step

    def timestamps(self) -> list[datetime]:
        return [self.start + i * self.step for i in range(len(self))]

    def unmasked_values(self) -> np.ndarray:
        return self.values[~self.mask]

    def to_csv(self, path: str | Path) -> None:
        """Write timestamp/value/excluded rows; round-trips losslessly."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "value", "excluded"])
            ts = self.start
            step = self.step
            for v, m in zip(self.values.tolist(), self.mask.tolist()):
                writer.writerow([ts.isoformat(), v, "true" if m else "false"])
                ts += step

    @classmethod
    def from_csv(cls, path: str | Path) -> "PluginSeries":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:3]] != ["timestamp", "value", "excluded"]:
                raise DataError(f"{path}: not a plug-in series file")
            stamps: list[datetime] = []
            values: list[int] = []
            mask: list[bool] = []
            for row in reader:
                if not row:
                    continue
                stamps.append(datetime.fromisoformat(row[0]))
                values.append(int(row[1]))
                mask.append(row[2].strip().lower() in ("true", "1"))
        if len(stamps) < 2:
            raise DataError(f"{path}: need at least two rows to infer resolution")
        step = stamps[1] - stamps[0]
        resolution = next(
            (name for name, s in RESOLUTION_STEP.items() if s == step), None
        )
        if resolution is None:
            raise DataError(f"{path}: unsupported step {step}")
        for i in range(1, len(stamps)):
            if stamps[i] - stamps[i - 1] != step:
                raise DataError(f"{path}: irregular spacing at row {i + 1}")
        return cls(start=stamps[0], resolution=resolution, values=values, mask=mask)

    def calendar_fields(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-step (day-of-week, month, hour) arrays; Monday is 0."""
        dow = np.empty(len(self), dtype=np.int64)
        month = np.empty(len(self), dtype=np.int64)
        hour = np.empty(len(self), dtype=np.int64)
        ts = self.start
        step = self.step
        for i in range(len(self)):
            dow[i] = ts.weekday()
            month[i] = ts.month
            hour[i] = ts.hour
            ts += step
        return dow, month, hour


def _minute_index(anchor: datetime, t: datetime, round_up: bool) -> int:
    seconds = int((t - anchor).total_seconds())
    if round_up:
        return -((-seconds) // 60)
    return seconds // 60


def occupancy_range(
    event: ChargingEvent, window_start: datetime, window_end: datetime
) -> range:
    """Minute indices (relative to window_start) the event occupies.

    The session occupies the half-open interval [start, end), so a grid
    minute m counts when event.start <= m < event.end. The result is the
    sparse indicator: a contiguous index range, empty for zero-duration
    events or sessions entirely outside the window.
    """
    n = _minute_index(window_start, window_end, round_up=False)
    lo = max(0, _minute_index(window_start, event.start, round_up=True))
    hi = min(n, _minute_index(window_start, event.end, round_up=True))
    return range(lo, max(lo, hi))


def aggregate_events(
    events: Iterable[ChargingEvent],
    window_start: datetime,
    window_end: datetime,
) -> PluginSeries:
    """Sum per-event minute indicators into a minutely occupancy series."""
    if window_end <= window_start:
        raise DataError("window end must be after window start")
    for t in (window_start, window_end):
        if t.second or t.microsecond:
            raise AlignmentError(f"window bound {t} is not minute-aligned")
    n = _minute_index(window_start, window_end, round_up=False)
    values = np.zeros(n, dtype=np.int64)
    for event in events:
        r = occupancy_range(event, window_start, window_end)
        if len(r):
            values[r.start : r.stop] += 1
    return PluginSeries(start=window_start, resolution="minute", values=values)


def resample_half_hourly_min(series: PluginSeries) -> PluginSeries:
    """Collapse each half hour of a minutely series to its minimum.

    The input must start on a half-hour boundary and cover whole half
    hours. A resampled step inherits exclusion if any of its minutes were
    excluded.
    """
    if series.resolution != "minute":
        raise AlignmentError("resampling expects a minutely series")
    if series.start.minute % 30 or series.start.second:
        raise AlignmentError(f"series start {series.start} not on a half-hour boundary")
    if len(series) % 30:
        raise AlignmentError(f"series length {len(series)} not a multiple of 30")
    values = series.values.reshape(-1, 30).min(axis=1)
    mask = series.mask.reshape(-1, 30).any(axis=1)
    return PluginSeries(
        start=series.start, resolution="half-hour", values=values, mask=mask
    )


@dataclass(frozen=True)
class ExclusionConfig:
    """What to mask: leading warm-up, trailing stretch, holiday dates."""

    drop_first: timedelta = timedelta(days=7)
    drop_last: timedelta = timedelta(days=14)
    holidays: frozenset = frozenset()

    def __post_init__(self):
        if self.drop_first < timedelta(0) or self.drop_last < timedelta(0):
            raise ValueError("exclusion spans must be non-negative")
        object.__setattr__(self, "holidays", frozenset(self.holidays))
        for day in self.holidays:
            if not isinstance(day, date) or isinstance(day, datetime):
                raise ValueError(f"holiday {day!r} is not a date")


def apply_exclusions(series: PluginSeries, config: ExclusionConfig) -> PluginSeries:
    """Mask leading/trailing stretches and holidays; values are untouched.

    Masking is additive and idempotent: existing exclusions stay set.
    """
    mask = series.mask.copy()
    n = len(series)
    step = series.step

    head = min(n, math.ceil(config.drop_first / step))
    mask[:head] = True
    tail = min(n, math.ceil(config.drop_last / step))
    if tail:
        mask[n - tail :] = True

    if config.holidays:
        day = series.start.date()
        last = (series.end - timedelta(microseconds=1)).date()
        while day <= last:
            if day in config.holidays:
                day_start = datetime.combine(day, datetime.min.time())
                lo = max(0, math.ceil((day_start - series.start) / step))
                hi = min(n, math.ceil((day_start + timedelta(days=1) - series.start) / step))
                mask[lo:hi] = True
            day += timedelta(days=1)

    return PluginSeries(
        start=series.start, resolution=series.resolution,
        values=series.values.copy(), mask=mask,
    )


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    lag_order: int
    critical_values: dict
    stationary_at_5pct: bool
    n_obs: int


def _adf_regression(y: np.ndarray, p: int, trim: int) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix and target for the level regression with p diff lags.

    Rows start at diff index ``trim`` so candidate lag orders can share an
    identical sample (trim = max_lag) during selection.
    """
    dy = np.diff(y)
    rows = len(dy) - trim
    cols = [y[trim : trim + rows]]
    for i in range(1, p + 1):
        cols.append(dy[trim - i : trim - i + rows])
    cols.append(np.ones(rows))
    return np.column_stack(cols), dy[trim:]


def _ols_stat(X: np.ndarray, z: np.ndarray) -> tuple[float, float, int]:
    """t ratio of the first coefficient, SSR, and residual dof."""
    beta, _, rank, _ = np.linalg.lstsq(X, z, rcond=None)
    if rank < X.shape[1]:
        raise DegenerateSeriesError("unit-root regression is rank deficient")
    resid = z - X @ beta
    ssr = float(resid @ resid)
    dof = X.shape[0] - X.shape[1]
    if dof <= 0:
        raise DataError("too few observations for the unit-root regression")
    sigma2 = ssr / dof
    try:
        xtx_inv = np.linalg.inv(X.T @ X)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSeriesError("unit-root regression is singular") from exc
    var0 = sigma2 * xtx_inv[0, 0]
    if not np.isfinite(var0) or var0 <= 0:
        raise DegenerateSeriesError("degenerate variance in unit-root regression")
    return float(beta[0] / math.sqrt(var0)), ssr, dof


def adf_test(
    series: PluginSeries | Sequence[float] | np.ndarray,
    max_lag: int = 20,
    lag_order: int | None = None,
) -> AdfResult:
    """Augmented Dickey-Fuller test with a constant term.

    Regresses the first difference on the lagged level, ``p`` lagged
    differences, and a constant; the statistic is the t ratio of the level
    coefficient. ``p`` minimizes AIC over 0..max_lag on a common sample
    unless ``lag_order`` pins it. Exclusion-masked steps are dropped before
    differencing. Critical values are the constant-only asymptotic ones.
    """
    if isinstance(series, PluginSeries):
        y = series.unmasked_values().astype(float)
    else:
        y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise DataError("adf_test expects a one-dimensional series")
    if lag_order is not None:
        if lag_order < 0:
            raise ValueError("lag_order must be non-negative")
        p = lag_order
        if len(y) < p + 10:
            raise DataError(f"series too short for lag order {p}")
    else:
        if max_lag < 0:
            raise ValueError("max_lag must be non-negative")
        if len(y) < max_lag + 10:
            raise DataError(
                f"need at least {max_lag + 10} unmasked steps, have {len(y)}"
            )
        best = None
        common = len(y) - 1 - max_lag
        for cand in range(max_lag + 1):
            X, z = _adf_regression(y, cand, trim=max_lag)
            _, ssr, _ = _ols_stat(X, z)
            k = X.shape[1]
            aic = common * math.log(ssr / common) + 2 * k
            if best is None or aic < best[0]:
                best = (aic, cand)
        p = best[1]

    X, z = _adf_regression(y, p, trim=p)
    statistic, _, _ = _ols_stat(X, z)
    return AdfResult(
        statistic=statistic,
        lag_order=p,
        critical_values=dict(ADF_CRITICAL_VALUES),
        stationary_at_5pct=statistic < ADF_CRITICAL_VALUES["5%"],
        n_obs=len(z),
    )
