"""Shared fixtures and test-side oracles.

The brute-force helpers here deliberately avoid the package's vectorized
code paths: occupancy is counted minute by minute with datetime loops so
the fast implementations have something independent to agree with.
"""

from datetime import date, datetime, timedelta

import numpy as np
import pytest

import plugcast as pc


def ts(text: str) -> datetime:
    return datetime.fromisoformat(text)


def make_event(start: str, end: str, event_id: str = "E", cp: str = "CP1") -> pc.ChargingEvent:
    return pc.ChargingEvent(
        event_id=event_id,
        charge_point_id=cp,
        connector=1,
        start=ts(start),
        end=ts(end),
        energy_kwh=1.0,
        organization="test",
    )


def brute_force_minutely(events, window_start: datetime, window_end: datetime) -> list:
    """Count per minute with an explicit datetime loop."""
    counts = []
    t = window_start
    while t < window_end:
        counts.append(sum(1 for e in events if e.start <= t < e.end))
        t += timedelta(minutes=1)
    return counts


def brute_force_half_hour_min(minutely: list) -> list:
    assert len(minutely) % 30 == 0
    return [min(minutely[i : i + 30]) for i in range(0, len(minutely), 30)]


def half_hour_series(values, start: str = "2017-01-02 00:00", mask=None) -> pc.PluginSeries:
    return pc.PluginSeries(
        start=ts(start), resolution="half-hour", values=np.asarray(values), mask=mask
    )


@pytest.fixture(scope="session")
def default_year():
    """Default synthetic year, built once: (config, events, masked series)."""
    cfg = pc.default_config()
    events = pc.generate_events(cfg)
    start = datetime.combine(cfg.span_start, datetime.min.time())
    end = datetime.combine(cfg.span_end, datetime.min.time())
    minutely = pc.aggregate_events(events, start, end)
    series = pc.apply_exclusions(
        pc.resample_half_hourly_min(minutely), pc.ExclusionConfig()
    )
    return cfg, events, series


@pytest.fixture(scope="session")
def default_year_matrix(default_year):
    """Split feature matrix over the default synthetic year."""
    _, _, series = default_year
    matrix = pc.build_matrix(series, pc.FeatureSpec())
    return pc.split_rows(matrix, (0.8, 0.1, 0.1), seed=7)
