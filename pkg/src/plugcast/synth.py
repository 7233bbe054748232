"""Synthetic charging-event generator.

Arrivals follow an inhomogeneous Poisson process whose per-minute rate is
a separable product of day-of-week, hour-of-day, and month factors:

    rate(t) = n_charge_points * dow_intensity[dow(t)] * hour_profile[hour(t)]
              * month_scale[month(t) - 1] / 1440

dow_intensity is absolute (expected arrivals per charge point per day on
that day of week); hour_profile and month_scale are mean-one modulations.
Arrivals are drawn by thinning a homogeneous process at the peak rate.
Session lengths are log-normal with the configured mean, rounded to whole
minutes and capped at seven days. Sessions are dealt to charge points
round-robin. Everything is driven by one seeded PCG64 stream consumed in
fixed-size blocks, so a config fully determines the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta

import numpy as np

from .ingest import MINUTES_PER_WEEK, ChargingEvent

# rng draws happen in blocks of this size; changing it changes the stream
_BLOCK = 1 << 16

_CHARGE_KW = 7.0


@dataclass(frozen=True)
class SynthConfig:
    n_charge_points: int
    span_start: date
    span_end: date  # exclusive
    dow_intensity: tuple  # 7 values, arrivals per charge point per day
    hour_profile: tuple  # 24 values, mean one
    month_scale: tuple  # 12 values, mean one
    mean_duration_minutes: float
    duration_dispersion: float  # sigma of the underlying normal
    seed: int

    def __post_init__(self):
        if self.n_charge_points < 1:
            raise ValueError("need at least one charge point")
        if self.span_end <= self.span_start:
            raise ValueError("span_end must come after span_start")
        for name, seq, want in (
            ("dow_intensity", self.dow_intensity, 7),
            ("hour_profile", self.hour_profile, 24),
            ("month_scale", self.month_scale, 12),
        ):
            seq = tuple(float(v) for v in seq)
            if len(seq) != want:
                raise ValueError(f"{name} needs {want} values, got {len(seq)}")
            if any(v < 0 for v in seq):
                raise ValueError(f"{name} values must be non-negative")
            object.__setattr__(self, name, seq)
        if self.mean_duration_minutes <= 0:
            raise ValueError("mean_duration_minutes must be positive")
        if self.duration_dispersion <= 0:
            raise ValueError("duration_dispersion must be positive")

    def as_dict(self) -> dict:
        return {
            "n_charge_points": self.n_charge_points,
            "span_start": self.span_start.isoformat(),
            "span_end": self.span_end.isoformat(),
            "dow_intensity": list(self.dow_intensity),
            "hour_profile": list(self.hour_profile),
            "month_scale": list(self.month_scale),
            "mean_duration_minutes": self.mean_duration_minutes,
            "duration_dispersion": self.duration_dispersion,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        return cls(
            n_charge_points=int(d["n_charge_points"]),
            span_start=date.fromisoformat(d["span_start"]),
            span_end=date.fromisoformat(d["span_end"]),
            dow_intensity=tuple(d["dow_intensity"]),
            hour_profile=tuple(d["hour_profile"]),
            month_scale=tuple(d["month_scale"]),
            mean_duration_minutes=float(d["mean_duration_minutes"]),
            duration_dispersion=float(d["duration_dispersion"]),
            seed=int(d["seed"]),
        )


def _normalized(values, scale=1.0) -> tuple:
    v = np.asarray(values, dtype=float)
    return tuple(scale * v / v.mean())


def default_config(seed: int = 1) -> SynthConfig:
    """One calendar year of plausible workplace-flavoured charging.

    Weekday arrival intensity is a bit over twice the weekend's, the hour
    profile concentrates arrivals in the working day, and July/August sit
    20% below the annual mean so summer behaves like a holiday dip.
    """
    hour_profile = _normalized(
        [0.22, 0.20, 0.20, 0.20, 0.25, 0.45,
         1.10, 1.80, 2.30, 2.40, 2.30, 2.20,
         2.10, 2.10, 2.05, 1.95, 1.80, 1.60,
         1.25, 0.90, 0.60, 0.42, 0.32, 0.26]
    )
    # July and August pinned to 0.8 of the mean: with the other ten months
    # summing to 10.25, b = 0.8 * (10.25 + 2b) / 12 gives b = 8.2 / 10.4.
    # The pin is scale-invariant, so normalizing to mean one preserves it.
    b = 8.2 / 10.4
    month_scale = _normalized(
        (1.0, 0.95, 1.05, 1.0, 1.1, 1.05, b, b, 1.0, 1.1, 0.95, 1.05)
    )
    return SynthConfig(
        n_charge_points=400,
        span_start=date(2017, 1, 1),
        span_end=date(2018, 1, 1),
        dow_intensity=(2.5, 2.5, 2.5, 2.5, 2.5, 1.25, 1.25),
        hour_profile=hour_profile,
        month_scale=month_scale,
        mean_duration_minutes=135.0,
        duration_dispersion=0.85,
        seed=seed,
    )


def minute_rates(config: SynthConfig) -> np.ndarray:
    """Arrival rate per minute for every minute of the span."""
    hour_block = np.repeat(np.asarray(config.hour_profile, dtype=float), 60)
    days = (config.span_end - config.span_start).days
    rates = np.empty(days * 1440)
    day = config.span_start
    base = config.n_charge_points / 1440.0
    for i in range(days):
        factor = (
            base
            * config.dow_intensity[day.weekday()]
            * config.month_scale[day.month - 1]
        )
        rates[i * 1440 : (i + 1) * 1440] = factor * hour_block
        day += timedelta(days=1)
    return rates


def generate_events(config: SynthConfig) -> list[ChargingEvent]:
    """Deterministically sample the configured event population."""
    rng = np.random.default_rng(config.seed)
    rates = minute_rates(config)
    horizon = float(len(rates))
    lam_max = float(rates.max())
    if lam_max == 0.0:
        return []

    arrival_minutes: list[np.ndarray] = []
    t = 0.0
    while t < horizon:
        gaps = rng.exponential(1.0 / lam_max, _BLOCK)
        times = t + np.cumsum(gaps)
        accept_u = rng.random(_BLOCK)
        inside = times < horizon
        candidate = times[inside]
        minutes = candidate.astype(np.int64)
        accepted = accept_u[inside] * lam_max < rates[minutes]
        arrival_minutes.append(minutes[accepted])
        t = float(times[-1])
    minutes = np.concatenate(arrival_minutes) if arrival_minutes else np.empty(0, np.int64)

    sigma = config.duration_dispersion
    mu = math.log(config.mean_duration_minutes) - 0.5 * sigma * sigma
    durations = rng.lognormal(mu, sigma, size=len(minutes))
    durations = np.clip(np.rint(durations), 1, MINUTES_PER_WEEK).astype(np.int64)

    span_start = datetime.combine(config.span_start, datetime.min.time())
    width = max(5, len(str(config.n_charge_points - 1)))
    events = []
    for k in range(len(minutes)):
        start = span_start + timedelta(minutes=int(minutes[k]))
        events.append(
            ChargingEvent(
                event_id=f"EV{k:07d}",
                charge_point_id=f"CP{k % config.n_charge_points:0{width}d}",
                connector=1,
                start=start,
                end=start + timedelta(minutes=int(durations[k])),
                energy_kwh=round(_CHARGE_KW * int(durations[k]) / 60.0, 3),
                organization="synthetic",
            )
        )
    return events
