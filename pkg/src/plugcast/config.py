"""Run configuration: one JSON document drives every subcommand.

A config file only needs the keys it wants to change; everything else
comes from DEFAULTS. Command-line flags win over the file. Validation is
strict about unknown sections and keys so typos fail fast, before any
output is written.
"""

from __future__ import annotations

import copy
import json
from datetime import date, datetime, timedelta
from pathlib import Path

from .errors import ConfigError
from .ingest import DEFAULT_COLUMNS, MINUTES_PER_WEEK
from .models.mlp import TrainConfig
from .series import ExclusionConfig
from .synth import SynthConfig, default_config

MODEL_CHOICES = ("persistence", "glm", "mlp-v1", "mlp-v2", "mlp-v3")


def _default_synth_dict() -> dict:
    return default_config().as_dict()


DEFAULTS: dict = {
    "paths": {
        "events_csv": None,  # null -> <out>/events.csv
        "series_csv": None,  # null -> <out>/series.csv
    },
    "columns": dict(DEFAULT_COLUMNS),
    "formats": {"date": "%Y-%m-%d"},
    "ingest": {"max_duration_minutes": MINUTES_PER_WEEK},
    "window": {"start": None, "end": None},  # ISO dates; null -> derive from events
    "exclusions": {"drop_first_days": 7.0, "drop_last_days": 14.0, "holidays": []},
    "features": {"lags": [48, 144, 336]},
    "split": {"ratios": [0.8, 0.1, 0.1], "seed": 7},
    "train": {
        "epochs": 1000,
        "batch_size": 100,
        "dropout_rate": 0.2,
        "step_size": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
        "keep_last_epoch": False,
        "models": list(MODEL_CHOICES),
        "seeds": {"v1": 11, "v2": 12, "v3": 13},
    },
    "evaluate": {"floor_predictions": False},
    "analyze": {"adf_max_lag": 20, "exogenous_csv": None},
    "synth": _default_synth_dict(),
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None = None, seed: int | None = None) -> dict:
    """Defaults, overlaid with the file at ``path``, then the master seed.

    A master seed fans out deterministically: synth keeps it, the split
    takes seed+1, and the network variants take seed+2..seed+4.
    """
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        cfg = _merge(cfg, loaded)
    if seed is not None:
        cfg["synth"]["seed"] = seed
        cfg["split"]["seed"] = seed + 1
        cfg["train"]["seeds"] = {"v1": seed + 2, "v2": seed + 3, "v3": seed + 4}
    validate_config(cfg)
    return cfg


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_date(value, where: str) -> None:
    try:
        date.fromisoformat(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: {value!r} is not an ISO date") from None


def validate_config(cfg: dict) -> None:
    """Raise ConfigError on the first problem found; touch no files."""
    paths = cfg["paths"]
    for key in ("events_csv", "series_csv"):
        _require(
            paths[key] is None or isinstance(paths[key], str),
            f"paths.{key} must be a string or null",
        )

    columns = cfg["columns"]
    for field, name in columns.items():
        _require(
            field in DEFAULT_COLUMNS, f"columns.{field}: unknown canonical field"
        )
        _require(isinstance(name, str) and name, f"columns.{field} must name a column")
    for field in DEFAULT_COLUMNS:
        if field != "charge_point_id":
            _require(field in columns, f"columns.{field} is required")

    _require(
        isinstance(cfg["formats"]["date"], str) and "%" in cfg["formats"]["date"],
        "formats.date must be a strptime pattern",
    )

    max_dur = cfg["ingest"]["max_duration_minutes"]
    _require(_is_num(max_dur) and max_dur > 0, "ingest.max_duration_minutes must be positive")

    window = cfg["window"]
    for key in ("start", "end"):
        if window[key] is not None:
            _check_date(window[key], f"window.{key}")
    if window["start"] is not None and window["end"] is not None:
        _require(
            date.fromisoformat(window["start"]) < date.fromisoformat(window["end"]),
            "window.start must precede window.end",
        )

    excl = cfg["exclusions"]
    for key in ("drop_first_days", "drop_last_days"):
        _require(_is_num(excl[key]) and excl[key] >= 0, f"exclusions.{key} must be >= 0")
    _require(isinstance(excl["holidays"], list), "exclusions.holidays must be a list")
    for holiday in excl["holidays"]:
        _check_date(holiday, "exclusions.holidays")

    lags = cfg["features"]["lags"]
    _require(
        isinstance(lags, list) and lags and all(isinstance(l, int) for l in lags),
        "features.lags must be a list of integers",
    )
    _require(
        all(l > 0 for l in lags) and all(a < b for a, b in zip(lags, lags[1:])),
        "features.lags must be positive and strictly increasing",
    )

    split = cfg["split"]
    ratios = split["ratios"]
    _require(
        isinstance(ratios, list) and len(ratios) == 3 and all(_is_num(r) for r in ratios),
        "split.ratios must be three numbers",
    )
    _require(all(r >= 0 for r in ratios), "split.ratios must be non-negative")
    _require(abs(sum(ratios) - 1.0) <= 1e-9, "split.ratios must sum to 1")
    _require(isinstance(split["seed"], int), "split.seed must be an integer")

    train = cfg["train"]
    _require(isinstance(train["epochs"], int) and train["epochs"] >= 0,
             "train.epochs must be a non-negative integer")
    _require(isinstance(train["batch_size"], int) and train["batch_size"] >= 1,
             "train.batch_size must be a positive integer")
    _require(_is_num(train["dropout_rate"]) and 0 <= train["dropout_rate"] < 1,
             "train.dropout_rate must lie in [0, 1)")
    _require(_is_num(train["step_size"]) and train["step_size"] > 0,
             "train.step_size must be positive")
    for key in ("beta1", "beta2"):
        _require(_is_num(train[key]) and 0 <= train[key] < 1,
                 f"train.{key} must lie in [0, 1)")
    _require(_is_num(train["epsilon"]) and train["epsilon"] > 0,
             "train.epsilon must be positive")
    _require(isinstance(train["keep_last_epoch"], bool),
             "train.keep_last_epoch must be a boolean")
    models = train["models"]
    _require(isinstance(models, list) and models, "train.models must be a non-empty list")
    for m in models:
        _require(m in MODEL_CHOICES, f"train.models: unknown model {m!r}")
    _require(len(set(models)) == len(models), "train.models has duplicates")
    if "persistence" in models:
        _require(
            all(o in lags for o in (48, 144, 336)),
            "persistence needs lags 48, 144 and 336 in features.lags",
        )
    seeds = train["seeds"]
    _require(isinstance(seeds, dict), "train.seeds must be an object")
    for variant in ("v1", "v2", "v3"):
        _require(isinstance(seeds.get(variant), int), f"train.seeds.{variant} must be an integer")

    _require(isinstance(cfg["evaluate"]["floor_predictions"], bool),
             "evaluate.floor_predictions must be a boolean")

    analyze = cfg["analyze"]
    _require(isinstance(analyze["adf_max_lag"], int) and analyze["adf_max_lag"] >= 0,
             "analyze.adf_max_lag must be a non-negative integer")
    _require(analyze["exogenous_csv"] is None or isinstance(analyze["exogenous_csv"], str),
             "analyze.exogenous_csv must be a string or null")

    try:
        synth_config(cfg)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"synth: {exc}") from exc


# ---------------------------------------------------------------------------
# typed accessors
# ---------------------------------------------------------------------------

def synth_config(cfg: dict) -> SynthConfig:
    return SynthConfig.from_dict(cfg["synth"])


def exclusion_config(cfg: dict) -> ExclusionConfig:
    excl = cfg["exclusions"]
    return ExclusionConfig(
        drop_first=timedelta(days=excl["drop_first_days"]),
        drop_last=timedelta(days=excl["drop_last_days"]),
        holidays=frozenset(date.fromisoformat(h) for h in excl["holidays"]),
    )


def train_config(cfg: dict, variant: str) -> TrainConfig:
    train = cfg["train"]
    return TrainConfig(
        epochs=train["epochs"],
        batch_size=train["batch_size"],
        dropout_rate=train["dropout_rate"],
        step_size=train["step_size"],
        beta1=train["beta1"],
        beta2=train["beta2"],
        epsilon=train["epsilon"],
        seed=train["seeds"][variant],
        keep_last_epoch=train["keep_last_epoch"],
    )


def window_bounds(cfg: dict) -> tuple[datetime | None, datetime | None]:
    window = cfg["window"]
    start = end = None
    if window["start"] is not None:
        start = datetime.combine(date.fromisoformat(window["start"]), datetime.min.time())
    if window["end"] is not None:
        end = datetime.combine(date.fromisoformat(window["end"]), datetime.min.time())
    return start, end
