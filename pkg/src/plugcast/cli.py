"""Command-line pipeline: synth -> build -> analyze/train -> evaluate.

Every subcommand takes the same global flags (--config, --out, --seed,
--plot), validates the merged configuration before writing anything, and
keeps all randomness behind named seeds so reruns are byte-identical.
Exit codes: 0 success, 1 configuration problem, 2 data problem, 3
training problem.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from . import config as cfg_mod
from .errors import ConfigError, DataError, PlugcastError
from .evaluate import (
    DAY_NAMES,
    build_report,
    exogenous_correlation,
    grouped_distribution,
    lag_correlation_by_day,
    write_grouped_csv,
    write_lag_correlation_csv,
    write_metrics_csv,
    write_residual_stats_csv,
    write_residuals_by_day_csv,
)
from .features import FeatureSpec, build_matrix, split_rows
from .ingest import filter_overlong, parse_events
from .models import fit_glm, load_artifact, save_artifact, train_mlp
from .models.persistence import PersistenceModel
from .series import PluginSeries, adf_test, aggregate_events, apply_exclusions, resample_half_hourly_min
from .synth import generate_events

logger = logging.getLogger("plugcast")

EVENT_FIELD_ORDER = (
    "event_id", "charge_point_id", "connector",
    "start_date", "start_time", "end_date", "end_time",
    "energy", "organization",
)


def _events_path(cfg: dict, out: Path) -> Path:
    configured = cfg["paths"]["events_csv"]
    return Path(configured) if configured else out / "events.csv"


def _series_path(cfg: dict, out: Path) -> Path:
    configured = cfg["paths"]["series_csv"]
    return Path(configured) if configured else out / "series.csv"


def write_events_csv(events, path: Path, columns: dict, date_format: str) -> None:
    """Events in the same schema parse_events reads back."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([columns[f] for f in EVENT_FIELD_ORDER])
        for e in events:
            writer.writerow(
                [
                    e.event_id,
                    e.charge_point_id or "",
                    e.connector,
                    e.start.strftime(date_format),
                    e.start.strftime("%H:%M"),
                    e.end.strftime(date_format),
                    e.end.strftime("%H:%M"),
                    f"{e.energy_kwh:.3f}",
                    e.organization,
                ]
            )


def _write_json(doc: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_synth(cfg: dict, out: Path, plot: bool = False) -> None:
    synth_cfg = cfg_mod.synth_config(cfg)
    events = generate_events(synth_cfg)
    path = _events_path(cfg, out)
    write_events_csv(events, path, cfg["columns"], cfg["formats"]["date"])
    canonical = json.dumps(synth_cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    _write_json(
        {
            "seed": synth_cfg.seed,
            "config_sha256": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
            "n_events": len(events),
        },
        out / "provenance.json",
    )
    logger.info("synth: wrote %d events to %s", len(events), path)


def _derive_window(events) -> tuple[datetime, datetime]:
    """Whole-day window covering every event."""
    if not events:
        raise DataError("no events to aggregate")
    lo = min(e.start for e in events)
    hi = max(e.end for e in events)
    start = datetime.combine(lo.date(), datetime.min.time())
    end = datetime.combine(hi.date(), datetime.min.time())
    if end < hi:
        end += timedelta(days=1)
    return start, end


def cmd_build(cfg: dict, out: Path, plot: bool = False) -> None:
    events, report = parse_events(
        _events_path(cfg, out), cfg["columns"], cfg["formats"]["date"]
    )
    kept, removed = filter_overlong(events, cfg["ingest"]["max_duration_minutes"])
    report = report.with_overlong_removed(removed)

    start, end = cfg_mod.window_bounds(cfg)
    if start is None or end is None:
        derived_start, derived_end = _derive_window(kept)
        start = start or derived_start
        end = end or derived_end

    minutely = aggregate_events(kept, start, end)
    half_hourly = resample_half_hourly_min(minutely)
    series = apply_exclusions(half_hourly, cfg_mod.exclusion_config(cfg))
    series.to_csv(_series_path(cfg, out))
    _write_json(
        {
            "ingest": report.as_dict(),
            "window": {"start": start.isoformat(), "end": end.isoformat()},
            "steps": len(series),
            "excluded_steps": int(series.mask.sum()),
        },
        out / "ingest_report.json",
    )
    logger.info(
        "build: %d events -> %d half-hour steps (%d excluded)",
        report.accepted, len(series), int(series.mask.sum()),
    )


def _read_exogenous(path: Path) -> tuple[list, np.ndarray]:
    stamps, values = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DataError(f"{path}: expected timestamp,value columns")
        for row in reader:
            if not row:
                continue
            stamps.append(datetime.fromisoformat(row[0]))
            text = row[1].strip()
            values.append(float(text) if text and text.lower() != "nan" else float("nan"))
    return stamps, np.array(values)


def cmd_analyze(cfg: dict, out: Path, plot: bool = False) -> None:
    series = PluginSeries.from_csv(_series_path(cfg, out))

    dists = {}
    for key in ("dow", "month", "hour"):
        dists[key] = grouped_distribution(series, key)
        names = DAY_NAMES if key == "dow" else None
        write_grouped_csv(dists[key], out / f"grouped_{key}.csv", label_names=names)

    day_corr = lag_correlation_by_day(series)
    write_lag_correlation_csv(day_corr, out / "lag_correlation.csv")

    adf = adf_test(series, max_lag=cfg["analyze"]["adf_max_lag"])
    analysis = {
        "adf": {
            "statistic": adf.statistic,
            "lag_order": adf.lag_order,
            "critical_values": adf.critical_values,
            "stationary_at_5pct": adf.stationary_at_5pct,
            "n_obs": adf.n_obs,
        }
    }

    exo_path = cfg["analyze"]["exogenous_csv"]
    if exo_path:
        stamps, values = _read_exogenous(Path(exo_path))
        pe, sp, n = exogenous_correlation(series, stamps, values)
        analysis["exogenous"] = {"pearson": pe, "spearman": sp, "n_pairs": n}
    _write_json(analysis, out / "analysis.json")

    if plot:
        from .figures import save_grouped_boxplot

        titles = {
            "dow": "Plug-in count by day of week",
            "month": "Plug-in count by month",
            "hour": "Plug-in count by hour of day",
        }
        for key, dist in dists.items():
            save_grouped_boxplot(
                dist, out / f"plugins_by_{key}.png", titles[key],
                "half-hourly minimum plug-ins",
            )
    logger.info(
        "analyze: adf statistic %.3f (lag %d), stationary at 5%%: %s",
        adf.statistic, adf.lag_order, adf.stationary_at_5pct,
    )


def _prepare_matrix(cfg: dict, out: Path):
    series = PluginSeries.from_csv(_series_path(cfg, out))
    spec = FeatureSpec(lags=tuple(cfg["features"]["lags"]))
    matrix = build_matrix(series, spec)
    return split_rows(matrix, tuple(cfg["split"]["ratios"]), cfg["split"]["seed"])


def cmd_train(cfg: dict, out: Path, plot: bool = False) -> None:
    matrix = _prepare_matrix(cfg, out)
    artifacts = out / "artifacts"
    artifacts.mkdir(exist_ok=True)
    histories = {}
    for label in cfg["train"]["models"]:
        if label == "persistence":
            model = PersistenceModel(lags=tuple(cfg["features"]["lags"]))
            save_artifact(model, artifacts / "persistence.json")
        elif label == "glm":
            model = fit_glm(matrix)
            save_artifact(model, artifacts / "glm.json")
        else:
            variant = label.split("-", 1)[1]
            tc = cfg_mod.train_config(cfg, variant)
            model, history = train_mlp(matrix, variant, tc)
            save_artifact(model, artifacts / f"{label}.json", train_config=tc)
            _write_json(history, out / f"loss_{label}.json")
            histories[label] = history
        logger.info("train: %s done", label)
    if plot and histories:
        from .figures import save_loss_curves

        save_loss_curves(histories, out / "training_loss.png")


def cmd_evaluate(cfg: dict, out: Path, plot: bool = False) -> None:
    matrix = _prepare_matrix(cfg, out)
    artifacts = out / "artifacts"
    models = []
    for label in cfg["train"]["models"]:
        path = artifacts / f"{label}.json"
        if not path.exists():
            raise DataError(f"missing artifact {path}; run the train step first")
        models.append(load_artifact(path))
    report = build_report(models, matrix, floor=cfg["evaluate"]["floor_predictions"])
    _write_json(report.as_dict(), out / "report.json")
    write_metrics_csv(report, out / "metrics.csv")
    write_residual_stats_csv(report, out / "residual_stats.csv")
    write_residuals_by_day_csv(report, out / "residuals_by_day.csv")
    if plot:
        from .figures import save_residual_boxplots

        save_residual_boxplots(report.residuals_by_day, out / "residuals_by_day.png")
    for label in report.model_order:
        test = report.metrics[label]["test"]
        logger.info(
            "evaluate: %s test rmse %.3f mae %.3f", label, test.rmse, test.mae
        )


def cmd_report(cfg: dict, out: Path, plot: bool = False) -> None:
    cmd_analyze(cfg, out, plot)
    cmd_evaluate(cfg, out, plot)


COMMANDS = {
    "synth": cmd_synth,
    "build": cmd_build,
    "analyze": cmd_analyze,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage problems; flag misuse is a
    # validation error here, exit code 1.
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="plugcast",
        description="Forecast half-hourly minimum EV plug-in counts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "synth": "generate a synthetic charging-event CSV",
        "build": "ingest events and build the half-hourly series",
        "analyze": "distributional, correlation, and stationarity analysis",
        "train": "fit the configured forecast models",
        "evaluate": "score trained models and write the report",
        "report": "analyze and evaluate in one pass",
    }
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=descriptions[name], description=descriptions[name])
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--plot", action="store_true", help="also render figures")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        cfg = cfg_mod.load_config(args.config, seed=args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        args.fn(cfg, args.out, plot=args.plot)
        return 0
    except PlugcastError as exc:
        print(f"plugcast: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"plugcast: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
