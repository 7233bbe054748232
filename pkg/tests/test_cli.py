"""End-to-end command-line pipeline on a small synthetic window.

One eight-week dataset is generated, built, analyzed, trained (2 epochs),
and evaluated once per session; the tests inspect the files it leaves
behind. Exit-code and failure-path tests run against throwaway dirs.
"""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import plugcast as pc
from plugcast.cli import main

SMALL_CONFIG = {
    # 56 days starting Monday 2017-03-06; exclusions leave 5 clean weeks.
    # The window is pinned because long sessions spill past the arrival
    # span and would otherwise stretch the derived window.
    "synth": {
        "n_charge_points": 60,
        "span_start": "2017-03-06",
        "span_end": "2017-05-01",
    },
    "window": {"start": "2017-03-06", "end": "2017-05-01"},
    "train": {"epochs": 2},
}


def write_config(path, doc):
    path.write_text(json.dumps(doc, indent=2))
    return path


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """Full synth -> build -> analyze -> train -> evaluate run."""
    out = tmp_path_factory.mktemp("pipeline")
    config = write_config(out / "config.json", SMALL_CONFIG)
    for command in ("synth", "build", "analyze", "train", "evaluate"):
        code = run([command, "--config", config, "--out", out])
        assert code == 0, f"{command} failed"
    return out, config


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# artifacts of each stage
# ---------------------------------------------------------------------------

def test_synth_outputs(pipeline):
    out, _ = pipeline
    rows = read_rows(out / "events.csv")
    assert rows[0] == [
        "event_id", "charge_point_id", "connector", "start_date", "start_time",
        "end_date", "end_time", "energy_kwh", "organization",
    ]
    provenance = json.loads((out / "provenance.json").read_text())
    assert provenance["n_events"] == len(rows) - 1
    assert provenance["seed"] == 1
    assert len(provenance["config_sha256"]) == 64


def test_build_outputs(pipeline):
    out, _ = pipeline
    series = pc.PluginSeries.from_csv(out / "series.csv")
    assert len(series) == 56 * 48
    assert int(series.mask.sum()) == 21 * 48  # 7 leading + 14 trailing days
    report = json.loads((out / "ingest_report.json").read_text())
    assert report["steps"] == 56 * 48
    assert report["excluded_steps"] == 21 * 48
    assert report["ingest"]["malformed"] == 0
    assert report["ingest"]["accepted"] > 0
    assert report["window"] == {
        "start": "2017-03-06T00:00:00",
        "end": "2017-05-01T00:00:00",
    }


def test_analyze_outputs(pipeline):
    out, _ = pipeline
    for key in ("dow", "month", "hour"):
        rows = read_rows(out / f"grouped_{key}.csv")
        expected = {"dow": 7, "month": 2, "hour": 24}[key]
        assert len(rows) == 1 + expected
    lag_rows = read_rows(out / "lag_correlation.csv")
    assert len(lag_rows) == 8
    analysis = json.loads((out / "analysis.json").read_text())
    assert set(analysis["adf"]) == {
        "statistic", "lag_order", "critical_values", "stationary_at_5pct", "n_obs",
    }


def test_train_outputs(pipeline):
    out, _ = pipeline
    for label in ("persistence", "glm", "mlp-v1", "mlp-v2", "mlp-v3"):
        model = pc.load_artifact(out / "artifacts" / f"{label}.json")
        assert model.label == label
    for variant in ("v1", "v2", "v3"):
        history = json.loads((out / f"loss_mlp-{variant}.json").read_text())
        assert len(history["train"]) == 2
        assert len(history["validation"]) == 2
        assert history["best_epoch"] in (1, 2)


def test_evaluate_outputs(pipeline):
    out, _ = pipeline
    report = pc.EvaluationReport.from_dict(json.loads((out / "report.json").read_text()))
    assert report.model_order == ["persistence", "glm", "mlp-v1", "mlp-v2", "mlp-v3"]
    for label in report.model_order:
        assert set(report.metrics[label]) == {"train", "validation", "test"}
        assert report.metrics[label]["test"].rmse > 0
    assert len(read_rows(out / "metrics.csv")) == 1 + 5 * 3
    assert len(read_rows(out / "residual_stats.csv")) == 1 + 5
    by_day = read_rows(out / "residuals_by_day.csv")
    assert by_day[0][:3] == ["model", "dow", "day"]


def test_persistence_artifact_predicts_like_the_series(pipeline):
    # spot-check the persistence artifact against the stepwise rule
    out, _ = pipeline
    series = pc.PluginSeries.from_csv(out / "series.csv")
    matrix = pc.build_matrix(series, pc.FeatureSpec())
    model = pc.load_artifact(out / "artifacts" / "persistence.json")
    preds = model.predict_rows(matrix, np.arange(len(matrix)))
    for i in (0, len(matrix) // 2, len(matrix) - 1):
        step = (matrix.timestamps[i] - series.start) // series.step
        assert preds[i] == pc.persistence_predict(series, step)


# ---------------------------------------------------------------------------
# determinism and seeds
# ---------------------------------------------------------------------------

def test_evaluate_rerun_is_byte_identical(pipeline):
    out, config = pipeline
    report_a = (out / "report.json").read_bytes()
    assert run(["evaluate", "--config", config, "--out", out]) == 0
    assert (out / "report.json").read_bytes() == report_a


def test_synth_seed_controls_the_events(tmp_path):
    config = write_config(tmp_path / "config.json", SMALL_CONFIG)
    for name, seed in (("a", 3), ("b", 3), ("c", 4)):
        assert run(["synth", "--config", config, "--out", tmp_path / name,
                    "--seed", seed]) == 0
    a = (tmp_path / "a" / "events.csv").read_bytes()
    b = (tmp_path / "b" / "events.csv").read_bytes()
    c = (tmp_path / "c" / "events.csv").read_bytes()
    assert a == b
    assert a != c
    prov = json.loads((tmp_path / "c" / "provenance.json").read_text())
    assert prov["seed"] == 4


# ---------------------------------------------------------------------------
# failure paths and exit codes
# ---------------------------------------------------------------------------

def test_unknown_config_key_is_a_config_error(tmp_path):
    config = write_config(tmp_path / "config.json", {"sinth": {"seed": 2}})
    assert run(["synth", "--config", config, "--out", tmp_path]) == 1


def test_invalid_ratio_is_a_config_error(tmp_path):
    config = write_config(
        tmp_path / "config.json", {"split": {"ratios": [0.8, 0.1, 0.2]}}
    )
    assert run(["synth", "--config", config, "--out", tmp_path]) == 1


def test_missing_config_file_is_a_config_error(tmp_path):
    assert run(["synth", "--config", tmp_path / "absent.json", "--out", tmp_path]) == 1


def test_bad_flag_is_a_config_error(tmp_path):
    assert run(["synth", "--nope"]) == 1


def test_missing_events_is_a_data_error(tmp_path):
    assert run(["build", "--out", tmp_path]) == 2


def test_missing_artifacts_is_a_data_error(pipeline, tmp_path):
    out, config = pipeline
    # series exists but artifacts do not in the fresh directory
    fresh = tmp_path / "no_artifacts"
    fresh.mkdir()
    (fresh / "series.csv").write_bytes((out / "series.csv").read_bytes())
    assert run(["evaluate", "--config", config, "--out", fresh]) == 2


def test_divergent_training_is_a_training_error(pipeline, tmp_path):
    out, _ = pipeline
    doc = dict(SMALL_CONFIG)
    doc["train"] = {"epochs": 1, "step_size": 1e150, "models": ["mlp-v1"]}
    config = write_config(tmp_path / "config.json", doc)
    fresh = tmp_path / "diverge"
    fresh.mkdir()
    (fresh / "series.csv").write_bytes((out / "series.csv").read_bytes())
    with np.errstate(over="ignore", invalid="ignore"):
        assert run(["train", "--config", config, "--out", fresh]) == 3


def test_zero_intensity_yields_header_only_events(tmp_path):
    doc = {
        "synth": dict(SMALL_CONFIG["synth"], dow_intensity=[0.0] * 7),
    }
    config = write_config(tmp_path / "config.json", doc)
    assert run(["synth", "--config", config, "--out", tmp_path]) == 0
    assert len(read_rows(tmp_path / "events.csv")) == 1
    # nothing to aggregate downstream
    assert run(["build", "--config", config, "--out", tmp_path]) == 2


def test_derived_window_covers_whole_days(tmp_path):
    doc = {"synth": dict(SMALL_CONFIG["synth"])}  # no window section
    config = write_config(tmp_path / "config.json", doc)
    assert run(["synth", "--config", config, "--out", tmp_path]) == 0
    assert run(["build", "--config", config, "--out", tmp_path]) == 0
    series = pc.PluginSeries.from_csv(tmp_path / "series.csv")
    assert series.start.isoformat() == "2017-03-06T00:00:00"
    assert len(series) % 48 == 0
    # sessions run past the arrival span, so the window stretches with them
    assert len(series) >= 56 * 48


def test_explicit_window_overrides_derivation(tmp_path):
    doc = dict(SMALL_CONFIG)
    doc["window"] = {"start": "2017-03-06", "end": "2017-04-03"}  # 4 weeks
    config = write_config(tmp_path / "config.json", doc)
    assert run(["synth", "--config", config, "--out", tmp_path]) == 0
    assert run(["build", "--config", config, "--out", tmp_path]) == 0
    series = pc.PluginSeries.from_csv(tmp_path / "series.csv")
    assert len(series) == 28 * 48
    assert series.start.isoformat() == "2017-03-06T00:00:00"


def test_holiday_exclusions_flow_through(tmp_path):
    doc = dict(SMALL_CONFIG)
    doc["exclusions"] = {
        "drop_first_days": 0,
        "drop_last_days": 0,
        "holidays": ["2017-03-17"],
    }
    config = write_config(tmp_path / "config.json", doc)
    assert run(["synth", "--config", config, "--out", tmp_path]) == 0
    assert run(["build", "--config", config, "--out", tmp_path]) == 0
    series = pc.PluginSeries.from_csv(tmp_path / "series.csv")
    assert int(series.mask.sum()) == 48
    masked_days = {series.timestamp(i).date().isoformat()
                   for i in np.flatnonzero(series.mask)}
    assert masked_days == {"2017-03-17"}


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_plot_flags_render_pngs(pipeline):
    out, config = pipeline
    assert run(["analyze", "--config", config, "--out", out, "--plot"]) == 0
    assert run(["evaluate", "--config", config, "--out", out, "--plot"]) == 0
    assert run(["train", "--config", config, "--out", out, "--plot"]) == 0
    for name in (
        "plugins_by_dow.png", "plugins_by_month.png", "plugins_by_hour.png",
        "residuals_by_day.png", "training_loss.png",
    ):
        data = (out / name).read_bytes()
        assert data.startswith(PNG_MAGIC), name
        assert len(data) > 2000


# ---------------------------------------------------------------------------
# installed entry point
# ---------------------------------------------------------------------------

def test_console_script_runs(tmp_path):
    config = write_config(tmp_path / "config.json", SMALL_CONFIG)
    proc = subprocess.run(
        [sys.executable, "-m", "plugcast.cli", "synth",
         "--config", str(config), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "events.csv").exists()
