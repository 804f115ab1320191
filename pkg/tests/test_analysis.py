import io
import json
import math

import numpy as np
import pandas as pd
import pytest

from src.analysis import AnalysisConfig, analyze_dataset, parse_config, run_analysis
from src.csv_parser import OutcomeKind
from src.estimators import WeightScheme
from src.reporting import (
    RESULT_COLUMNS, UNIT_COLUMNS, VECTOR_COLUMNS, emit_report, emit_vectors, render_report,
)
from src.utils import ConfigError, DomainError


# ============================================================
# Configuration
# ============================================================

class TestParseConfig:
    def test_defaults(self, config_file):
        config = parse_config(config_file)
        assert config.level == 0.95
        assert config.scheme == "both"
        assert config.schemes == [WeightScheme.HT, WeightScheme.HAJEK]
        assert config.report_format == "text"
        assert config.output.vectors is None

    def test_relative_input_resolved_against_config(self, tmp_path, config_dict):
        (tmp_path / "inputs").mkdir()
        (tmp_path / "inputs" / "d.csv").write_text("a,t\n1,0.1\n0,0.2\n")
        config_dict["input_path"] = "inputs/d.csv"
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config_dict))
        assert parse_config(path).input_path == (tmp_path / "inputs" / "d.csv").resolve()

    def test_confounder_names_default_to_numeric(self, config_dict):
        config_dict["confounders"] = ["age"]
        config = AnalysisConfig(**config_dict)
        assert config.confounders[0].kind.value == "numeric"

    def test_numeric_treated_value(self, config_dict):
        config_dict["treated_value"] = 1
        assert AnalysisConfig(**config_dict).treated_value == "1"

    @pytest.mark.parametrize("value,text", [(1.0, "1"), (0.5, "0.5"), (True, "true"), ("yes", "yes")])
    def test_treated_value_as_cell_text(self, config_dict, value, text):
        config_dict["treated_value"] = value
        assert AnalysisConfig(**config_dict).treated_value == text

    def test_outcome_as_confounder(self, tmp_path, config_dict):
        config_dict["confounders"].append({"name": "sleep_onset"})
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config_dict))
        with pytest.raises(ConfigError, match="both outcome and confounder"):
            parse_config(path)

    def test_unknown_key(self, tmp_path, config_dict):
        config_dict["bootstrap"] = True
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config_dict))
        with pytest.raises(ConfigError, match="bootstrap"):
            parse_config(path)

    def test_missing_required_key(self, tmp_path, config_dict):
        del config_dict["outcome_column"]
        path = tmp_path / "c.json"
        path.write_text(json.dumps(config_dict))
        with pytest.raises(ConfigError, match="outcome_column"):
            parse_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="absent.json"):
            parse_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_overrides(self, config_file):
        config = parse_config(config_file, overrides={"report_format": "json", "scheme": None})
        assert config.report_format == "json"
        assert config.scheme == "both"


# ============================================================
# Analysis
# ============================================================

@pytest.fixture
def report(config_file):
    return run_analysis(parse_config(config_file))


def test_report_accounting(report):
    assert (report.n_total, report.n_used, report.n_dropped) == (40, 35, 5)
    assert sum(report.dropped_reasons.values()) == report.n_dropped


def test_direction_identical_across_schemes(report):
    ht, hajek = report.result(WeightScheme.HT), report.result(WeightScheme.HAJEK)
    assert abs(ht.tau - hajek.tau) <= 1e-12
    assert ht.tau_minutes == hajek.tau_minutes


def test_minutes_follow_radians(report):
    for r in report.results:
        assert r.tau_minutes == round(r.tau * 1440 / (2 * math.pi), 3)
        assert r.se_tau > 0 and r.se_xi > 0


def test_treated_fall_asleep_later_in_sample(report):
    # assistant chiefs in the bundled file fall asleep about an hour later
    assert report.result(WeightScheme.HAJEK).tau > 0


def test_hajek_vectors_bounded(report):
    for v in report.vectors:
        if v.scheme is WeightScheme.HAJEK:
            assert v.rho <= 1.0
        assert v.rho == pytest.approx(math.hypot(v.alpha, v.beta))
    assert len(report.vectors) == 4
    assert len(report.units) == 2 * 35


def test_radians_outcome_has_no_minutes(dataset):
    report = analyze_dataset(dataset, schemes=[WeightScheme.HAJEK])
    assert [r.scheme for r in report.results] == [WeightScheme.HAJEK]
    assert report.results[0].tau_minutes is None
    assert report.outcome_kind is OutcomeKind.RADIANS


# ============================================================
# Reporting
# ============================================================

def test_csv_report_round_trips(report):
    frame = pd.read_csv(io.StringIO(render_report(report, "csv")), float_precision="round_trip")
    assert list(frame.columns) == RESULT_COLUMNS
    for _, row in frame.iterrows():
        result = report.result(row["scheme"])
        assert row["tau"] == result.tau
        assert row["se_xi"] == result.se_xi
        assert row["xi_hi"] == result.xi_hi


def test_json_report(report):
    payload = json.loads(render_report(report, "json"))
    assert payload["n_used"] == 35
    assert "units" not in payload
    assert {r["scheme"] for r in payload["results"]} == {"HT", "Hajek"}


def test_text_report_rounds_to_three_decimals(report):
    text = render_report(report, "text")
    hajek = report.result(WeightScheme.HAJEK)
    assert f"{hajek.tau:.3f}" in text
    assert f"{hajek.tau_minutes:.3f} min" in text
    assert "missing outcome: 3" in text


def test_unknown_format(report):
    with pytest.raises(DomainError):
        render_report(report, "xml")


def test_reports_are_deterministic(config_file, tmp_path):
    config = parse_config(config_file)
    for fmt in ("text", "csv", "json"):
        first = emit_report(run_analysis(config), fmt, path=tmp_path / f"a.{fmt}")
        second = emit_report(run_analysis(config), fmt, path=tmp_path / f"b.{fmt}")
        assert first == second
        assert (tmp_path / f"a.{fmt}").read_bytes() == (tmp_path / f"b.{fmt}").read_bytes()


def test_emit_report_to_stream(report):
    stream = io.StringIO()
    text = emit_report(report, "text", stream=stream)
    assert stream.getvalue() == text


def test_vector_files(report, tmp_path):
    vectors_path, weights_path = tmp_path / "vectors.csv", tmp_path / "weights.csv"
    emit_vectors(report, vectors_path, weights_path)

    vectors = pd.read_csv(vectors_path)
    assert list(vectors.columns) == VECTOR_COLUMNS
    assert set(zip(vectors["scheme"], vectors["arm"])) == {
        ("HT", "treated"), ("HT", "control"), ("Hajek", "treated"), ("Hajek", "control"),
    }

    units = pd.read_csv(weights_path)
    assert list(units.columns) == UNIT_COLUMNS
    hajek = units[units["scheme"] == "Hajek"]
    np.testing.assert_allclose(hajek.groupby("arm")["weight"].sum(), 1.0, atol=1e-12)
