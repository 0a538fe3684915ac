"""Command-line interface: commands, exit codes, file formats."""

import csv
import json
import math

import pytest

from amdi_hybrid import cli
from amdi_hybrid.cli import main

RATE_DOC = """
[source]
mode = "hybrid"
purity = 1.0
mu = 0.088
nu = 0.087
omega = 0.036
p_signal = 0.333
p_nu = 0.007
p_omega = 0.038

[protocol]
n_pulses = 1e12
pairing_window_s = 0.315e-6

[run]
seed = 7
"""

QUICK_OPT = """
[source]
mode = "hybrid"

[protocol]
n_pulses = 1e10

[optimizer]
n_starts = 2
max_evaluations = 150

[run]
seed = 7
"""

# frozen column order of CSV schema version 1; reordering is a breaking change
V1_COLUMNS = (
    "schema_version", "source_mode", "purity", "n_pulses", "distance_km",
    "seed", "rate_per_pulse", "rate_per_second", "secret_bits", "plob_bound",
    "max_distance_km", "mu", "nu", "omega", "p_signal", "p_nu", "p_omega",
    "window_s", "phase_error_upper", "lambda_ec", "eps_sec", "eps_cor",
    "eta_detector", "dark_count_prob", "attenuation_db_per_km", "rep_rate_hz",
    "e_hom", "drift_rad_per_s", "detuning_hz", "phase_slices",
    "ec_efficiency", "epsilon",
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestSerialization:
    def test_non_finite_sentinels(self):
        text = cli.dumps({"a": math.inf, "b": -math.inf, "c": math.nan})
        data = json.loads(text)
        assert data == {"a": "inf", "b": "-inf", "c": "nan"}

    def test_tuple_keys_flatten(self):
        text = cli.dumps({"counts": {("sig", "vac"): 3}})
        assert json.loads(text) == {"counts": {"sig,vac": 3}}

    def test_sorted_and_newline_terminated(self):
        text = cli.dumps({"b": 1, "a": 2})
        assert text.endswith("\n")
        assert text.index('"a"') < text.index('"b"')

    def test_csv_floats_round_trip(self):
        value = 0.1 + 0.2
        rows = [dict.fromkeys(V1_COLUMNS, 0)]
        rows[0]["rate_per_pulse"] = value
        rendered = cli.render_csv(rows)
        parsed = list(csv.DictReader(rendered.splitlines()))
        assert float(parsed[0]["rate_per_pulse"]) == value

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        target = tmp_path / "x.json"
        cli.atomic_write(str(target), "{}\n")
        assert target.read_text() == "{}\n"
        assert [p.name for p in tmp_path.iterdir()] == ["x.json"]


class TestRate:
    def test_reference_point_positive_and_matches_library(self, tmp_path):
        config = write(tmp_path, "c.toml", RATE_DOC)
        out = tmp_path / "r.json"
        assert main(["rate", "--config", config, "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        rate = data["report"]["rate_per_pulse"]
        assert rate > 0.0

        from amdi_hybrid.config import build_space, explicit_point, load_config
        from amdi_hybrid.optimizer import evaluate_point
        loaded = load_config(config)
        report = evaluate_point(explicit_point(loaded), build_space(loaded),
                                loaded.distance_km)
        assert rate == report.rate_per_pulse

    def test_identical_runs_identical_bytes(self, tmp_path):
        config = write(tmp_path, "c.toml", RATE_DOC)
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        assert main(["rate", "--config", config, "--out", str(out_a)]) == 0
        assert main(["rate", "--config", config, "--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_stdout_when_no_out(self, tmp_path, capsys):
        config = write(tmp_path, "c.toml", RATE_DOC)
        assert main(["rate", "--config", config]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["command"] == "rate"
        assert "effective_config" in data

    def test_decoy_ordering_violation_exits_2(self, tmp_path, capsys):
        config = write(tmp_path, "c.toml",
                       RATE_DOC.replace("nu = 0.087", "nu = 0.02"))
        assert main(["rate", "--config", config]) == 2
        err = capsys.readouterr().err
        assert "nu > omega > 0" in err

    def test_missing_point_exits_2(self, tmp_path, capsys):
        config = write(tmp_path, "c.toml", "[protocol]\nn_pulses = 1e12\n")
        assert main(["rate", "--config", config]) == 2
        assert "missing" in capsys.readouterr().err

    def test_estimation_failure_exits_3(self, tmp_path, capsys):
        config = write(tmp_path, "c.toml", RATE_DOC)
        out = tmp_path / "r.json"
        code = main(["rate", "--config", config, "--n-pulses", "1e6",
                     "--out", str(out)])
        assert code == 3
        assert "estimation failed" in capsys.readouterr().err
        data = json.loads(out.read_text())
        assert data["report"]["failure_reason"] is not None
        assert data["report"]["rate_per_pulse"] == 0.0

    def test_unknown_section_exits_2(self, tmp_path, capsys):
        config = write(tmp_path, "c.toml", "[nonsense]\nx = 1\n")
        assert main(["rate", "--config", config]) == 2
        assert "unknown config section" in capsys.readouterr().err

    def test_missing_config_file_exits_2(self, tmp_path, capsys):
        assert main(["rate", "--config", str(tmp_path / "nope.toml")]) == 2
        assert "cannot read config file" in capsys.readouterr().err

    def test_wcs_mode_runs(self, tmp_path):
        config = write(tmp_path, "c.toml", RATE_DOC)
        out = tmp_path / "r.json"
        code = main(["rate", "--config", config, "--source", "wcs",
                     "--out", str(out)])
        assert code == 0
        data = json.loads(out.read_text())
        assert data["effective_config"]["source_mode"] == "wcs"
        assert data["report"]["rate_per_pulse"] >= 0.0

    def test_bad_flag_value_exits_2(self, tmp_path):
        config = write(tmp_path, "c.toml", RATE_DOC)
        with pytest.raises(SystemExit) as excinfo:
            main(["rate", "--config", config, "--source", "fibre"])
        assert excinfo.value.code == 2


class TestOptimizeCommand:
    def test_quick_run_and_determinism(self, tmp_path):
        doc = QUICK_OPT.replace("n_starts = 2", "n_starts = 3")
        doc = doc.replace("max_evaluations = 150", "max_evaluations = 250")
        config = write(tmp_path, "c.toml", doc)
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        args = ["optimize", "--config", config, "--distance", "50"]
        assert main(args + ["--out", str(out_a)]) == 0
        assert main(args + ["--out", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        data = json.loads(out_a.read_text())
        assert data["evaluations"] > 0
        assert data["best_point"]["nu"] > data["best_point"]["omega"]
        assert data["report"]["rate_per_pulse"] > 0.0


@pytest.fixture(scope="module")
def sweep_outputs(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("sweep")
    doc = QUICK_OPT + "distances = [0.0, 100.0]\ninclude_baseline = true\n"
    config = write(tmp_path, "c.toml", doc)
    out = tmp_path / "sweep.csv"
    figure = tmp_path / "sweep.png"
    code = main(["sweep", "--config", config, "--out", str(out),
                 "--figure", str(figure)])
    return code, out, figure, tmp_path


class TestSweepCommand:
    def test_exit_and_files(self, sweep_outputs):
        code, out, figure, _ = sweep_outputs
        assert code == 0
        assert out.exists()
        assert figure.stat().st_size > 0

    def test_schema_header_frozen(self, sweep_outputs):
        _, out, _, _ = sweep_outputs
        header = out.read_text().splitlines()[0]
        assert header == ",".join(V1_COLUMNS)

    def test_rows_and_ordering(self, sweep_outputs):
        _, out, _, _ = sweep_outputs
        rows = list(csv.DictReader(out.read_text().splitlines()))
        assert len(rows) == 4
        assert all(row["schema_version"] == "1" for row in rows)
        by_mode = {}
        for row in rows:
            key = (row["source_mode"], float(row["distance_km"]))
            by_mode[key] = float(row["rate_per_pulse"])
        for km in (0.0, 100.0):
            assert by_mode[("hybrid", km)] >= by_mode[("wcs", km)]

    def test_max_distance_populated(self, sweep_outputs):
        _, out, _, _ = sweep_outputs
        rows = list(csv.DictReader(out.read_text().splitlines()))
        for row in rows:
            assert float(row["max_distance_km"]) > 100.0

    def test_no_temp_files_left(self, sweep_outputs):
        _, out, _, tmp_path = sweep_outputs
        leftovers = [p for p in tmp_path.iterdir()
                     if p.name.startswith(".tmp-")]
        assert leftovers == []

    def test_empty_grid_header_only(self, tmp_path, capsys):
        config = write(tmp_path, "c.toml", "[run]\ndistances = []\n")
        out = tmp_path / "empty.csv"
        assert main(["sweep", "--config", config, "--out", str(out)]) == 0
        assert out.read_text() == ",".join(V1_COLUMNS) + "\n"

    def test_figure_with_empty_grid_exits_2(self, tmp_path, capsys):
        config = write(tmp_path, "c.toml", "[run]\ndistances = []\n")
        out = tmp_path / "empty.csv"
        figure = tmp_path / "fig.png"
        code = main(["sweep", "--config", config, "--out", str(out),
                     "--figure", str(figure)])
        assert code == 2
        assert not out.exists()
        assert not figure.exists()
        assert "empty sweep" in capsys.readouterr().err


class TestCompareCommand:
    def test_structure_and_sentinels(self, tmp_path):
        doc = QUICK_OPT.replace("[run]\nseed = 7",
                                "[run]\nseed = 7\ndistance_km = 100.0")
        doc = doc.replace("n_starts = 2", "n_starts = 1")
        doc = doc.replace("max_evaluations = 150", "max_evaluations = 120")
        config = write(tmp_path, "c.toml", doc)
        out = tmp_path / "cmp.json"
        assert main(["compare", "--config", config, "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        comparisons = data["comparisons"]
        assert set(comparisons) == {"n_pulses_1e+12", "n_pulses_1e+14"}
        for entry in comparisons.values():
            assert entry["distance_km"] == 100.0
            assert entry["rate_hybrid"] > 0.0
            ratio = entry["rate_ratio"]
            assert ratio == "inf" or ratio > 1.0
            assert entry["max_distance_hybrid_km"] > 100.0


class TestMcValidateCommand:
    def test_runs_and_passes(self, tmp_path):
        doc = RATE_DOC + "\n[mc]\nsample_size = 200000\n"
        doc = doc.replace("seed = 7", "seed = 3")
        config = write(tmp_path, "c.toml", doc)
        out = tmp_path / "mc.json"
        assert main(["mc-validate", "--config", config,
                     "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        comparison = data["comparison"]
        assert comparison["sample_size"] == 200000
        assert len(comparison["statistics"]) > 5
        for entry in comparison["statistics"]:
            assert entry["status"] in ("pass", "fail", "insufficient")
        assert comparison["all_pass"] is True
