import json
import math

import pytest

from core.config import load_experiment_config
from core.errors import SchemaMismatchError
from core.models import SCHEMA_VERSION
from transport_engine.cli import (
    ExitCode,
    build_parser,
    config_from_args,
    diff_reports,
    main,
    run_experiment,
    values_match,
)

COARSE_FORWARD = """
experiment = "forward"
phantom = "absorber"

[quadrature]
boundary_nodes = 16
angle_nodes = 16
time_bins = 20
"""


def write_report(path, **values):
    path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, "kind": "stability-report", **values}))
    return path


@pytest.fixture
def forward_config(tmp_path):
    path = tmp_path / "forward.toml"
    path.write_text(COARSE_FORWARD, encoding="utf-8")
    return path


@pytest.mark.unit
class TestValidateConfig:
    def test_valid_configuration(self, forward_config, capsys):
        assert main(["validate-config", "--config", str(forward_config)]) == ExitCode.SUCCESS
        assert "Configuration is valid: forward" in capsys.readouterr().out

    def test_flags_override_the_file(self, forward_config, capsys):
        code = main(["validate-config", "--config", str(forward_config), "--phantom", "gaussian"])
        assert code == ExitCode.SUCCESS
        assert load_experiment_config(forward_config, phantom="gaussian").phantom == "gaussian"

    def test_flags_override_the_environment(self, forward_config, monkeypatch):
        monkeypatch.setenv("TRANSPORT_SEED", "3")
        args = build_parser().parse_args(["run", "--config", str(forward_config), "--seed", "7"])
        assert config_from_args(args).seed == 7
        args = build_parser().parse_args(["run", "--config", str(forward_config)])
        assert config_from_args(args).seed == 3

    def test_short_horizon_is_rejected(self, tmp_path, capsys):
        path = tmp_path / "short.toml"
        path.write_text('experiment = "forward"\n\n[scene]\nhorizon = 3.0\n', encoding="utf-8")
        assert main(["validate-config", "--config", str(path)]) == ExitCode.INVALID
        assert "Error:" in capsys.readouterr().err

    def test_missing_pair_is_rejected(self, tmp_path, capsys):
        path = tmp_path / "pairless.toml"
        path.write_text('experiment = "stability-pointwise"\npair = ""\n', encoding="utf-8")
        assert main(["validate-config", "--config", str(path)]) == ExitCode.INVALID
        assert "needs a phantom pair" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate-config", "--config", str(tmp_path / "absent.toml")]) == ExitCode.INVALID
        assert "does not exist" in capsys.readouterr().err


@pytest.mark.unit
class TestListPhantoms:
    def test_catalog(self, capsys):
        assert main(["list-phantoms"]) == ExitCode.SUCCESS
        out = capsys.readouterr().out
        assert out.startswith("Phantoms:")
        assert "  constant: sigma = 0.5, isotropic k = 0.05 [M = 2, r~ = 1]" in out
        assert "Pairs:" in out
        assert "  const-bump" in out

    def test_extra_phantom_file(self, tmp_path, capsys):
        path = tmp_path / "extra.json"
        path.write_text(json.dumps({"phantoms": [{"name": "thin", "description": "thin absorber"}]}))
        assert main(["list-phantoms", "--phantom-file", str(path)]) == ExitCode.SUCCESS
        assert "  thin: thin absorber" in capsys.readouterr().out


@pytest.mark.unit
class TestDiffReports:
    def test_identical_reports(self, tmp_path):
        first = write_report(tmp_path / "a.json", rows=[{"lhs": 0.1, "passed": True}])
        second = write_report(tmp_path / "b.json", rows=[{"lhs": 0.1 * (1.0 + 1e-12), "passed": True}])
        assert diff_reports(first, second) == []
        assert main(["diff-reports", str(first), str(second)]) == ExitCode.SUCCESS

    def test_differing_reports(self, tmp_path, capsys):
        first = write_report(tmp_path / "a.json", rows=[{"lhs": 0.1}], experiment="forward")
        second = write_report(tmp_path / "b.json", rows=[{"lhs": 0.2}, {"lhs": 0.3}], experiment="forward")
        differences = diff_reports(first, second)
        assert [difference.path for difference in differences] == ["rows.length", "rows[0].lhs"]
        assert main(["diff-reports", str(first), str(second)]) == ExitCode.REPORTS_DIFFER
        assert "rows[0].lhs: 0.1 != 0.2" in capsys.readouterr().out

    def test_relative_tolerance_flag(self, tmp_path):
        first = write_report(tmp_path / "a.json", value=1.0)
        second = write_report(tmp_path / "b.json", value=1.001)
        assert main(["diff-reports", str(first), str(second)]) == ExitCode.REPORTS_DIFFER
        assert main(["diff-reports", str(first), str(second), "--rtol", "0.01"]) == ExitCode.SUCCESS

    def test_schema_mismatch(self, tmp_path, capsys):
        first = write_report(tmp_path / "a.json", value=1.0)
        second = tmp_path / "b.json"
        second.write_text(json.dumps({"schema_version": "0.1", "value": 1.0}))
        assert main(["diff-reports", str(first), str(second)]) == ExitCode.INVALID
        assert "schema version" in capsys.readouterr().err

    def test_report_without_schema_version(self, tmp_path, capsys):
        first = write_report(tmp_path / "a.json", value=1.0)
        second = tmp_path / "b.json"
        second.write_text(json.dumps({"kind": "stability-report", "value": 1.0}))
        with pytest.raises(SchemaMismatchError, match="no schema version"):
            diff_reports(first, second)
        assert main(["diff-reports", str(second), str(first)]) == ExitCode.INVALID
        assert "no schema version" in capsys.readouterr().err

    def test_table_sidecar_without_schema_version(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        first.write_text("name,value\nx,1.0\n")
        second.write_text("name,value\nx,1.0\n")
        (tmp_path / "a.json").write_text(json.dumps({"kind": "summary"}))
        with pytest.raises(SchemaMismatchError, match="no schema version"):
            diff_reports(first, second)

    def test_table_against_report(self, tmp_path):
        first = write_report(tmp_path / "a.json", value=1.0)
        table = tmp_path / "rows.csv"
        table.write_text("name,value\nx,1.0\n")
        assert main(["diff-reports", str(first), str(table)]) == ExitCode.INVALID
        assert main(["diff-reports", str(first), str(tmp_path / "missing.json")]) == ExitCode.INVALID

    def test_tables_compare_numerically(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        first.write_text("name,value\nx,1.0\n")
        second.write_text("name,value\nx,1.00\n")
        assert diff_reports(first, second) == []

    def test_values_match(self):
        assert values_match("1.0", 1.0)
        assert values_match(math.nan, "nan")
        assert not values_match(1.0, 1.1)
        assert values_match("gaussian", "gaussian")
        assert not values_match(1.0, math.nan)


@pytest.mark.integration
class TestRun:
    def test_forward_experiment(self, forward_config, tmp_path):
        out = tmp_path / "out"
        context = run_experiment(load_experiment_config(forward_config), out)
        quantities = {row["quantity"]: row["value"] for row in context.summary}
        assert quantities["tail_bound"] == 0.0
        assert quantities["mass.ballistic"] == pytest.approx(math.exp(-1.0), rel=0.02)
        assert (out / "summary.csv").is_file()
        assert (out / "response.csv").is_file()

    def test_run_command(self, forward_config, tmp_path, capsys):
        out = tmp_path / "cli-out"
        assert main(["run", "--config", str(forward_config), "--out", str(out)]) == ExitCode.SUCCESS
        assert "mass.ballistic" in capsys.readouterr().out
        assert (out / "summary.csv").is_file()

    def test_runs_are_reproducible(self, forward_config, tmp_path):
        config = load_experiment_config(forward_config)
        run_experiment(config, tmp_path / "first")
        run_experiment(config, tmp_path / "second")
        assert diff_reports(tmp_path / "first" / "summary.csv", tmp_path / "second" / "summary.csv") == []
