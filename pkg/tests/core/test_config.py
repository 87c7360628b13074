from pathlib import Path

import pytest

from core.config import ExperimentConfig, ExperimentSettingsFactory, load_experiment_config, read_config_file
from core.errors import ConfigValidationError
from core.types import ExperimentKind, SolverBackend


def write_toml(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


@pytest.mark.unit
class TestExperimentConfig:
    def test_defaults_validate(self):
        config = load_experiment_config()
        assert config.experiment is ExperimentKind.FORWARD
        assert config.scene.horizon == 5.0
        assert config.kernel_exponent == 1.2
        assert config.hypothesis_errors() == []

    def test_environment_overrides_defaults(self, monkeypatch):
        monkeypatch.setenv("TRANSPORT_SCENE__HORIZON", "6.5")
        monkeypatch.setenv("TRANSPORT_SEED", "7")
        config = load_experiment_config()
        assert config.scene.horizon == 6.5
        assert config.seed == 7

    def test_flags_win_over_environment(self, monkeypatch):
        monkeypatch.setenv("TRANSPORT_SEED", "3")
        monkeypatch.setenv("TRANSPORT_PHANTOM", "absorber")
        monkeypatch.setenv("TRANSPORT_SCENE__HORIZON", "6.5")
        config = load_experiment_config(seed=7, phantom=None)
        assert config.seed == 7
        assert config.phantom == "absorber"
        assert config.scene.horizon == 6.5
        assert isinstance(config, ExperimentConfig) and type(config) is ExperimentConfig

    def test_environment_still_wins_over_file(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TRANSPORT_SEED", "3")
        path = write_toml(tmp_path / "run.toml", "seed = 11\n")
        assert load_experiment_config(path).seed == 3
        assert load_experiment_config(path, seed=7).seed == 7

    def test_flag_errors_carry_their_location(self, monkeypatch):
        monkeypatch.setenv("TRANSPORT_SEED", "3")
        with pytest.raises(ConfigValidationError) as excinfo:
            load_experiment_config(threads=0)
        assert excinfo.value.messages[0].startswith("threads")

    def test_toml_file_is_read(self, tmp_path):
        path = write_toml(
            tmp_path / "run.toml",
            'experiment = "forward"\nphantom = "absorber"\n\n[quadrature]\nboundary_nodes = 32\n',
        )
        config = load_experiment_config(path)
        assert config.phantom == "absorber"
        assert config.quadrature.boundary_nodes == 32
        assert config.quadrature.angle_nodes == 128

    def test_overrides_win_over_file(self, tmp_path):
        path = write_toml(tmp_path / "run.toml", 'phantom = "absorber"\n')
        config = load_experiment_config(path, phantom="gaussian", seed=None)
        assert config.phantom == "gaussian"
        assert config.seed == 0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigValidationError, match="does not exist"):
            read_config_file(tmp_path / "absent.toml")

    def test_unparsable_file(self, tmp_path):
        path = write_toml(tmp_path / "broken.toml", "phantom = [\n")
        with pytest.raises(ConfigValidationError, match="could not be parsed"):
            load_experiment_config(path)

    def test_short_horizon_cites_the_diameter(self):
        with pytest.raises(ConfigValidationError) as excinfo:
            load_experiment_config(scene={"horizon": 1.0})
        assert any("diam(X) = 2" in message for message in excinfo.value.messages)

    def test_scattering_experiments_need_twice_the_diameter(self):
        with pytest.raises(ConfigValidationError, match="2 diam"):
            load_experiment_config(experiment="scatter-k", scene={"horizon": 3.0})

    def test_ballistic_experiment_accepts_a_single_diameter(self):
        config = load_experiment_config(experiment="ballistic-sigma", scene={"horizon": 3.0})
        assert config.scene.horizon == 3.0

    def test_all_problems_are_collected(self):
        with pytest.raises(ConfigValidationError) as excinfo:
            load_experiment_config(scene={"horizon": 1.0}, kernels={"p": 1.6}, quadrature={"angle_nodes": 18})
        messages = excinfo.value.messages
        assert len(messages) == 3
        assert any(message.startswith("kernels.p") for message in messages)
        assert any(message.startswith("quadrature.angle_nodes") for message in messages)

    def test_field_errors_carry_their_location(self):
        with pytest.raises(ConfigValidationError) as excinfo:
            load_experiment_config(quadrature={"boundary_nodes": 4})
        assert excinfo.value.messages[0].startswith("quadrature.boundary_nodes")

    def test_closed_form_order_limit(self):
        with pytest.raises(ConfigValidationError, match="picard"):
            load_experiment_config(solver={"order": 4})
        config = load_experiment_config(solver={"order": 4, "backend": "picard"})
        assert config.solver.backend is SolverBackend.PICARD

    def test_three_dimensional_runs_are_limited(self):
        with pytest.raises(ConfigValidationError, match="d = 2 only"):
            load_experiment_config(scene={"domain": {"kind": "unit-ball"}})
        config = load_experiment_config(experiment="multiple-tail", scene={"domain": {"kind": "unit-ball"}})
        assert config.kernel_exponent == 1.15

    def test_ellipse_needs_axes(self):
        with pytest.raises(ConfigValidationError, match="semi_axes"):
            load_experiment_config(scene={"domain": {"kind": "ellipse"}})
        config = load_experiment_config(scene={"domain": {"kind": "ellipse", "semi_axes": [1.0, 0.5]}})
        assert config.scene.domain.diameter == 2.0

    def test_mollifier_ladder_is_sorted_coarse_to_fine(self):
        config = load_experiment_config(scene={"mollifier_ladder": [0.05, 0.2, 0.1]})
        assert config.scene.mollifier_ladder == (0.2, 0.1, 0.05)

    def test_hash_ignores_output_location(self, tmp_path):
        first = ExperimentConfig(output_dir=tmp_path / "a", threads=1)
        second = ExperimentConfig(output_dir=tmp_path / "b", threads=4)
        third = ExperimentConfig(scene={"horizon": 6.0})
        assert first.config_hash() == second.config_hash()
        assert first.config_hash() != third.config_hash()
        assert len(first.config_hash()) == 16


@pytest.mark.unit
class TestExperimentSettingsFactory:
    def test_experiment_defaults_are_merged_on_load(self):
        config = load_experiment_config(experiment="ballistic-sigma")
        assert config.phantom == "gaussian-absorber"
        assert config.solver.order == 0

    def test_explicit_values_beat_experiment_defaults(self):
        config = load_experiment_config(experiment="scatter-k", solver={"order": 2}, scene={"horizon": 6.0})
        assert config.solver.order == 2
        assert config.scene.point_source is True
        assert config.scene.horizon == 6.0

    def test_stability_experiments_get_a_pair(self):
        assert ExperimentSettingsFactory.get_experiment_config("stability-pointwise").pair == "const-bump"
        assert ExperimentSettingsFactory.get_experiment_config("stability-sobolev").pair == "gaussian-bump"

    def test_keyword_overrides(self):
        config = ExperimentSettingsFactory.get_experiment_config(
            ExperimentKind.MULTIPLE_TAIL, scene={"horizon": 7.0}
        )
        assert config.scene.horizon == 7.0
        assert config.scene.point_source is True

    def test_invalid_experiment(self):
        with pytest.raises(ValueError, match="Invalid experiment: nope, valid experiments are"):
            ExperimentSettingsFactory.experiment_defaults("nope")

    def test_invalid_experiment_in_config(self):
        with pytest.raises(ConfigValidationError, match="experiment: Invalid experiment"):
            load_experiment_config(experiment="nope")

    def test_defaults_are_not_shared(self):
        defaults = ExperimentSettingsFactory.experiment_defaults("forward")
        defaults["solver"] = {"order": 0}
        assert ExperimentSettingsFactory.experiment_defaults("forward")["solver"] == {"order": 2}
