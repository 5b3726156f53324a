"""Tests for experiment configuration."""

from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from entrofact.config import ExperimentConfig, parse_bool, parse_range
from entrofact.errors import EXIT_USAGE, ConfigError
from entrofact.lattice import Region


def _write(tmp_path: Path, data: object) -> Path:
    path = tmp_path / "entrofact.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


class TestParsers:
    """Tests for scalar parsing helpers."""

    @pytest.mark.parametrize(
        "value,expected",
        [("yes", True), ("On", True), ("1", True), ("false", False), ("nope", False), (1, True), (None, True)],
    )
    def test_parse_bool(self, value: object, expected: bool) -> None:
        """Test YAML boolean spellings, with None falling back to the default."""
        assert parse_bool(value, default=True) is expected

    @pytest.mark.parametrize(
        "text,expected",
        [("2..5", [2, 3, 4, 5]), ("7", [7]), ("2,4,6", [2, 4, 6]), (" 3..3 ", [3])],
    )
    def test_parse_range(self, text: str, expected: list[int]) -> None:
        """Test ranges, single values and lists."""
        assert parse_range(text) == expected

    def test_parse_range_invalid(self) -> None:
        """Test that garbage is a usage error."""
        with pytest.raises(ConfigError, match="Invalid integer range"):
            parse_range("a..b")


class TestLoad:
    """Tests for reading configuration files."""

    def test_defaults_when_absent(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that a missing default file yields the defaults."""
        monkeypatch.chdir(tmp_path)
        config = ExperimentConfig.load()
        assert config.model_name == "ising"
        assert config.seed is None
        assert config.weights_preset == "even-odd"

    def test_explicit_missing_file(self, tmp_path: Path) -> None:
        """Test that an explicitly named file must exist."""
        with pytest.raises(ConfigError, match="not found"):
            ExperimentConfig.load(tmp_path / "absent.yaml")

    def test_sections(self, tmp_path: Path) -> None:
        """Test that every section is read."""
        path = _write(
            tmp_path,
            {
                "model": {"name": "potts", "q": 3, "beta": 0.7, "fields": [0.1, 0.0, -0.1]},
                "region": {"kind": "rectangle", "shape": [2, 3]},
                "boundary": {"kind": "free"},
                "weights": {"preset": "blocks", "max_size": 3},
                "checks": "structural",
                "optimizer": {"starts": 4, "samples": 10},
                "dynamics": {"tv_times": [0, 1], "ssm_relax_hard": "yes"},
                "seed": 42,
                "logging": {"level": "debug"},
            },
        )
        config = ExperimentConfig.load(path)
        assert config.model_name == "potts"
        assert config.q == 3
        assert config.fields == [0.1, 0.0, -0.1]
        assert config.region_shape == [2, 3]
        assert config.weights_max_size == 3
        assert config.checks == ["structural"]
        assert config.optimizer_starts == 4
        assert config.tv_times == [0.0, 1.0]
        assert config.ssm_relax_hard is True
        assert config.seed == 42
        assert config.log_level == "DEBUG"

    def test_invalid_yaml(self, tmp_path: Path) -> None:
        """Test that malformed YAML is a configuration error."""
        path = tmp_path / "bad.yaml"
        path.write_text("model: [unclosed\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="Invalid YAML"):
            ExperimentConfig.load(path)

    def test_root_must_be_mapping(self, tmp_path: Path) -> None:
        """Test that a list at the root is refused."""
        with pytest.raises(ConfigError, match="mapping"):
            ExperimentConfig.load(_write(tmp_path, [1, 2]))

    @pytest.mark.parametrize(
        "data,match",
        [
            ({"model": {"name": "heisenberg"}}, "model.name"),
            ({"model": {"q": 1}}, "at least 2"),
            ({"model": {"name": "hardcore", "lam": 0}}, "lam must be positive"),
            ({"model": {"name": "file"}}, "model.path"),
            ({"weights": {"preset": "explicit", "blocks": [[[[0]], -1.0]]}}, "nonnegative"),
            ({"region": {"size": 0}}, "region.size"),
            ({"threads": 0}, "threads"),
            ({"model": {"beta": "hot"}}, "Invalid config value"),
        ],
    )
    def test_validation(self, tmp_path: Path, data: dict, match: str) -> None:
        """Test that bad values are rejected with a readable message."""
        with pytest.raises(ConfigError, match=match) as excinfo:
            ExperimentConfig.load(_write(tmp_path, data))
        assert excinfo.value.exit_code == EXIT_USAGE


class TestOverridesAndHash:
    """Tests for command-line overrides and the result hash."""

    def test_overrides_win(self, tmp_path: Path) -> None:
        """Test that flags replace file values."""
        config = ExperimentConfig(seed=1)
        config.apply_overrides(seed=9, threads=2, cap_states=64, output_dir=tmp_path)
        assert (config.seed, config.threads, config.cap_states, config.output_dir) == (9, 2, 64, tmp_path)

    def test_override_validated(self) -> None:
        """Test that overrides go through validation."""
        with pytest.raises(ConfigError):
            ExperimentConfig().apply_overrides(cap_states=0)

    def test_hash_ignores_output_location(self, tmp_path: Path) -> None:
        """Test that output directory and thread count do not change the hash."""
        a = ExperimentConfig(seed=3)
        b = ExperimentConfig(seed=3, output_dir=tmp_path, threads=4)
        assert a.config_hash() == b.config_hash()

    def test_hash_tracks_results(self) -> None:
        """Test that result-relevant settings change the hash."""
        assert ExperimentConfig(beta=0.1).config_hash() != ExperimentConfig(beta=0.2).config_hash()

    def test_save_and_load(self, tmp_path: Path) -> None:
        """Test that a saved config loads back with the same hash."""
        config = ExperimentConfig(model_name="hardcore", lam=2.5, seed=12, checks=["dynamics"])
        path = tmp_path / "nested" / "entrofact.yaml"
        config.save(path)
        loaded = ExperimentConfig.load(path)
        assert loaded.lam == 2.5
        assert loaded.checks == ["dynamics"]
        assert loaded.config_hash() == config.config_hash()


class TestBuilders:
    """Tests for building objects from settings."""

    def test_chain_with_constant_boundary(self) -> None:
        """Test the default region and boundary."""
        config = ExperimentConfig(region_size=3, boundary_spin=1)
        region = config.build_region()
        assert region == Region.chain(3)
        (tau,) = config.build_boundaries(region)
        assert tau.spin_at((-1,)) == 1
        assert tau.spin_at((3,)) == 1

    def test_sweep_boundaries(self) -> None:
        """Test that the sweep enumerates every boundary condition."""
        config = ExperimentConfig(region_size=2, boundary_kind="sweep")
        assert len(config.build_boundaries(config.build_region())) == 4

    def test_explicit_boundary_must_cover(self) -> None:
        """Test that an incomplete assignment is refused."""
        config = ExperimentConfig(region_size=2, boundary_kind="explicit", boundary_assignment=[[[-1], 0]])
        with pytest.raises(ConfigError, match="cover"):
            config.build_boundaries(config.build_region())

    def test_points_region_requires_points(self) -> None:
        """Test that an empty point list is refused."""
        with pytest.raises(ConfigError, match="empty"):
            ExperimentConfig(region_kind="points").build_region()

    @pytest.mark.parametrize("preset,count", [("singletons", 4), ("even-odd", 2), ("full", 1), ("blocks", 10)])
    def test_weight_presets(self, preset: str, count: int) -> None:
        """Test the number of positive blocks per preset on a chain of four."""
        config = ExperimentConfig(weights_preset=preset, weights_max_size=2)
        assert len(config.build_weights(config.build_region()).positive()) == count

    def test_explicit_weights_outside_volume(self) -> None:
        """Test that blocks outside the region are a configuration error."""
        config = ExperimentConfig(weights_preset="explicit", weights_blocks=[[[[9]], 1.0]])
        with pytest.raises(ConfigError, match="not inside"):
            config.build_weights(config.build_region())

    def test_models(self) -> None:
        """Test that every named model builds."""
        assert ExperimentConfig(model_name="potts", q=3).build_model().q == 3
        assert ExperimentConfig(model_name="hardcore").build_model().has_hard_constraints
        assert ExperimentConfig(model_name="colorings", q=3).build_model().q == 3

    def test_optimizer_settings(self) -> None:
        """Test that the seed and budget flow into the optimizer."""
        optimizer = ExperimentConfig(seed=5, optimizer_starts=3).optimizer_config()
        assert optimizer.seed == 5
        assert optimizer.starts == 3

    def test_predicted_states(self) -> None:
        """Test q^|V| for the configured model and region."""
        assert ExperimentConfig(model_name="potts", q=3, region_size=4).predicted_states() == 81
