"""Tests for run configuration loading, validation and hashing."""

from pathlib import Path

import pytest

from src.utils.config import ConfigError, ConfigLoader, RunConfig, flatten

DEFAULT_YAML = Path(__file__).resolve().parents[2] / "config" / "default.yaml"


@pytest.fixture
def write_yaml(tmp_path):
    def _write(text: str) -> Path:
        path = tmp_path / "run.yaml"
        path.write_text(text)
        return path

    return _write


class TestDefaults:
    def test_shipped_yaml_matches_builtin_defaults(self):
        assert ConfigLoader(DEFAULT_YAML).load() == RunConfig()

    def test_no_path_means_defaults(self):
        assert ConfigLoader().load() == RunConfig()

    def test_flat_keys_are_sorted_and_dotted(self):
        flat = RunConfig().to_flat()
        assert list(flat) == sorted(flat)
        assert flat["sensors.ground.max_range"] == 60.0
        assert flat["solver.weight_mode"] == "density_deficit"


class TestLoading:
    def test_nested_and_dotted_keys(self, write_yaml):
        path = write_yaml("solver:\n  min_gain: 0.02\npipeline.seed: 9\nsensors:\n  aerial:\n    max_range: 50\n")
        config = ConfigLoader(path).load()
        assert config.solver.min_gain == 0.02
        assert config.seed == 9
        assert config.aerial_sensor.max_range == 50.0
        assert config.ground_sensor == RunConfig().ground_sensor

    def test_empty_file_is_defaults(self, write_yaml):
        assert ConfigLoader(write_yaml("")).load() == RunConfig()

    def test_integer_strings_coerced(self):
        assert RunConfig.from_flat({"solver.max_views": "12"}).solver.max_views == 12

    @pytest.mark.parametrize(
        "flat, message",
        [
            ({"solver.speed": 1}, "unknown config key"),
            ({"nope.voxel_size": 1}, "unknown config key"),
            ({"meshify.voxel_size": 0}, "minimum"),
            ({"meshify.truncation_voxels": 1.5}, "minimum"),
            ({"solver.target_coverage": 1.2}, "maximum"),
            ({"solver.weight_mode": "entropy"}, "not one of"),
            ({"solver.max_views": 2.5}, "expected int"),
            ({"pipeline.seed": True}, "expected int"),
            ({"candidates.alt_min": 30.0}, "alt_min"),
            ({"sensors.ground.max_incidence": 120}, "max_incidence"),
        ],
    )
    def test_invalid_settings(self, flat, message):
        with pytest.raises(ConfigError, match=message):
            RunConfig.from_flat(flat)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            ConfigLoader(tmp_path / "absent.yaml").load()

    def test_bad_yaml(self, write_yaml):
        with pytest.raises(ConfigError, match="error parsing"):
            ConfigLoader(write_yaml("solver: [unclosed\n")).load()

    def test_non_mapping(self, write_yaml):
        with pytest.raises(ConfigError, match="mapping"):
            ConfigLoader(write_yaml("- 1\n- 2\n")).load()


class TestHashing:
    def test_stable_across_instances(self):
        assert RunConfig().config_hash() == RunConfig().config_hash()
        assert len(RunConfig().config_hash()) == 32

    def test_any_change_changes_hash(self):
        base = RunConfig()
        assert base.with_overrides(**{"pipeline.seed": 1}).config_hash() != base.config_hash()
        assert base.with_overrides(**{"solver.min_gain": 0.0500001}).config_hash() != base.config_hash()

    def test_dump_round_trip(self, write_yaml):
        config = RunConfig().with_overrides(**{"candidates.standoff": 3.5, "solver.weight_mode": "uniform"})
        loaded = ConfigLoader(write_yaml(ConfigLoader.dump(config))).load()
        assert loaded == config
        assert loaded.config_hash() == config.config_hash()


class TestFlatten:
    def test_mixed_nesting(self):
        assert flatten({"a": {"b": 1, "c.d": 2}, "e.f": 3}) == {"a.b": 1, "a.c.d": 2, "e.f": 3}
