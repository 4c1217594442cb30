import pytest

from pkgwave.config import ConfigError, ScenarioConfig


class TestDefaults:
    def test_empty_is_baseline(self, tmp_path):
        p = tmp_path / "empty.yaml"
        p.write_text("")
        cfg = ScenarioConfig.load(p)
        model = cfg.build_model()
        assert model.layer("silicon").thickness == 0.489e-3
        assert len(model.ports) == 4 and {p.kind for p in model.ports} == {"monopole"}
        assert cfg.band == (55e9, 65e9) and cfg.dim == 2

    def test_frequencies(self):
        f = ScenarioConfig.from_dict({}).frequencies()
        assert f[0] == 55e9 and f[-1] == 65e9

    def test_policy_and_settings(self):
        cfg = ScenarioConfig.from_dict({"solver": {"cells_per_wavelength": 20, "max_steps": 1000}})
        assert cfg.policy().cells_per_wavelength == 20
        assert cfg.run_settings().max_steps == 1000


class TestValidation:
    @pytest.mark.parametrize("data, match", [
        ({"bogus": 1}, "unknown key"),
        ({"solver": {"bogus": 1}}, "unknown key"),
        ({"solver": {"dim": 4}}, "dim"),
        ({"solver": {"max_steps": -5}}, "positive"),
        ({"solver": {"max_steps": 2.5}}, "integer"),
        ({"solver": {"energy_decay": 2}}, "energy_decay"),
        ({"solver": {"pml_cells": 4}}, "pml_cells"),
        ({"band": [65e9, 55e9]}, "f_lo < f_hi"),
        ({"band": [55e9]}, "band"),
        ({"ports": {"antenna": "horn"}}, "antenna"),
        ({"ports": {"tune": "yes"}}, "tune"),
        ({"package": {"silicon": -1e-3}}, "invalid package"),
        ({"materials": {"silicon": {"colour": 1}}}, "invalid package"),
        ({"sweep": {"axes": {"silicon": []}}}, "non-empty"),
        ({"solver": {"cfl_safety": "fast"}}, "number"),
    ])
    def test_rejected_before_solve(self, data, match):
        with pytest.raises(ConfigError, match=match):
            ScenarioConfig.from_dict(data)

    def test_invalid_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("package: [unclosed")
        with pytest.raises(ConfigError, match="YAML"):
            ScenarioConfig.load(p)

    def test_exponent_literals_are_numbers(self, tmp_path):
        p = tmp_path / "exp.yaml"
        p.write_text("band: [55e9, 65e9]\npackage:\n  silicon: 1e-4\n")
        cfg = ScenarioConfig.load(p)
        assert cfg.band == (55e9, 65e9)
        assert cfg.build_model().layer("silicon").thickness == 1e-4

    def test_top_level_list(self, tmp_path):
        p = tmp_path / "list.yaml"
        p.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            ScenarioConfig.load(p)


class TestHash:
    def test_stable(self):
        assert ScenarioConfig.from_dict({}).hash() == ScenarioConfig.from_dict({}).hash()

    def test_physics_changes_hash(self):
        assert ScenarioConfig.from_dict({}).hash() != ScenarioConfig.from_dict(
            {"package": {"silicon": 0.3e-3}}).hash()

    @pytest.mark.parametrize("data", [{"output": "elsewhere"}, {"solver": {"threads": 4}}])
    def test_bookkeeping_does_not_change_hash(self, data):
        assert ScenarioConfig.from_dict({}).hash() == ScenarioConfig.from_dict(data).hash()

    def test_with_updates(self):
        cfg = ScenarioConfig.from_dict({}).with_updates(**{"solver.dim": 3})
        assert cfg.dim == 3

    def test_material_override(self):
        cfg = ScenarioConfig.from_dict({"materials": {"silicon": {"loss_tangent": 0.01}}})
        assert cfg.build_model().library["silicon"].loss_tangent == 0.01

    def test_yaml_round_trip(self, tmp_path):
        cfg = ScenarioConfig.from_dict({"package": {"silicon": 0.3e-3}})
        p = tmp_path / "c.yaml"
        p.write_text(cfg.to_yaml())
        assert ScenarioConfig.load(p).hash() == cfg.hash()
