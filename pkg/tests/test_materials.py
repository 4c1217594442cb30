import math

import pytest
from scipy.constants import epsilon_0

from pkgwave.materials import (DEFAULT_PIN_FREQUENCY, Material, MaterialLibrary, builtin_library,
                               loss_tangent_to_conductivity)


class TestConductivity:
    def test_silicon_at_60_ghz(self):
        sigma = loss_tangent_to_conductivity(11.9, 0.2517, 60e9)
        assert sigma == pytest.approx(2 * math.pi * 60e9 * epsilon_0 * 11.9 * 0.2517, rel=1e-12)
        # 10 ohm-cm silicon is about 10 S/m
        assert sigma == pytest.approx(10.0, rel=0.01)

    def test_lossless_is_zero(self):
        assert loss_tangent_to_conductivity(4.0, 0.0, 60e9) == 0.0

    @pytest.mark.parametrize("eps, tand, f", [(0.5, 0.1, 60e9), (4.0, -0.1, 60e9),
                                               (4.0, 0.1, 0.0), (math.nan, 0.1, 60e9)])
    def test_rejects_bad_inputs(self, eps, tand, f):
        with pytest.raises(ValueError):
            loss_tangent_to_conductivity(eps, tand, f)

    def test_scales_linearly_with_pin_frequency(self):
        m = builtin_library()["sio2"]
        assert m.conductivity(120e9) == pytest.approx(2 * m.conductivity(60e9), rel=1e-12)

    def test_conductor_is_infinite(self):
        assert builtin_library()["copper"].conductivity() == math.inf


class TestMaterial:
    @pytest.mark.parametrize("kwargs", [dict(rel_permittivity=0.9), dict(loss_tangent=-1e-3),
                                        dict(rel_permittivity=math.inf)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            Material("bad", **kwargs)

    def test_empty_name(self):
        with pytest.raises(ValueError):
            Material("")


class TestLibrary:
    @pytest.mark.parametrize("name, eps, tand", [
        ("silicon", 11.9, 0.2517), ("sio2", 3.9, 0.03), ("alumina", 9.4, 4e-4),
        ("thermal_conductor", 8.6, 3e-4), ("aluminum_nitride", 8.6, 3e-4), ("vacuum", 1.0, 0.0)])
    def test_stack_constants(self, name, eps, tand):
        m = builtin_library()[name]
        assert (m.rel_permittivity, m.loss_tangent) == (eps, tand)

    @pytest.mark.parametrize("name", ["aluminum", "copper", "solder", "lead"])
    def test_metals_are_conductors(self, name):
        assert builtin_library()[name].is_conductor

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            builtin_library()["unobtainium"]

    def test_overrides_copy(self):
        lib = builtin_library()
        new = lib.with_overrides({"silicon": {"loss_tangent": 0.01}, "glass": {"rel_permittivity": 5.0}})
        assert new["silicon"].loss_tangent == 0.01
        assert lib["silicon"].loss_tangent == 0.2517
        assert new["glass"].rel_permittivity == 5.0

    def test_override_unknown_field(self):
        with pytest.raises(ValueError):
            builtin_library().with_overrides({"silicon": {"colour": "grey"}})

    def test_json_round_trip(self):
        lib = builtin_library()
        assert MaterialLibrary.from_json(lib.to_json()) == lib

    def test_default_pin(self):
        assert DEFAULT_PIN_FREQUENCY == 60e9
