import math

import numpy as np
import pytest
from scipy.constants import c

from pkgwave.geometry import (GeometryError, ResolutionPolicy, SizingError,
                              default_flip_chip_package, default_monopole_length,
                              explicit_bump_cell, graded_axis, half_wave_patch_length,
                              place_port_grid, quarter_wave_length, rasterize)


@pytest.fixture
def baseline():
    return default_flip_chip_package()


class TestBaselineStack:
    @pytest.mark.parametrize("name, thickness", [
        ("heat_sink", 0.5e-3), ("spreader", 0.25e-3), ("silicon", 0.489e-3),
        ("interconnect", 13e-6), ("bumps", 87.5e-6), ("carrier", 0.5e-3),
        ("solder_balls", 0.32e-3), ("pcb", 0.5e-3)])
    def test_thicknesses(self, baseline, name, thickness):
        assert baseline.layer(name).thickness == thickness

    def test_lateral_and_bumps(self, baseline):
        assert (baseline.chip_lateral, baseline.carrier_lateral) == (22e-3, 33e-3)
        assert (baseline.bump_pitch, baseline.bump_diameter) == (100e-6, 60e-6)

    def test_z_bounds_stack_without_gaps(self, baseline):
        bounds = list(baseline.z_bounds().values())
        assert bounds[-1][0] == 0.0
        for (lo, _), (_, hi) in zip(bounds[:-1], bounds[1:]):
            assert lo == pytest.approx(hi, abs=1e-15)
        assert bounds[0][1] == pytest.approx(baseline.total_height, rel=1e-12)

    def test_die_thickness(self, baseline):
        assert baseline.die_thickness == pytest.approx(0.489e-3 + 13e-6, rel=1e-12)


class TestOverrides:
    def test_negative_thickness_rejected(self):
        with pytest.raises(GeometryError):
            default_flip_chip_package({"silicon": -1e-3})

    def test_zero_spreader_removes_layer(self):
        m = default_flip_chip_package({"spreader": 0})
        assert not m.has_layer("spreader")

    def test_zero_silicon_rejected(self):
        with pytest.raises(GeometryError):
            default_flip_chip_package({"silicon": 0})

    def test_spreader_material(self):
        m = default_flip_chip_package({"spreader": {"thickness": 0.85e-3, "material": "aluminum_nitride"}})
        assert m.layer("spreader").material == "aluminum_nitride"

    @pytest.mark.parametrize("overrides", [{"nonsense": 1}, {"silicon": {"colour": 1}},
                                           {"spreader": {"material": "unobtainium"}},
                                           {"chip_lateral": 40e-3}])
    def test_invalid(self, overrides):
        with pytest.raises(GeometryError):
            default_flip_chip_package(overrides)

    def test_conductor_layer_needs_conductor(self, baseline):
        with pytest.raises(GeometryError):
            baseline.with_layer("heat_sink", material="silicon")


class TestPortGrid:
    def test_uniform_half_pitch_margins(self, baseline):
        m = place_port_grid(baseline, 1, 4)
        assert [p.x for p in m.ports] == pytest.approx([2.75e-3, 8.25e-3, 13.75e-3, 19.25e-3])
        assert [p.index for p in m.ports] == [1, 2, 3, 4]

    def test_four_by_four(self, baseline):
        assert len(place_port_grid(baseline, 4, 4).ports) == 16

    def test_single_port_rejected(self, baseline):
        with pytest.raises(GeometryError):
            place_port_grid(baseline, 1, 1)

    def test_pitch_below_clearance(self, baseline):
        with pytest.raises(GeometryError):
            place_port_grid(baseline, 1, 200)

    def test_patch_defaults(self, baseline):
        m = place_port_grid(baseline, 1, 2, "patch")
        assert m.ports[0].patch_length == pytest.approx(half_wave_patch_length(60e9, 3.9))


class TestMonopoleLength:
    def test_quarter_wave(self):
        assert quarter_wave_length(60e9, 11.9) == pytest.approx(c / (4 * 60e9 * math.sqrt(11.9)))

    def test_default_is_quarter_wave_when_it_fits(self, baseline):
        assert default_monopole_length(baseline) == pytest.approx(quarter_wave_length(60e9, 11.9))

    def test_default_capped_by_thin_die(self):
        m = default_flip_chip_package({"silicon": 0.1e-3})
        assert default_monopole_length(m) == pytest.approx(m.die_thickness)

    def test_too_long_monopole_rejected(self, baseline):
        m = place_port_grid(baseline, 1, 2, monopole_length=0.6e-3)
        with pytest.raises(GeometryError, match="die thickness"):
            rasterize(m)

    def test_too_short_monopole_rejected(self, baseline):
        m = place_port_grid(baseline, 1, 2, monopole_length=5e-6)
        with pytest.raises(GeometryError):
            rasterize(m)


class TestGradedAxis:
    def test_hits_breaks_and_bounds(self):
        breaks = [0.0, 1e-3, 1.1e-3, 5e-3]
        hmax = [1e-4, 1e-5, 3e-4]
        nodes = graded_axis(breaks, hmax, 1.3)
        for b in breaks:
            assert np.min(np.abs(nodes - b)) < 1e-15
        h = np.diff(nodes)
        assert np.max(np.maximum(h[1:] / h[:-1], h[:-1] / h[1:])) <= 1.3 + 1e-9
        for (a, b), hm in zip(zip(breaks[:-1], breaks[1:]), hmax):
            sel = (nodes[:-1] >= a - 1e-15) & (nodes[1:] <= b + 1e-15)
            assert np.all(h[sel] <= hm * (1 + 1e-9))

    def test_rejects_unsorted(self):
        with pytest.raises(GeometryError):
            graded_axis([0, 2, 1], [1, 1])


class TestRasterize:
    def test_2d_baseline(self, baseline):
        g = rasterize(place_port_grid(baseline, 1, 4))
        assert g.dim == 2 and g.shape[1] == 1
        assert len(g.ports) == 4
        assert g.f_pin == 60e9

    def test_silicon_cells_resolve_wavelength(self, baseline):
        pol = ResolutionPolicy()
        g = rasterize(place_port_grid(baseline, 1, 4), pol)
        lo, hi = g.layer_bounds["silicon"]
        zc = g.centers("z")
        h = g.cell_sizes("z")[(zc > lo) & (zc < hi)]
        assert h.max() <= c / (73e9 * math.sqrt(11.9)) / 15 * (1 + 1e-9)

    def test_layers_have_minimum_cells(self, baseline):
        g = rasterize(place_port_grid(baseline, 1, 4), ResolutionPolicy(min_cells_per_layer=2))
        zc = g.centers("z")
        for name, (lo, hi) in g.layer_bounds.items():
            assert np.sum((zc > lo) & (zc < hi)) >= 2, name

    def test_budget(self, baseline):
        with pytest.raises(SizingError) as info:
            rasterize(place_port_grid(baseline, 1, 4), ResolutionPolicy(max_cells=1000))
        assert info.value.required_cells > 1000

    def test_deterministic(self, baseline):
        m = place_port_grid(baseline, 1, 4)
        a, b = rasterize(m), rasterize(m)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.material_id, b.material_id)

    def test_explicit_bump_cell_aligns_pillars(self, baseline):
        h = explicit_bump_cell(baseline, 20e-6)
        for edge in (20e-6, 80e-6, 100e-6):
            assert edge / h == pytest.approx(round(edge / h), abs=1e-9)
        assert h <= 20e-6
