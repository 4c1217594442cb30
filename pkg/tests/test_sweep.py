import copy
import warnings

import numpy as np
import pytest

from pkgwave.channel import worst_case_coupling
from pkgwave.config import ScenarioConfig
from pkgwave.geometry import SizingError, default_flip_chip_package
from pkgwave.scenario import simulate_sparams
from pkgwave.sweep import (SweepError, SweepResult, SweepRow, SweepSpec,
                           bump_penetration_experiment, pareto_front, run_sweep, select_best)

from conftest import SMALL


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.fixture(scope="module")
def grid_spec():
    cfg = ScenarioConfig.from_dict(copy.deepcopy(SMALL))
    return SweepSpec((("silicon", (0.489e-3, 0.1e-3)), ("spreader", (0.0, 0.25e-3))), cfg)


@pytest.fixture(scope="module")
def grid_result(grid_spec):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_sweep(grid_spec)


def _row(i, mean, std, si=0.5e-3, sp=0.25e-3, status="ok"):
    return SweepRow(i, {"p": i}, f"h{i}", status, mean, std, silicon_thickness=si, spreader_thickness=sp)


class TestSpec:
    def test_points_are_cartesian(self, grid_spec):
        pts = grid_spec.points()
        assert len(pts) == 4
        assert pts[0] == {"silicon": 0.489e-3, "spreader": 0.0}

    def test_overrides(self, grid_spec):
        o = grid_spec.overrides({"silicon": 0.1e-3, "spreader": 0.25e-3})
        assert o["silicon"] == 0.1e-3 and o["chip_lateral"] == 6e-3

    def test_dotted_override(self):
        spec = SweepSpec((("spreader.material", ("aluminum_nitride",)),))
        assert spec.overrides({"spreader.material": "aluminum_nitride"})["spreader"] == {
            "material": "aluminum_nitride"}

    @pytest.mark.parametrize("axes", [(), (("silicon", ()),), (("a", (1,)), ("a", (2,)))])
    def test_invalid(self, axes):
        with pytest.raises(SweepError):
            SweepSpec(axes)

    def test_hash_depends_on_point_and_retune(self, grid_spec):
        a, b = grid_spec.points()[:2]
        assert grid_spec.point_hash(a) != grid_spec.point_hash(b)
        retuned = SweepSpec(grid_spec.axes, grid_spec.config, retune=True)
        assert retuned.point_hash(a) != grid_spec.point_hash(a)


class TestRunSweep:
    def test_four_rows_in_point_order(self, grid_result):
        assert len(grid_result.rows) == 4
        assert [r.index for r in grid_result.rows] == [0, 1, 2, 3]
        assert all(r.ok for r in grid_result.rows)

    def test_single_point_matches_direct_solve(self, grid_spec, grid_result):
        cfg = grid_spec.config
        model = cfg.build_model(grid_spec.overrides(grid_spec.points()[1]))
        res = simulate_sparams(model, dim=cfg.dim, policy=cfg.policy(), settings=cfg.run_settings(),
                               frequencies=cfg.frequencies())
        direct = worst_case_coupling(res.sparams, cfg.band)
        assert grid_result.rows[1].mean_db == direct.mean_db
        assert grid_result.rows[1].std_db == direct.std_db

    def test_threads_do_not_change_results(self, grid_spec, grid_result, tmp_path):
        threaded = run_sweep(grid_spec, threads=2)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        grid_result.to_csv(a)
        threaded.to_csv(b)
        assert a.read_bytes() == b.read_bytes()

    def test_resume_reuses_rows(self, grid_spec, grid_result, tmp_path):
        calls = []
        partial = SweepResult(grid_result.names, [grid_result.rows[3], grid_result.rows[0]])
        final = run_sweep(grid_spec, previous=partial, on_row=calls.append)
        assert sorted(r.index for r in calls) == [1, 2]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        grid_result.to_csv(a)
        final.to_csv(b)
        assert a.read_bytes() == b.read_bytes()

    def test_csv_round_trip(self, grid_result, tmp_path):
        p = grid_result.to_csv(tmp_path / "s.csv")
        back = SweepResult.from_csv(p, grid_result.names)
        for r, s in zip(grid_result.rows, back.rows):
            assert (r.hash, r.mean_db, r.std_db, r.values) == (s.hash, s.mean_db, s.std_db, s.values)

    def test_summary_names_optimum(self, grid_result):
        text = grid_result.summary()
        assert "optimum:" in text and "points: 4 (4 ok)" in text

    def test_failed_point_is_reported(self):
        cfg = ScenarioConfig.from_dict(copy.deepcopy(SMALL))
        spec = SweepSpec((("silicon", (0.489e-3, -1.0)),), cfg)
        result = run_sweep(spec)
        assert [r.status for r in result.rows] == ["ok", "failed"]
        assert "thickness" in result.rows[1].diagnostic
        assert "failed point 1" in result.summary()

    def test_all_failed_raises(self):
        spec = SweepSpec((("silicon", (-1.0,)),), ScenarioConfig.from_dict(copy.deepcopy(SMALL)))
        with pytest.raises(SweepError, match="every sweep point failed"):
            run_sweep(spec)

    def test_retune_records_s11(self):
        cfg = ScenarioConfig.from_dict(copy.deepcopy(SMALL))
        spec = SweepSpec((("silicon", (0.3e-3,)),), cfg, retune=True)
        row = run_sweep(spec).rows[0]
        assert np.isfinite(row.s11_db)
        assert row.s11_db < -10 or "tuning" in row.diagnostic


class TestSelection:
    def test_score_penalises_spread(self):
        res = SweepResult(("p",), [_row(0, -50, 4), _row(1, -51, 1)])
        assert select_best(res, 0.5).index == 1
        assert select_best(res, 0.0).index == 0

    def test_ties_prefer_thinner_silicon_then_spreader(self):
        res = SweepResult(("p",), [_row(0, -50, 2, si=0.5e-3), _row(1, -50, 2, si=0.1e-3, sp=0.5e-3),
                                   _row(2, -50, 2, si=0.1e-3, sp=0.25e-3)])
        assert select_best(res).index == 2

    def test_failed_rows_ignored(self):
        res = SweepResult(("p",), [_row(0, -20, 0, status="failed"), _row(1, -50, 2)])
        assert select_best(res).index == 1

    def test_no_rows(self):
        with pytest.raises(SweepError):
            select_best(SweepResult(("p",), [_row(0, -20, 0, status="failed")]))

    def test_pareto(self):
        res = SweepResult(("p",), [_row(0, -50, 4), _row(1, -51, 1), _row(2, -52, 3)])
        assert [r.index for r in pareto_front(res)] == [0, 1]


class TestPenetration:
    def _model(self, **kw):
        return default_flip_chip_package({"chip_lateral": 2e-3, "carrier_lateral": 3e-3,
                                          "bump_mode": "explicit", **kw})

    def test_pillars_block_60_ghz_but_not_1_thz(self):
        res = bump_penetration_experiment(self._model())
        assert res.ratio(60e9) < 1e-2
        assert res.ratio(1e12) >= 10 * res.ratio(60e9)
        assert res.metadata["fill"] == "alumina"

    def test_no_pillars_no_decay(self):
        res = bump_penetration_experiment(self._model(bump_diameter=0.0))
        assert res.ratio(60e9) > 0.5 and res.ratio(1e12) > 0.5

    def test_requires_explicit_mode(self):
        with pytest.raises(ValueError):
            bump_penetration_experiment(default_flip_chip_package())

    def test_cell_too_coarse(self):
        with pytest.raises(SizingError):
            bump_penetration_experiment(self._model(), cell=20e-6)

    def test_profile_csv(self, tmp_path):
        res = bump_penetration_experiment(self._model(bump_diameter=0.0), frequencies=(60e9,))
        text = res.to_csv(tmp_path / "p.csv").read_text().splitlines()
        assert len(text) == 1 + len(res.profiles[60e9].x)
