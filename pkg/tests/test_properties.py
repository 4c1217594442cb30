import itertools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pkgwave.channel import band_statistics, channel_response, fit_path_loss, worst_case_coupling
from pkgwave.geometry import graded_axis
from pkgwave.materials import loss_tangent_to_conductivity
from pkgwave.sparams import SParameterSet, touchstone_read, touchstone_write
from pkgwave.sweep import SweepSpec

finite = st.floats(-1e3, 1e3, allow_nan=False)


def _sset(n, m, data, seed):
    rng = np.random.default_rng(seed)
    s = 0.9 * data * np.exp(2j * np.pi * rng.random((m, n, n))) / np.sqrt(2)
    return SParameterSet(55e9 + 1e9 * np.arange(m), s)


class TestPathLossProperties:
    @given(n=st.floats(0.1, 5), c=finite,
           d=arrays(float, st.integers(2, 12), elements=st.floats(1e-4, 1.0), unique=True))
    def test_recovers_exact_line(self, n, c, d):
        if np.ptp(np.log10(d)) < 1e-3:
            return
        fit = fit_path_loss(d, 10 * n * np.log10(d) + c)
        assert fit.exponent == pytest.approx(n, rel=1e-6, abs=1e-6)
        assert fit.residual_rms_db < 1e-6 * (1 + abs(c))

    @given(d=arrays(float, 6, elements=st.floats(1e-3, 1.0), unique=True),
           loss=arrays(float, 6, elements=finite), shift=finite)
    def test_shift_moves_intercept_only(self, d, loss, shift):
        if np.ptp(np.log10(d)) < 1e-3:
            return
        a, b = fit_path_loss(d, loss), fit_path_loss(d, loss + shift)
        assert b.exponent == pytest.approx(a.exponent, rel=1e-6, abs=1e-6)
        assert b.intercept_db == pytest.approx(a.intercept_db + shift, rel=1e-6, abs=1e-6)


class TestCouplingProperties:
    @settings(suppress_health_check=[HealthCheck.too_slow])
    @given(n=st.integers(2, 5), m=st.integers(1, 6), seed=st.integers(0, 2 ** 16))
    def test_smin_is_minimum_off_diagonal(self, n, m, seed):
        data = np.random.default_rng(seed).random((m, n, n)) + 1e-3
        sset = _sset(n, m, data, seed)
        summary = worst_case_coupling(sset, (sset.frequencies[0], sset.frequencies[-1]))
        for k in range(m):
            mags = [abs(sset.s[k, j, i]) for i, j in itertools.permutations(range(n), 2)]
            assert 10 ** (summary.s_min_db[k] / 20) == pytest.approx(min(mags), rel=1e-12)

    @given(g1=st.floats(0.01, 100), g2=st.floats(0.01, 100), seed=st.integers(0, 1000))
    def test_gains_cancel_in_h(self, g1, g2, seed):
        data = np.random.default_rng(seed).random((3, 2, 2)) + 1e-3
        sset = _sset(2, 3, data, seed)
        a = channel_response(sset, 1, 2)
        b = channel_response(sset, 1, 2, g1, g2)
        assert np.allclose(a.gain_product_db, b.gain_product_db, rtol=0, atol=1e-12)
        assert np.allclose(b.h_squared_db, a.gain_product_db - 10 * math.log10(g1 * g2), atol=1e-9)

    @given(values=arrays(float, st.integers(1, 20), elements=st.floats(-120, 0)))
    def test_linear_mean_between_extremes(self, values):
        mean, std = band_statistics(values, linear=True)
        assert values.min() - 1e-9 <= mean <= values.max() + 1e-9
        assert std >= 0


class TestTouchstoneProperties:
    @settings(max_examples=30, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(n=st.integers(1, 6), m=st.integers(1, 5), seed=st.integers(0, 2 ** 16))
    def test_round_trip(self, tmp_path, n, m, seed):
        data = np.random.default_rng(seed).random((m, n, n))
        sset = _sset(n, m, data, seed)
        back = touchstone_read(touchstone_write(sset, tmp_path / f"rt{n}_{m}"))
        scale = np.maximum(np.abs(sset.s), 1e-300)
        assert np.max(np.abs(back.s - sset.s) / scale) <= 1e-8


class TestMaterialProperties:
    @given(eps=st.floats(1, 20), tand=st.floats(0, 1), f=st.floats(1e9, 1e12), k=st.floats(0.1, 10))
    def test_linear_in_frequency_and_loss(self, eps, tand, f, k):
        base = loss_tangent_to_conductivity(eps, tand, f)
        assert loss_tangent_to_conductivity(eps, tand, k * f) == pytest.approx(k * base, rel=1e-12, abs=1e-300)
        assert loss_tangent_to_conductivity(eps, tand * k, f) == pytest.approx(k * base, rel=1e-12, abs=1e-300)


class TestGradingProperties:
    @settings(deadline=None, max_examples=40)
    @given(widths=st.lists(st.floats(1e-5, 2e-3), min_size=1, max_size=5),
           hmax=st.lists(st.floats(5e-6, 5e-4), min_size=5, max_size=5),
           ratio=st.floats(1.1, 1.5))
    def test_axis_invariants(self, widths, hmax, ratio):
        breaks = np.concatenate([[0.0], np.cumsum(widths)])
        hm = hmax[:len(widths)]
        nodes = graded_axis(breaks, hm, ratio)
        h = np.diff(nodes)
        assert np.all(h > 0)
        for b in breaks:
            assert np.min(np.abs(nodes - b)) <= 1e-12 * max(1.0, abs(b))
        if len(h) > 1:
            assert np.max(np.maximum(h[1:] / h[:-1], h[:-1] / h[1:])) <= ratio + 1e-6
        for (a, b), hj in zip(zip(breaks[:-1], breaks[1:]), hm):
            inside = (nodes[:-1] >= a - 1e-15) & (nodes[1:] <= b + 1e-15)
            assert np.all(h[inside] <= hj * (1 + 1e-6))


class TestSweepProperties:
    @settings(deadline=None)
    @given(sizes=st.lists(st.integers(1, 4), min_size=1, max_size=3))
    def test_point_count_is_product(self, sizes):
        axes = tuple((f"layer{k}", tuple(range(s))) for k, s in enumerate(sizes))
        spec = SweepSpec(axes)
        assert len(spec.points()) == math.prod(sizes)
        assert len({tuple(p.values()) for p in spec.points()}) == math.prod(sizes)
