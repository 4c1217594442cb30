import math

import numpy as np
import pytest

from pkgwave.sparams import (SParameterSet, TouchstoneError, default_frequencies, touchstone_read,
                             touchstone_write, write_magnitude_csv)

from conftest import random_sset


class TestFrequencies:
    def test_default_grid(self):
        f = default_frequencies()
        assert f[0] == 55e9 and f[-1] == 65e9 and len(f) == 41
        assert 60e9 in f


class TestSParameterSet:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            SParameterSet([1e9, 2e9], np.zeros((2, 2, 3)))

    def test_frequencies_increasing(self):
        with pytest.raises(ValueError):
            SParameterSet([2e9, 1e9], np.zeros((2, 2, 2)))

    def test_non_finite(self):
        s = np.zeros((1, 2, 2), complex)
        s[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            SParameterSet([1e9], s)

    def test_port_labels(self):
        sset = SParameterSet([1e9], np.arange(4).reshape(1, 2, 2), port_ids=(3, 7))
        assert sset.get(7, 3)[0] == 2  # S[j=7, i=3] -> row 1, column 0
        with pytest.raises(KeyError):
            sset.index(1)

    def test_restrict(self):
        sset = random_sset(n_freq=5)
        sub = sset.restrict(57e9, 62e9)
        assert list(sub.frequencies) == [57.5e9, 60e9]


class TestTouchstone:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_round_trip(self, tmp_path, n):
        sset = random_sset(n_ports=n)
        path = touchstone_write(sset, tmp_path / "x")
        assert path.suffix == f".s{n}p"
        back = touchstone_read(path)
        assert np.max(np.abs(back.s - sset.s) / np.maximum(np.abs(sset.s), 1e-300)) <= 1e-8
        assert np.array_equal(back.frequencies, sset.frequencies)

    def test_two_port_column_order(self, tmp_path):
        s = np.array([[[0.1, 0.3], [0.2, 0.4]]], dtype=complex)  # S11 .1, S21 .2, S12 .3, S22 .4
        path = touchstone_write(SParameterSet([1e9], s), tmp_path / "two")
        data = path.read_text().splitlines()[-1].split()
        assert [float(v) for v in data[1::2]] == [0.1, 0.2, 0.3, 0.4]

    def test_metadata_round_trip(self, tmp_path):
        sset = SParameterSet([1e9], np.zeros((1, 2, 2)), metadata={"config_hash": "abc123"})
        assert touchstone_read(touchstone_write(sset, tmp_path / "m")).metadata["config_hash"] == "abc123"

    def test_external_ma_ghz(self, tmp_path):
        p = tmp_path / "ext.s2p"
        p.write_text("! made elsewhere\n# GHz S MA R 50\n"
                     "60 0.5 90 0.1 0 0.1 0 0.5 -90\n61 0.5 90 0.1 0 0.1 0 0.5 -90\n")
        sset = touchstone_read(p)
        assert sset.frequencies[0] == 60e9
        assert sset.s[0, 0, 0] == pytest.approx(0.5j)
        assert sset.s[0, 1, 0] == pytest.approx(0.1)

    def test_external_db(self, tmp_path):
        p = tmp_path / "ext.s1p"
        p.write_text("# MHZ S DB R 50\n1000 -20 0\n")
        assert touchstone_read(p).s[0, 0, 0] == pytest.approx(0.1)

    @pytest.mark.parametrize("body, match", [
        ("1e9 0.1 0 0.2\n", "option line"),
        ("# HZ S RI R 50\n1e9 0.1 0 0.2\n", "multiple"),
        ("# HZ S RI R 50\n# HZ S RI R 50\n1e9 0.1 0\n", "repeated"),
        ("# HZ Y RI R 50\n1e9 0.1 0\n", "only S-parameter"),
        ("# HZ S RI R 50\n1e9 0.1 x\n", "non-numeric"),
        ("# HZ S RI R 50\n2e9 0.1 0\n1e9 0.1 0\n", "ascending"),
    ])
    def test_malformed(self, tmp_path, body, match):
        p = tmp_path / "bad.s1p"
        p.write_text(body)
        with pytest.raises(TouchstoneError, match=match):
            touchstone_read(p)

    def test_unknown_extension(self, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("# HZ S RI R 50\n")
        with pytest.raises(TouchstoneError):
            touchstone_read(p)

    def test_magnitude_csv(self, tmp_path):
        sset = random_sset(n_ports=2, n_freq=2)
        text = write_magnitude_csv(sset, tmp_path / "m.csv").read_text().splitlines()
        assert text[0] == "frequency_hz,S1_1_db,S1_2_db,S2_1_db,S2_2_db"
        first = [float(v) for v in text[1].split(",")]
        assert first[3] == pytest.approx(20 * math.log10(abs(sset.s[0, 1, 0])))


class TestExtraction:
    def test_package_reciprocity_and_passivity(self, small_result):
        s = small_result.sparams.s
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(np.abs(s))
        assert np.max(np.abs(db[:, 0, 1] - db[:, 1, 0])) <= 0.5
        assert np.max(np.sum(np.abs(s) ** 2, axis=1)) <= 1 + 1e-3

    def test_frequency_grid(self, small_result):
        f = small_result.sparams.frequencies
        assert f[0] == 55e9 and f[-1] == 65e9

    def test_outside_excitation_band(self, small_result):
        from pkgwave.sparams import extract_sparams
        with pytest.raises(ValueError, match="excitation band"):
            extract_sparams(small_result.records, [30e9])

    def test_missing_port_run(self, small_result):
        from pkgwave.sparams import extract_sparams
        with pytest.raises(ValueError, match="missing"):
            extract_sparams(small_result.records[:1])
