"""Channel metrics computed from S-parameters.

* channel response: G_t G_r |H(f)|^2 = |S_ji|^2 / ((1 - |S_ii|^2)(1 - |S_jj|^2))
* worst-case coupling: S_min(f) = min over pairs i != j of |S_ij(f)|
* path loss: L = 10 n log10(d) + C, fitted by least squares
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .sparams import SParameterSet


class ChannelError(ValueError):
    pass


def _to_db_power(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10 * np.log10(x)


@dataclass(frozen=True)
class ChannelResponse:
    frequencies: np.ndarray
    gain_product_db: np.ndarray  # 10 log10(G_t G_r |H|^2); -inf where S_ji = 0
    tx_gain: float = 1.0
    rx_gain: float = 1.0

    @property
    def h_squared_db(self) -> np.ndarray:
        """|H|^2 in dB after dividing out the supplied gains."""
        return self.gain_product_db - 10 * math.log10(self.tx_gain * self.rx_gain)

    def attenuation_db(self) -> np.ndarray:
        return -self.h_squared_db


def channel_response_from_values(s_ji, s_ii, s_jj, frequencies=None, *,
                                 tx_gain: float = 1.0, rx_gain: float = 1.0) -> ChannelResponse:
    s_ji, s_ii, s_jj = (np.atleast_1d(np.asarray(v, dtype=complex)) for v in (s_ji, s_ii, s_jj))
    freqs = np.arange(len(s_ji), dtype=float) if frequencies is None else np.atleast_1d(
        np.asarray(frequencies, dtype=float))
    if tx_gain <= 0 or rx_gain <= 0:
        raise ChannelError("antenna gains must be positive")
    for name, s in (("S_ii", s_ii), ("S_jj", s_jj)):
        bad = np.abs(s) >= 1
        if bad.any():
            f = freqs[np.argmax(bad)]
            raise ChannelError(f"|{name}| >= 1 at {f:g} Hz: channel response is singular")
    value = np.abs(s_ji) ** 2 / ((1 - np.abs(s_ii) ** 2) * (1 - np.abs(s_jj) ** 2))
    return ChannelResponse(freqs, _to_db_power(value), tx_gain, rx_gain)


def channel_response(sset: SParameterSet, i: int, j: int, tx_gain: float = 1.0,
                     rx_gain: float = 1.0) -> ChannelResponse:
    """Response from transmitter port ``i`` to receiver port ``j`` (port labels)."""
    if i == j:
        raise ChannelError("transmitter and receiver must be different ports")
    return channel_response_from_values(sset.get(j, i), sset.get(i, i), sset.get(j, j),
                                        sset.frequencies, tx_gain=tx_gain, rx_gain=rx_gain)


@dataclass(frozen=True)
class CouplingSummary:
    frequencies: np.ndarray
    s_min_db: np.ndarray
    mean_db: float
    std_db: float
    band: tuple[float, float]
    worst_pair: tuple  # (j, i) per frequency of the minimum
    linear: bool = False


def band_statistics(values_db: np.ndarray, linear: bool = False) -> tuple[float, float]:
    """Mean and population standard deviation, in dB or over linear magnitudes."""
    values_db = np.asarray(values_db, dtype=float)
    if not linear:
        return float(np.mean(values_db)), float(np.std(values_db))
    mag = 10 ** (values_db / 20)
    mean = float(np.mean(mag))
    std = float(np.std(mag))
    return 20 * math.log10(mean), (20 * math.log10((mean + std) / mean) if mean > 0 else 0.0)


def worst_case_coupling(sset: SParameterSet, band: tuple[float, float] = (55e9, 65e9), *,
                        linear: bool = False) -> CouplingSummary:
    """S_min(f) over all ordered pairs and its band statistics."""
    if sset.n_ports < 2:
        raise ChannelError("worst-case coupling needs at least two ports")
    lo, hi = band
    sel = (sset.frequencies >= lo) & (sset.frequencies <= hi)
    if not sel.any():
        raise ChannelError(f"band [{lo:g}, {hi:g}] Hz does not intersect the frequency grid")
    mag = np.abs(sset.s[sel]).copy()
    n = sset.n_ports
    diag = np.eye(n, dtype=bool)
    mag[:, diag] = np.inf
    flat = mag.reshape(mag.shape[0], -1)
    arg = np.argmin(flat, axis=1)
    smin = flat[np.arange(len(arg)), arg]
    with np.errstate(divide="ignore"):
        smin_db = 20 * np.log10(smin)
    mean, std = band_statistics(smin_db, linear)
    pairs = tuple((sset.port_ids[a // n], sset.port_ids[a % n]) for a in arg)
    return CouplingSummary(sset.frequencies[sel], smin_db, mean, std, (lo, hi), pairs, linear)


@dataclass(frozen=True)
class PathLossFit:
    exponent: float
    intercept_db: float
    residual_rms_db: float
    distances: np.ndarray
    losses_db: np.ndarray

    @property
    def slope_db_per_decade(self) -> float:
        return 10 * self.exponent

    def predict(self, d) -> np.ndarray:
        return 10 * self.exponent * np.log10(np.asarray(d, dtype=float)) + self.intercept_db

    def summary(self) -> str:
        return (f"exponent n = {self.exponent:.6g}\n"
                f"slope = {self.slope_db_per_decade:.6g} dB/decade\n"
                f"intercept C = {self.intercept_db:.6g} dB\n"
                f"residual rms = {self.residual_rms_db:.6g} dB\n"
                f"samples = {len(self.distances)}\n")


def fit_path_loss(distances: Sequence[float], losses_db: Sequence[float]) -> PathLossFit:
    """Least-squares fit of L = 10 n log10(d) + C."""
    d = np.asarray(distances, dtype=float)
    loss = np.asarray(losses_db, dtype=float)
    if d.shape != loss.shape or d.ndim != 1:
        raise ChannelError("distances and losses must be 1-D arrays of equal length")
    if len(d) < 2:
        raise ChannelError("need at least two samples")
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise ChannelError("distances must be positive and finite")
    if np.any(~np.isfinite(loss)):
        raise ChannelError("losses must be finite")
    if np.ptp(d) == 0:
        raise ChannelError("all distances are equal: the fit is degenerate")
    x = 10 * np.log10(d)
    design = np.column_stack([x, np.ones_like(x)])
    (n, c), *_ = np.linalg.lstsq(design, loss, rcond=None)
    resid = loss - (n * x + c)
    return PathLossFit(float(n), float(c), float(np.sqrt(np.mean(resid ** 2))), d, loss)


def pair_distances(ports) -> list[tuple[int, int, float]]:
    """Unordered port pairs with their in-plane separation.

    Accepts a PackageModel (uses its ports) or a sequence of objects with
    ``index``, ``x`` and ``y``.
    """
    ports = list(getattr(ports, "ports", ports))
    if len(ports) < 2:
        raise ChannelError("need at least two ports")
    out = []
    for a, b in itertools.combinations(ports, 2):
        d = math.hypot(a.x - b.x, a.y - b.y)
        if d == 0:
            raise ChannelError(f"ports {a.index} and {b.index} coincide")
        out.append((a.index, b.index, d))
    return out


def pair_attenuation(sset: SParameterSet, pairs: Sequence[tuple[int, int, float]],
                     frequency: float = 60e9, *, band: tuple[float, float] | None = None,
                     tx_gain: float = 1.0, rx_gain: float = 1.0) -> list[tuple[int, int, float, float]]:
    """(i, j, d, L_dB) per pair with L = -10 log10(G_t G_r |H|^2 / (G_t G_r)).

    The attenuation is read at the grid frequency nearest ``frequency`` or,
    with ``band``, averaged in dB over the band.
    """
    freqs = sset.frequencies
    if band is None:
        k = int(np.argmin(np.abs(freqs - frequency)))
        if not math.isclose(freqs[k], frequency, rel_tol=1e-6):
            raise ChannelError(f"{frequency:g} Hz is not on the frequency grid")
        sel = np.zeros(len(freqs), bool)
        sel[k] = True
    else:
        sel = (freqs >= band[0]) & (freqs <= band[1])
        if not sel.any():
            raise ChannelError("band does not intersect the frequency grid")
    out = []
    for i, j, d in pairs:
        resp = channel_response(sset, i, j, tx_gain, rx_gain)
        out.append((i, j, d, float(np.mean(resp.attenuation_db()[sel]))))
    return out


def write_smin_csv(summary: CouplingSummary, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "s_min_db", "rx_port", "tx_port"])
        for f, v, (j, i) in zip(summary.frequencies, summary.s_min_db, summary.worst_pair):
            w.writerow([repr(float(f)), repr(float(v)), j, i])
    return path


def write_pairs_csv(rows: Sequence[tuple[int, int, float, float]], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["port_i", "port_j", "distance_m", "attenuation_db"])
        for i, j, d, loss in rows:
            w.writerow([i, j, repr(float(d)), repr(float(loss))])
    return path
