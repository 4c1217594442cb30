"""Scattering matrices from port time records, and Touchstone v1 exchange."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_Z0 = 50.0
MIN_SPECTRAL_LEVEL = 0.1


def default_frequencies(lo: float = 55e9, hi: float = 65e9, step: float = 0.25e9) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


@dataclass(frozen=True)
class SParameterSet:
    """S[f, j, i] = S_ji: wave leaving port j when port i is driven.

    Ports are labelled by ``port_ids`` (file order 1..N in Touchstone files).
    """

    frequencies: np.ndarray
    s: np.ndarray
    z0: float = DEFAULT_Z0
    port_ids: tuple[int, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        if f.ndim != 1 or len(f) == 0:
            raise ValueError("frequency grid must be a non-empty 1-D array")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if s.ndim != 3 or s.shape[0] != len(f) or s.shape[1] != s.shape[2]:
            raise ValueError(f"S array must have shape (n_freq, N, N), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("S-parameters must be finite")
        if self.z0 <= 0:
            raise ValueError("reference impedance must be positive")
        ids = tuple(self.port_ids) or tuple(range(1, s.shape[1] + 1))
        if len(ids) != s.shape[1] or len(set(ids)) != len(ids):
            raise ValueError("port_ids must be unique and match the matrix size")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "port_ids", ids)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def n_ports(self) -> int:
        return self.s.shape[1]

    def index(self, port: int) -> int:
        try:
            return self.port_ids.index(port)
        except ValueError:
            raise KeyError(f"no port {port}; ports are {self.port_ids}") from None

    def get(self, j: int, i: int) -> np.ndarray:
        """S_ji over frequency (port labels)."""
        return self.s[:, self.index(j), self.index(i)]

    def db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.s))

    def restrict(self, lo: float, hi: float) -> "SParameterSet":
        sel = (self.frequencies >= lo) & (self.frequencies <= hi)
        if not sel.any():
            raise ValueError(f"band [{lo:g}, {hi:g}] Hz does not overlap the frequency grid")
        return SParameterSet(self.frequencies[sel], self.s[sel], self.z0, self.port_ids, self.metadata)


def _dft(signal: np.ndarray, times: np.ndarray, f: float, dt: float) -> np.ndarray:
    phase = np.exp(-2j * math.pi * f * times)
    return signal @ phase * dt


def extract_sparams(records: Sequence, frequencies: Sequence[float] | None = None, *,
                    z0: float = DEFAULT_Z0, metadata: dict | None = None) -> SParameterSet:
    """Assemble the N x N matrix from one run per driven port.

    Wave amplitudes use a = (V + Z0 I) / (2 sqrt Z0), b = (V - Z0 I) / (2 sqrt Z0)
    on the DFTs of each port's voltage and current records.
    """
    if not records:
        raise ValueError("no simulation records given")
    first = records[0]
    port_ids = tuple(first.port_ids)
    for rec in records:
        if tuple(rec.port_ids) != port_ids or rec.dt != first.dt or rec.grid_summary != first.grid_summary:
            raise ValueError("records come from different grids; cannot combine them")
        if rec.excited is None or rec.source is None:
            raise ValueError("every record must come from a driven run")
    excited = [rec.excited for rec in records]
    if len(set(excited)) != len(excited):
        raise ValueError(f"duplicate excited ports: {excited}")
    if sorted(excited) != sorted(port_ids):
        missing = sorted(set(port_ids) - set(excited))
        raise ValueError(f"need one run per port; missing runs for ports {missing}")
    for rec in records:
        bad = [r for r in rec.resistance if not math.isclose(r, z0, rel_tol=1e-12)]
        if bad:
            raise ValueError(f"port resistance {bad[0]} differs from the reference impedance {z0}")

    freqs = default_frequencies() if frequencies is None else np.asarray(frequencies, dtype=float)
    for rec in records:
        level = rec.source.relative_spectrum(freqs)
        if np.any(level < MIN_SPECTRAL_LEVEL):
            bad = freqs[np.argmin(level)]
            raise ValueError(
                f"frequency {bad:g} Hz is outside the excitation band (spectrum < "
                f"{MIN_SPECTRAL_LEVEL:.0%} of peak)")

    n = len(port_ids)
    s = np.zeros((len(freqs), n, n), dtype=complex)
    root = 2 * math.sqrt(z0)
    for rec in records:
        col = port_ids.index(rec.excited)
        times = rec.times
        for m, f in enumerate(freqs):
            v = _dft(rec.voltage, times, f, rec.dt)
            i = _dft(rec.current, times, f, rec.dt)
            a = (v + z0 * i) / root
            b = (v - z0 * i) / root
            s[m, :, col] = b / a[col]
    meta = {"excitation_band": list(first.source.band), "f0": first.source.f0}
    meta.update(metadata or {})
    return SParameterSet(freqs, s, z0, port_ids, meta)


# ---------------------------------------------------------------- Touchstone

_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}


class TouchstoneError(ValueError):
    pass


def touchstone_write(sset: SParameterSet, path) -> Path:
    """Write Touchstone v1 with option line ``# HZ S RI R <z0>``.

    The extension is forced to ``.sNp``. Two-port data use the conventional
    S11 S21 S12 S22 order; larger sets are row-major with at most four
    complex pairs per line.
    """
    path = Path(path)
    n = sset.n_ports
    path = path.with_suffix(f".s{n}p")
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"! pkgwave S-parameters, {n} ports"]
    lines.append("! ports: " + " ".join(str(p) for p in sset.port_ids))
    for key in sorted(sset.metadata):
        lines.append(f"! {key}: {sset.metadata[key]}")
    lines.append(f"# HZ S RI R {_fmt_z0(sset.z0)}")
    for m, f in enumerate(sset.frequencies):
        mat = sset.s[m]
        if n == 2:
            entries = [mat[0, 0], mat[1, 0], mat[0, 1], mat[1, 1]]
            lines.append(f"{f:.12e} " + " ".join(f"{v.real:.12e} {v.imag:.12e}" for v in entries))
            continue
        if n == 1:
            lines.append(f"{f:.12e} {mat[0, 0].real:.12e} {mat[0, 0].imag:.12e}")
            continue
        for row in range(n):
            vals = mat[row]
            for start in range(0, n, 4):
                chunk = " ".join(f"{v.real:.12e} {v.imag:.12e}" for v in vals[start:start + 4])
                prefix = f"{f:.12e} " if row == 0 and start == 0 else "  "
                lines.append(prefix + chunk)
    path.write_text("\n".join(lines) + "\n")
    return path


def _fmt_z0(z0: float) -> str:
    return str(int(z0)) if float(z0).is_integer() else repr(float(z0))


def _n_from_suffix(path: Path) -> int | None:
    m = re.fullmatch(r"\.s(\d+)p", path.suffix.lower())
    return int(m.group(1)) if m else None


def touchstone_read(path, n_ports: int | None = None) -> SParameterSet:
    """Parse Touchstone v1 (S parameters; RI, MA or DB; any frequency unit)."""
    path = Path(path)
    n = n_ports or _n_from_suffix(path)
    if n is None:
        raise TouchstoneError(f"{path}: cannot infer port count from the extension")
    option = None
    port_ids = None
    metadata = {}
    numbers: list[float] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        comment = raw.find("!")
        body = raw if comment < 0 else raw[:comment]
        if comment >= 0:
            text = raw[comment + 1:].strip()
            if text.startswith("ports:"):
                port_ids = tuple(int(v) for v in text[6:].split())
            elif ":" in text:
                key, _, value = text.partition(":")
                metadata[key.strip()] = value.strip()
        body = body.strip()
        if not body:
            continue
        if body.startswith("#"):
            if option is not None:
                raise TouchstoneError(f"{path}:{lineno}: repeated option line")
            option = _parse_option(body, path, lineno)
            continue
        if option is None:
            raise TouchstoneError(f"{path}:{lineno}: data before the option line")
        try:
            numbers.extend(float(tok) for tok in body.split())
        except ValueError:
            raise TouchstoneError(f"{path}:{lineno}: non-numeric data {body!r}") from None
    if option is None:
        raise TouchstoneError(f"{path}: missing option line")
    unit, fmt, z0 = option
    per_block = 1 + 2 * n * n
    if not numbers or len(numbers) % per_block:
        raise TouchstoneError(
            f"{path}: {len(numbers)} numbers is not a multiple of {per_block} (1 + 2*{n}^2 columns)")
    data = np.array(numbers).reshape(-1, per_block)
    freqs = data[:, 0] * unit
    if np.any(np.diff(freqs) <= 0):
        raise TouchstoneError(f"{path}: frequencies must be strictly ascending")
    a, b = data[:, 1::2], data[:, 2::2]
    if fmt == "RI":
        vals = a + 1j * b
    elif fmt == "MA":
        vals = a * np.exp(1j * np.radians(b))
    else:
        vals = 10 ** (a / 20) * np.exp(1j * np.radians(b))
    if n == 2:
        s = np.empty((len(freqs), 2, 2), dtype=complex)
        s[:, 0, 0], s[:, 1, 0], s[:, 0, 1], s[:, 1, 1] = vals.T
    else:
        s = vals.reshape(len(freqs), n, n)
    if port_ids is not None and len(port_ids) != n:
        port_ids = None
    return SParameterSet(freqs, s, z0, port_ids or (), metadata)


def _parse_option(line: str, path: Path, lineno: int):
    tokens = line[1:].upper().split()
    unit, param, fmt, z0 = "GHZ", "S", "MA", 50.0
    k = 0
    while k < len(tokens):
        tok = tokens[k]
        if tok in _UNITS:
            unit = tok
        elif tok in ("S", "Y", "Z", "H", "G"):
            param = tok
        elif tok in ("RI", "MA", "DB"):
            fmt = tok
        elif tok == "R" and k + 1 < len(tokens):
            try:
                z0 = float(tokens[k + 1])
            except ValueError:
                raise TouchstoneError(f"{path}:{lineno}: bad reference resistance") from None
            k += 1
        else:
            raise TouchstoneError(f"{path}:{lineno}: malformed option line {line!r}")
        k += 1
    if param != "S":
        raise TouchstoneError(f"{path}:{lineno}: only S-parameter files are supported")
    return _UNITS[unit], fmt, z0


def write_magnitude_csv(sset: SParameterSet, path) -> Path:
    """|S_ji| in dB per frequency: columns frequency_hz, S<j>_<i>_db, ..."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    db = sset.db()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        ids = sset.port_ids
        w.writerow(["frequency_hz"] + [f"S{j}_{i}_db" for j in ids for i in ids])
        for m, f in enumerate(sset.frequencies):
            w.writerow([repr(float(f))] + [repr(float(v)) for v in db[m].ravel()])
    return path
