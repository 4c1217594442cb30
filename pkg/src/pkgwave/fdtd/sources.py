"""Excitation waveforms and probe descriptions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# The pulse starts when its envelope is this fraction of the peak.
_START_LEVEL = 1e-8


@dataclass(frozen=True)
class SourceSpec:
    """Gaussian-modulated sinusoid fed through a lumped port.

    ``band`` edges sit at ``edge_level`` of the peak spectral magnitude, so the
    whole band has usable excitation for the DFT normalisation. ``port`` may
    be a tuple to drive several port cells in phase (e.g. a current sheet).
    """

    port: int | tuple[int, ...]
    f0: float = 60e9
    band: tuple[float, float] = (55e9, 65e9)
    edge_level: float = 0.5
    amplitude: float = 1.0
    hard: bool = False

    def __post_init__(self):
        lo, hi = self.band
        if not 0 < lo < self.f0 < hi:
            raise ValueError(f"band {self.band} must bracket f0 = {self.f0}")
        if not 0.1 <= self.edge_level < 1:
            raise ValueError("edge_level must be in [0.1, 1): band edges need >= 10% of the peak")
        if self.amplitude == 0 or not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite and non-zero")

    @property
    def ports(self) -> tuple[int, ...]:
        return tuple(self.port) if isinstance(self.port, (tuple, list)) else (self.port,)

    @property
    def tau(self) -> float:
        half = max(self.f0 - self.band[0], self.band[1] - self.f0)
        return math.sqrt(-math.log(self.edge_level)) / (math.pi * half)

    @property
    def delay(self) -> float:
        return self.tau * math.sqrt(-math.log(_START_LEVEL))

    @property
    def duration(self) -> float:
        return 2 * self.delay

    def waveform(self, t: np.ndarray) -> np.ndarray:
        u = (np.asarray(t, dtype=float) - self.delay) / self.tau
        return self.amplitude * np.exp(-u * u) * np.sin(2 * math.pi * self.f0 * (np.asarray(t) - self.delay))

    def relative_spectrum(self, f) -> np.ndarray:
        """Spectral magnitude relative to the peak (narrow-band approximation)."""
        df = np.asarray(f, dtype=float) - self.f0
        return np.exp(-(math.pi * self.tau * df) ** 2)

    def usable_band(self, level: float = 0.1) -> tuple[float, float]:
        half = math.sqrt(-math.log(level)) / (math.pi * self.tau)
        return self.f0 - half, self.f0 + half

    def highest_frequency(self, level: float = 0.01) -> float:
        return self.usable_band(level)[1]


PROBE_KINDS = ("port_voltage", "field_line")


@dataclass(frozen=True)
class ProbeSpec:
    """A sampled observable.

    ``field_line`` samples one E component along ``axis`` through the point
    ``location`` (x, y, z in metres; the coordinate along ``axis`` is ignored)
    and accumulates running DFTs at ``frequencies``; ``keep_time`` also stores
    the sampled time series. ``port_voltage`` names a
    port index in ``port``; port records are always kept, so this probe only
    selects what is reported.
    """

    name: str
    kind: str = "field_line"
    component: str = "z"
    axis: str = "x"
    location: tuple[float, float, float] = (0.0, 0.0, 0.0)
    span: tuple[float, float] | None = None
    frequencies: tuple[float, ...] = field(default_factory=tuple)
    cadence: int = 1
    port: int | None = None
    keep_time: bool = False

    def __post_init__(self):
        if self.kind not in PROBE_KINDS:
            raise ValueError(f"probe kind must be one of {PROBE_KINDS}, got {self.kind!r}")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        if self.component not in "xyz" or self.axis not in "xyz":
            raise ValueError("component and axis must be one of x, y, z")
        if self.kind == "field_line" and not (self.frequencies or self.keep_time):
            raise ValueError("field_line probes need DFT frequencies or keep_time")
