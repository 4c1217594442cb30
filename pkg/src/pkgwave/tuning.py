"""Monopole length tuning against a target |S11| resonance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fdtd import RunSettings, SourceSpec, build_yee_grid, run_simulation
from .geometry import (GeometryError, PackageModel, ResolutionPolicy, quarter_wave_length,
                       rasterize)
from .sparams import extract_sparams

MATCH_DB = -10.0


@dataclass(frozen=True)
class TuningResult:
    length: float
    s11_db: float  # |S11| at the target frequency for ``length``
    dip_frequency: float
    dip_db: float
    matched: bool
    history: tuple = ()  # (length, |S11|(target) dB, dip frequency) per trial
    diagnostic: str = ""


@dataclass(frozen=True)
class _Trial:
    length: float
    s11_target_db: float
    dip_frequency: float
    dip_db: float
    curve: np.ndarray = field(repr=False, default=None)


def initial_length_guess(model: PackageModel, target_f: float) -> float:
    """Quarter wave in silicon."""
    return quarter_wave_length(target_f, model.library["silicon"].rel_permittivity)


def _single_port(model: PackageModel, port: int, length: float) -> PackageModel:
    chosen = [p for p in model.ports if p.index == port]
    if not chosen or chosen[0].kind != "monopole":
        raise GeometryError(f"port {port} is not a monopole")
    return model.with_ports([replace(chosen[0], monopole_length=length)])


def s11_curve(model: PackageModel, port: int, length: float, target_f: float, *, dim: int = 2,
              policy: ResolutionPolicy | None = None, settings: RunSettings | None = None,
              span: float = 0.3, points: int = 121) -> tuple[np.ndarray, np.ndarray]:
    """|S11| in dB over target_f * (1 +- span) for one isolated monopole."""
    single = _single_port(model, port, length)
    grid = rasterize(single, policy, dim=dim)
    settings = settings or RunSettings()
    yee = build_yee_grid(grid, cfl_safety=settings.cfl_safety, pml=settings.pml)
    lo, hi = target_f * (1 - span), target_f * (1 + span)
    source = SourceSpec(port=port, f0=target_f, band=(lo, hi), edge_level=0.1)
    record = run_simulation(yee, source, settings=settings)
    freqs = np.linspace(lo, hi, points)
    sset = extract_sparams([record], freqs)
    with np.errstate(divide="ignore"):
        return freqs, 20 * np.log10(np.abs(sset.s[:, 0, 0]))


def tune_monopole_length(model: PackageModel, target_f: float = 60e9, *, port: int | None = None,
                         dim: int = 2, policy: ResolutionPolicy | None = None,
                         settings: RunSettings | None = None, max_iter: int = 5,
                         rel_tol: float = 0.01, bracket: tuple[float, float] = (0.5, 1.5)
                         ) -> TuningResult:
    """Rescale the monopole until its |S11| dip sits on ``target_f``.

    Starts from the quarter wave in silicon, clipped to the die thickness.
    Each trial measures the dip frequency and rescales the length by
    f_dip / target_f, staying inside ``bracket`` times the initial guess
    and below the die thickness. Returns the trial with the lowest
    |S11|(target_f); ``matched`` is False (with a diagnostic) when no trial
    reaches -10 dB.
    """
    monopoles = [p for p in model.ports if p.kind == "monopole"]
    if not monopoles:
        raise GeometryError("model has no monopole ports to tune")
    port = monopoles[0].index if port is None else port
    guess = initial_length_guess(model, target_f)
    floor = model.layer("interconnect").thickness
    lo = max(bracket[0] * guess, 1.01 * floor)
    hi = min(bracket[1] * guess, model.die_thickness)
    if lo >= hi:
        raise GeometryError(f"tuning bracket [{lo:.4g}, {hi:.4g}] m is empty")
    length = min(max(guess, lo), hi)
    trials: list[_Trial] = []
    for _ in range(max_iter):
        freqs, curve = s11_curve(model, port, length, target_f, dim=dim, policy=policy,
                                 settings=settings)
        k = int(np.argmin(curve))
        at_target = float(np.interp(target_f, freqs, curve))
        trials.append(_Trial(length, at_target, float(freqs[k]), float(curve[k]), curve))
        interior = 0 < k < len(freqs) - 1
        if interior and abs(freqs[k] / target_f - 1) <= rel_tol and at_target < MATCH_DB:
            break
        ratio = freqs[k] / target_f if interior else (1.3 if k == len(freqs) - 1 else 0.7)
        new = min(max(length * ratio, lo), hi)
        if math.isclose(new, length, rel_tol=1e-3):
            break
        length = new
    best = min(trials, key=lambda t: t.s11_target_db)
    matched = best.s11_target_db < MATCH_DB
    diagnostic = "" if matched else (
        f"best |S11|({target_f:g} Hz) = {best.s11_target_db:.2f} dB at length {best.length:.4g} m "
        f"after {len(trials)} trial(s); bracket [{lo:.4g}, {hi:.4g}] m")
    return TuningResult(best.length, best.s11_target_db, best.dip_frequency, best.dip_db, matched,
                        tuple((t.length, t.s11_target_db, t.dip_frequency) for t in trials),
                        diagnostic)


def apply_length(model: PackageModel, length: float) -> PackageModel:
    """Set every monopole on the model to ``length``."""
    return model.with_ports([replace(p, monopole_length=length) if p.kind == "monopole" else p
                             for p in model.ports])
