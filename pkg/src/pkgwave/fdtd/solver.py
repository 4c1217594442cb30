"""Field state, single steps and full simulation runs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.constants import mu_0 as MU0

from ..geometry import MaterialGrid, PackageModel, ResolutionPolicy, edge_shape, rasterize
from . import kernels
from .grid import PORT_HARD, PMLSpec, YeeGrid, build_yee_grid
from .sources import ProbeSpec, SourceSpec

E_COMPONENTS = ("ex", "ey", "ez")
H_COMPONENTS = ("hx", "hy", "hz")


class InstabilityError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite field values detected at step {step}")
        self.step = step


def h_shape(component: str, nx: int, ny: int, nz: int, dim: int) -> tuple[int, ...]:
    if dim == 2:
        return {"x": (nx + 1, nz), "y": (nx, nz), "z": (nx, nz + 1)}[component]
    return {"x": (nx + 1, ny, nz), "y": (nx, ny + 1, nz), "z": (nx, ny, nz + 1)}[component]


# psi array names in kernel order, with the field component whose shape they share
_PSI_2D = (("hy", "x"), ("hy", "z"), ("hx", "z"), ("hz", "x"),
           ("ex", "z"), ("ey", "x"), ("ey", "z"), ("ez", "x"))
_PSI_3D = (("hx", "y"), ("hx", "z"), ("hy", "z"), ("hy", "x"), ("hz", "x"), ("hz", "y"),
           ("ex", "y"), ("ex", "z"), ("ey", "z"), ("ey", "x"), ("ez", "x"), ("ez", "y"))


@dataclass
class FieldState:
    """All six field components plus the PML auxiliary arrays.

    E is at integer time steps ``n * dt``; H lags by half a step. In 2-D only
    the polarisation(s) being driven are updated; the others stay zero.
    """

    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    psi: tuple[np.ndarray, ...]
    dt: float
    n: int = 0

    @property
    def time(self) -> float:
        return self.n * self.dt

    @classmethod
    def zeros(cls, grid: YeeGrid) -> "FieldState":
        nx, ny, nz = grid.shape
        arrays = {}
        for c in "xyz":
            arrays["e" + c] = np.zeros(edge_shape(c, nx, ny, nz, grid.dim))
            arrays["h" + c] = np.zeros(h_shape(c, nx, ny, nz, grid.dim))
        names = _PSI_2D if grid.dim == 2 else _PSI_3D
        psi = tuple(np.zeros_like(arrays[comp]) for comp, _ in names)
        return cls(psi=psi, dt=grid.dt, **arrays)

    def fields(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in E_COMPONENTS + H_COMPONENTS}

    def copy(self) -> "FieldState":
        return FieldState(*(getattr(self, n).copy() for n in E_COMPONENTS + H_COMPONENTS),
                          psi=tuple(p.copy() for p in self.psi), dt=self.dt, n=self.n)

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.fields().values())


def field_energy(state: FieldState, grid: YeeGrid, e_previous: dict | None = None) -> float:
    """Discrete electromagnetic energy.

    With ``e_previous`` (E one step earlier) this is the quantity the leapfrog
    scheme conserves exactly in a lossless closed cavity:
    0.5 * sum(eps E^n E^{n+1} dV) + 0.5 * sum(mu0 (H^{n+1/2})^2 dV).
    """
    total = 0.0
    for c in "xyz":
        e_new = getattr(state, "e" + c)
        e_old = e_new if e_previous is None else e_previous["e" + c]
        total += kernels.weighted_dot(grid.energy_weight_e[c], e_old, e_new)
        h = getattr(state, "h" + c)
        total += kernels.weighted_dot(grid.energy_weight_h[c], h, h)
    return total


def _kernel_args(grid: YeeGrid):
    CA = tuple(grid.ca[c] for c in "xyz")
    CB = tuple(grid.cb[c] for c in "xyz")
    axes = "xz" if grid.dim == 2 else "xyz"
    inv = tuple(grid.inv_primal[a] for a in axes) + tuple(grid.inv_dual[a] for a in axes)
    prof = []
    flags = []
    for a in axes:
        be, ce, ke, fe = grid.pml_e[a]
        bh, ch, kh, fh = grid.pml_h[a]
        prof += [be, ce, ke, bh, ch, kh]
        flags += [fe, fh]
    return CA, CB, inv + tuple(prof), tuple(flags)


def active_modes(grid: YeeGrid, extra_components: Iterable[str] = ()) -> tuple[bool, bool]:
    """2-D polarisations to update: (Ex, Ez, Hy) and (Ey, Hx, Hz)."""
    comps = {"xyz"[c] for c in grid.port_coeffs.component} | set(extra_components)
    return bool(comps & {"x", "z"}), "y" in comps


class _Stepper:
    """Holds kernel arguments so repeated chunks avoid re-packing."""

    def __init__(self, grid: YeeGrid, state: FieldState, modes: tuple[bool, bool]):
        self.grid = grid
        self.state = state
        self.CA, self.CB, self.L, self.FL = _kernel_args(grid)
        self.db = grid.dt / MU0
        self.modes = modes
        pcf = grid.port_coeffs
        self.ports = (pcf.component, pcf.i, pcf.j, pcf.k, pcf.cs, pcf.dl, pcf.conductance, pcf.mode)

    def run(self, vs: np.ndarray, rec_v: np.ndarray, rec_i: np.ndarray, n0: int, nsteps: int):
        s = self.state
        F = (s.ex, s.ey, s.ez, s.hx, s.hy, s.hz)
        if self.grid.dim == 2:
            kernels.step_chunk_2d(F, self.CA, self.CB, s.psi, self.L, self.FL, self.db,
                                  self.modes[0], self.modes[1], *self.ports,
                                  vs, rec_v, rec_i, n0, nsteps)
        else:
            kernels.step_chunk_3d(F, self.CA, self.CB, s.psi, self.L, self.FL, self.db,
                                  self.grid.periodic_y, *self.ports, vs, rec_v, rec_i, n0, nsteps)
        s.n += nsteps


def step(state: FieldState, grid: YeeGrid, sources: Sequence[SourceSpec] = ()) -> FieldState:
    """Advance ``state`` by one leapfrog iteration in place and return it.

    Sources drive their ports with the waveform sampled at (n + 1/2) dt; all
    other ports act as matched resistive terminations.
    """
    nports = len(grid.ports)
    vs = np.zeros((nports, 1))
    t = (state.n + 0.5) * grid.dt
    port_pos = {p.port: idx for idx, p in enumerate(grid.ports)}
    for src in sources:
        for port in src.ports:
            if port not in port_pos:
                raise ValueError(f"source port {port} is not on the grid")
            vs[port_pos[port], 0] += src.waveform(np.array([t]))[0]
    rec_v = np.zeros((nports, 1))
    rec_i = np.zeros((nports, 1))
    extra = ()
    if grid.dim == 2 and not nports:
        extra = ("x", "y", "z")
    _Stepper(grid, state, active_modes(grid, extra)).run(vs, rec_v, rec_i, 0, 1)
    if not state.all_finite():
        raise InstabilityError(state.n)
    return state


@dataclass
class RunSettings:
    max_steps: int = 200_000
    min_steps: int = 0
    energy_decay: float = 1e-6
    check_interval: int = 200
    cfl_safety: float = 0.99
    pml: PMLSpec = field(default_factory=PMLSpec)
    snapshot_steps: tuple[int, ...] = ()
    snapshot_dir: str | None = None
    keep_snapshots: bool = True
    modes: tuple[bool, bool] | None = None

    def __post_init__(self):
        if self.max_steps < 1 or self.check_interval < 1:
            raise ValueError("max_steps and check_interval must be positive")
        if not 0 < self.energy_decay < 1:
            raise ValueError("energy_decay must be in (0, 1)")


@dataclass
class FieldLineRecord:
    name: str
    component: str
    axis: str
    coords: np.ndarray
    frequencies: np.ndarray
    spectrum: np.ndarray  # (n_freq, n_points) complex
    indices: tuple
    times: np.ndarray | None = None
    samples: np.ndarray | None = None  # (n_times, n_points) when keep_time is set


@dataclass
class SimulationRecord:
    """Port time records of one run.

    ``voltage[p, n]`` and ``current[p, n]`` are sampled at ``(n + 1/2) dt``;
    current flows into the structure through the port resistor.
    """

    dt: float
    port_ids: tuple[int, ...]
    excited: int | None
    source: SourceSpec | None
    voltage: np.ndarray
    current: np.ndarray
    steps: int
    decayed: bool
    energy: np.ndarray  # columns: step, W
    lines: dict[str, FieldLineRecord] = field(default_factory=dict)
    snapshots: list[tuple[int, dict[str, np.ndarray]]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    grid_summary: dict = field(default_factory=dict)
    resistance: tuple[float, ...] = ()

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.steps) + 0.5) * self.dt

    def port_row(self, port: int) -> int:
        return self.port_ids.index(port)


def _line_indices(grid: YeeGrid, probe: ProbeSpec):
    comp, axis = probe.component, probe.axis
    coords = {"x": grid.x, "y": grid.y, "z": grid.z}
    centres = {a: 0.5 * (v[1:] + v[:-1]) for a, v in coords.items()}
    axes = "xz" if grid.dim == 2 else "xyz"
    if axis not in axes:
        raise ValueError(f"line axis {axis!r} not available in {grid.dim}-D")
    index = []
    line_coords = None
    for a in axes:
        pos = centres[a] if a == comp else coords[a]
        if a == axis:
            sel = np.arange(len(pos))
            if probe.span is not None:
                lo, hi = probe.span
                sel = sel[(pos >= lo) & (pos <= hi)]
                if not len(sel):
                    raise ValueError(f"probe {probe.name}: empty span {probe.span}")
            index.append(sel)
            line_coords = pos[sel]
        else:
            value = probe.location["xyz".index(a)]
            if not pos[0] <= value <= pos[-1]:
                raise ValueError(f"probe {probe.name}: {a} = {value} lies outside the grid")
            index.append(int(np.argmin(np.abs(pos - value))))
    return tuple(index), line_coords


def run_simulation(target, source: SourceSpec | None, probes: Sequence[ProbeSpec] = (), *,
                   settings: RunSettings | None = None, policy: ResolutionPolicy | None = None,
                   dim: int = 2, initial_state: FieldState | None = None) -> SimulationRecord:
    """Time-march until the stored energy decays below ``energy_decay`` of its peak.

    ``target`` may be a PackageModel (rasterized with ``policy``), a
    MaterialGrid or a ready YeeGrid.
    """
    settings = settings or RunSettings()
    hard = source.ports if source is not None and source.hard else ()
    if isinstance(target, PackageModel):
        target = rasterize(target, policy, dim=dim)
    if isinstance(target, MaterialGrid):
        grid = build_yee_grid(target, cfl_safety=settings.cfl_safety, pml=settings.pml,
                              hard_ports=hard)
    elif isinstance(target, YeeGrid):
        grid = target
        modes = {p.port: m for p, m in zip(grid.ports, grid.port_coeffs.mode)}
        if any(modes.get(p) != PORT_HARD for p in hard):
            raise ValueError("hard source requested but the grid was built with a soft port")
    else:
        raise TypeError(f"cannot simulate a {type(target).__name__}")

    port_ids = tuple(p.port for p in grid.ports)
    if source is not None and not set(source.ports) <= set(port_ids):
        raise ValueError(f"excited port(s) {source.ports} not on the grid (ports: {port_ids})")
    nports = len(port_ids)
    state = initial_state if initial_state is not None else FieldState.zeros(grid)
    extra = [p.component for p in probes if p.kind == "field_line"]
    if initial_state is not None:
        extra += ["x", "y", "z"]
    modes = settings.modes or active_modes(grid, extra)
    stepper = _Stepper(grid, state, modes)

    lines = []
    for probe in probes:
        if probe.kind != "field_line":
            if probe.port is not None and probe.port not in port_ids:
                raise ValueError(f"probe {probe.name}: unknown port {probe.port}")
            continue
        idx, coords = _line_indices(grid, probe)
        freqs = np.asarray(probe.frequencies, dtype=float)
        lines.append((probe, idx, FieldLineRecord(
            probe.name, probe.component, probe.axis, coords, freqs,
            np.zeros((len(freqs), len(coords)), dtype=complex), idx)))

    cap = min(settings.max_steps, 20_000)
    vs = np.zeros((nports, cap))
    rec_v = np.zeros((nports, cap))
    rec_i = np.zeros((nports, cap))
    src_rows = [port_ids.index(p) for p in source.ports] if source is not None else []

    def fill_source(start: int, stop: int):
        if src_rows:
            t = (np.arange(start, stop) + 0.5) * grid.dt
            vs[src_rows, start:stop] = source.waveform(t)

    fill_source(0, cap)
    min_steps = settings.min_steps
    if source is not None:
        min_steps = max(min_steps, int(math.ceil(source.duration / grid.dt)))
    check = settings.check_interval
    snaps = sorted(set(s for s in settings.snapshot_steps if 0 < s <= settings.max_steps))
    snapshots = []
    series: dict[str, list] = {}
    energy_log = []
    peak = 0.0
    decayed = False
    n = 0
    while n < settings.max_steps:
        stops = [settings.max_steps, (n // check + 1) * check]
        stops += [(n // p.cadence + 1) * p.cadence for p, _, _ in lines]
        stops += [s for s in snaps if s > n]
        stop = min(stops)
        if stop > cap:
            new_cap = min(settings.max_steps, max(2 * cap, stop))
            vs = np.concatenate([vs, np.zeros((nports, new_cap - cap))], axis=1)
            rec_v = np.concatenate([rec_v, np.zeros((nports, new_cap - cap))], axis=1)
            rec_i = np.concatenate([rec_i, np.zeros((nports, new_cap - cap))], axis=1)
            fill_source(cap, new_cap)
            cap = new_cap
        at_check = stop % check == 0 or stop == settings.max_steps
        if at_check:
            if stop - n > 1:
                stepper.run(vs, rec_v, rec_i, n, stop - n - 1)
            e_prev = {name: getattr(state, name).copy() for name in E_COMPONENTS}
            stepper.run(vs, rec_v, rec_i, stop - 1, 1)
        else:
            stepper.run(vs, rec_v, rec_i, n, stop - n)
        n = stop

        for probe, idx, rec in lines:
            if n % probe.cadence == 0:
                values = getattr(state, "e" + probe.component)[idx]
                phase = np.exp(-2j * math.pi * rec.frequencies * n * grid.dt)
                rec.spectrum += np.outer(phase, values) * (probe.cadence * grid.dt)
                if probe.keep_time:
                    series.setdefault(probe.name, []).append((n * grid.dt, values.copy()))
        if n in snaps:
            snap = {k: v.copy() for k, v in state.fields().items()}
            if settings.snapshot_dir is not None:
                from .snapshots import write_snapshot
                write_snapshot(f"{settings.snapshot_dir}/snapshot_{n:07d}.bin", state, grid)
            if settings.keep_snapshots:
                snapshots.append((n, snap))
        if at_check:
            w = field_energy(state, grid, e_prev)
            if not math.isfinite(w):
                raise InstabilityError(n)
            energy_log.append((n, w))
            peak = max(peak, abs(w))
            if n >= min_steps and peak > 0 and abs(w) < settings.energy_decay * peak:
                decayed = True
                break
            if source is None and peak == 0 and n >= min_steps:
                decayed = True
                break

    for probe, _, rec in lines:
        if probe.keep_time and probe.name in series:
            rec.times = np.array([t for t, _ in series[probe.name]])
            rec.samples = np.array([v for _, v in series[probe.name]])
    notes = []
    if not decayed:
        msg = (f"field energy did not decay below {settings.energy_decay:g} of its peak within "
               f"{settings.max_steps} steps")
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return SimulationRecord(
        dt=grid.dt, port_ids=port_ids, excited=source.ports[0] if source is not None else None,
        source=source, voltage=rec_v[:, :n].copy(), current=rec_i[:, :n].copy(), steps=n,
        decayed=decayed, energy=np.array(energy_log).reshape(-1, 2),
        lines={rec.name: rec for _, _, rec in lines}, snapshots=snapshots, warnings=notes,
        grid_summary=grid.source_grid.summary() if grid.source_grid is not None else {},
        resistance=tuple(float(r) for r in grid.port_coeffs.resistance))
