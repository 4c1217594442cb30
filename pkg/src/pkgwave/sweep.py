"""Parametric package sweeps, design selection and the bump-penetration experiment."""

from __future__ import annotations

import copy
import csv
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.constants import c as C0

from .channel import worst_case_coupling
from .config import ScenarioConfig
from .fdtd import ProbeSpec, RunSettings, SourceSpec, build_yee_grid, run_simulation
from .fdtd.fixtures import box_grid, uniform_axis
from .geometry import GeometryError, PackageModel, PortCell, SizingError, explicit_bump_cell
from .scenario import config_hash, simulate_sparams
from .tuning import apply_length, tune_monopole_length


class SweepError(RuntimeError):
    pass


# ------------------------------------------------------------------ sweeps

@dataclass(frozen=True)
class SweepSpec:
    """Cartesian product of package parameters on top of a base scenario.

    Axis names are package override paths: a layer name sets its thickness
    (``"silicon"``), ``"layer.field"`` sets another layer field
    (``"spreader.material"``), and model keys such as ``"bump_pitch"`` are
    passed through.
    """

    axes: tuple[tuple[str, tuple], ...]
    config: ScenarioConfig = field(default_factory=lambda: ScenarioConfig.from_dict({}))
    retune: bool = False
    variance_penalty: float = 0.5
    target_frequency: float = 60e9

    def __post_init__(self):
        axes = tuple((str(name), tuple(values)) for name, values in self.axes)
        if not axes:
            raise SweepError("a sweep needs at least one axis")
        for name, values in axes:
            if not values:
                raise SweepError(f"axis {name!r} has no values")
        names = [n for n, _ in axes]
        if len(set(names)) != len(names):
            raise SweepError(f"duplicate axis names: {names}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "SweepSpec":
        sw = config.data["sweep"]
        return cls(tuple((k, tuple(v)) for k, v in sw["axes"].items()), config,
                   sw["retune"], sw["variance_penalty"])

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.axes)

    def points(self) -> list[dict]:
        return [dict(zip(self.names, combo)) for combo in itertools.product(*(v for _, v in self.axes))]

    def overrides(self, point: Mapping) -> dict:
        """Package overrides for one point, merged over the base scenario."""
        merged = copy.deepcopy(dict(self.config.data["package"]))
        for path, value in point.items():
            head, _, leaf = path.partition(".")
            if not leaf:
                if isinstance(merged.get(head), Mapping):
                    merged[head] = dict(merged[head], thickness=value)
                else:
                    merged[head] = value
                continue
            base = merged.get(head)
            base = dict(base) if isinstance(base, Mapping) else (
                {} if base is None else {"thickness": base})
            base[leaf] = value
            merged[head] = base
        return merged

    def point_hash(self, point: Mapping) -> str:
        return config_hash({"scenario": self.config.hash(), "point": dict(point),
                            "retune": self.retune, "target": self.target_frequency})


@dataclass
class SweepRow:
    index: int
    values: dict
    hash: str
    status: str = "ok"  # ok | failed
    mean_db: float = math.nan
    std_db: float = math.nan
    s11_db: float = math.nan  # worst |S_ii| at the target frequency
    monopole_length: float = math.nan
    silicon_thickness: float = math.nan
    spreader_thickness: float = 0.0
    steps: int = 0
    decayed: bool = True
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def score(self, variance_penalty: float) -> float:
        return self.mean_db - variance_penalty * self.std_db


_ROW_FIELDS = ("mean_db", "std_db", "s11_db", "monopole_length", "silicon_thickness",
               "spreader_thickness", "steps", "decayed", "status", "diagnostic")


@dataclass
class SweepResult:
    names: tuple[str, ...]
    rows: list[SweepRow]
    band: tuple[float, float] = (55e9, 65e9)
    variance_penalty: float = 0.5

    def successful(self) -> list[SweepRow]:
        return [r for r in self.rows if r.ok]

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "hash", *self.names, "score_db", *_ROW_FIELDS])
            for r in self.rows:
                w.writerow([r.index, r.hash, *(_cell(r.values[n]) for n in self.names),
                            _cell(r.score(self.variance_penalty)),
                            *(_cell(getattr(r, f)) for f in _ROW_FIELDS)])
        return path

    @classmethod
    def from_csv(cls, path, names: Sequence[str]) -> "SweepResult":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                values = {n: _parse(rec[n]) for n in names}
                rows.append(SweepRow(
                    int(rec["index"]), values, rec["hash"], rec["status"],
                    float(rec["mean_db"]), float(rec["std_db"]), float(rec["s11_db"]),
                    float(rec["monopole_length"]), float(rec["silicon_thickness"]),
                    float(rec["spreader_thickness"]), int(rec["steps"]),
                    rec["decayed"] == "True", rec["diagnostic"]))
        return cls(tuple(names), rows)

    def summary(self) -> str:
        lines = [f"points: {len(self.rows)} ({len(self.successful())} ok)",
                 f"band: {self.band[0]:g}-{self.band[1]:g} Hz",
                 f"variance penalty: {self.variance_penalty:g} dB/dB"]
        if self.successful():
            best = select_best(self, self.variance_penalty)
            desc = ", ".join(f"{k}={v!r}" for k, v in best.values.items())
            lines.append(f"optimum: {desc} (mean {best.mean_db:.3f} dB, std {best.std_db:.3f} dB)")
            for r in pareto_front(self):
                desc = ", ".join(f"{k}={v!r}" for k, v in r.values.items())
                lines.append(f"pareto: {desc} (mean {r.mean_db:.3f} dB, std {r.std_db:.3f} dB)")
        for r in self.rows:
            if not r.ok:
                lines.append(f"failed point {r.index}: {r.diagnostic}")
        return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _parse(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _evaluate(spec: SweepSpec, index: int, point: dict, key: str) -> SweepRow:
    cfg = spec.config
    row = SweepRow(index, dict(point), key)
    try:
        model = cfg.build_model(spec.overrides(point))
        row.silicon_thickness = model.layer("silicon").thickness
        row.spreader_thickness = model.layer("spreader").thickness if model.has_layer("spreader") else 0.0
        notes = []
        monopoles = [p for p in model.ports if p.kind == "monopole"]
        if spec.retune and monopoles:
            tuned = tune_monopole_length(model, spec.target_frequency, dim=cfg.dim,
                                         policy=cfg.policy(), settings=cfg.run_settings())
            model = apply_length(model, tuned.length)
            if tuned.diagnostic:
                notes.append("tuning: " + tuned.diagnostic)
        if monopoles:
            row.monopole_length = model.ports[0].monopole_length
        res = simulate_sparams(model, dim=cfg.dim, policy=cfg.policy(), settings=cfg.run_settings(),
                               frequencies=cfg.frequencies())
        summary = worst_case_coupling(res.sparams, cfg.band)
        row.mean_db, row.std_db = summary.mean_db, summary.std_db
        k = int(np.argmin(np.abs(res.sparams.frequencies - spec.target_frequency)))
        with np.errstate(divide="ignore"):
            row.s11_db = float(np.max(20 * np.log10(np.abs(np.diagonal(res.sparams.s[k])))))
        row.steps = max(r.steps for r in res.records)
        row.decayed = res.decayed
        notes += res.warnings
        row.diagnostic = "; ".join(notes)
    except Exception as exc:  # a failed point is reported, never dropped
        row.status = "failed"
        row.diagnostic = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(spec: SweepSpec, *, threads: int = 1, previous: SweepResult | None = None,
              on_row: Callable[[SweepRow], None] | None = None) -> SweepResult:
    """Evaluate every point; rows come back in point order whatever the completion order.

    Rows of ``previous`` whose hash matches a point and that succeeded are
    reused without recomputation.
    """
    points = spec.points()
    done = {r.hash: r for r in (previous.rows if previous else []) if r.ok}
    keys = [spec.point_hash(p) for p in points]
    todo = [(i, p, k) for i, (p, k) in enumerate(zip(points, keys)) if k not in done]

    def work(item):
        row = _evaluate(spec, *item)
        if on_row is not None:
            on_row(row)
        return row

    if threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fresh = list(pool.map(work, todo))
    else:
        fresh = [work(item) for item in todo]
    by_index = {r.index: r for r in fresh}
    rows = []
    for i, (p, k) in enumerate(zip(points, keys)):
        if i in by_index:
            rows.append(by_index[i])
        else:
            old = done[k]
            rows.append(SweepRow(**{**old.__dict__, "index": i, "values": dict(p)}))
    result = SweepResult(spec.names, rows, spec.config.band, spec.variance_penalty)
    if not result.successful():
        raise SweepError("every sweep point failed:\n" + "\n".join(r.diagnostic for r in rows))
    return result


def select_best(result: SweepResult, variance_penalty: float = 0.5) -> SweepRow:
    """argmax of mean - penalty * std; ties go to thinner silicon, then thinner spreader."""
    rows = result.successful()
    if not rows:
        raise SweepError("no successful rows to choose from")
    return min(rows, key=lambda r: (-round(r.score(variance_penalty), 9), r.silicon_thickness,
                                    r.spreader_thickness, r.index))


def pareto_front(result: SweepResult) -> list[SweepRow]:
    """Rows not dominated in (higher mean, lower std)."""
    rows = result.successful()
    front = []
    for r in rows:
        dominated = any(o.mean_db >= r.mean_db and o.std_db <= r.std_db
                        and (o.mean_db > r.mean_db or o.std_db < r.std_db) for o in rows)
        if not dominated:
            front.append(r)
    return sorted(front, key=lambda r: -r.mean_db)


# --------------------------------------------------- bump penetration

@dataclass(frozen=True)
class PenetrationProfile:
    frequency: float
    x: np.ndarray  # metres from the die edge
    magnitude: np.ndarray  # |E| normalised to the die-edge value
    ratio: float  # |E|(die centre) / |E|(die edge)
    steps: int


@dataclass(frozen=True)
class PenetrationResult:
    profiles: dict
    metadata: dict

    def ratio(self, frequency: float) -> float:
        return self.profiles[frequency].ratio

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        freqs = sorted(self.profiles)
        x = self.profiles[freqs[0]].x
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_m"] + [f"e_norm_{f:g}hz" for f in freqs])
            for n, xv in enumerate(x):
                w.writerow([repr(float(xv))] + [repr(float(self.profiles[f].magnitude[n])) for f in freqs])
        return path


def bump_penetration_experiment(model: PackageModel, frequencies: Sequence[float] = (60e9, 1e12), *,
                                cells_per_wavelength: float = 15.0, cell: float | None = None,
                                pml_cells: int = 12, feed_length: float | None = None,
                                settle_transits: float = 3.0) -> PenetrationResult:
    """Field penetration from the die edge into the bump layer.

    The bump layer is a parallel-plate region between the copper layer over
    the bumps and the carrier metallization, with the bumps as PEC posts
    joining the plates. Its fundamental wave has E normal to the plates and
    no variation across the layer height, so a slice one bump pitch wide with
    periodic side walls and two cells across the height is exact for it.
    A plane wave launched just outside the die edge meets the array; the
    DFT of E along the midline between bump columns gives the profile.
    Conductivities are pinned at each excitation frequency.
    """
    if model.bump_mode != "explicit":
        raise GeometryError("the penetration experiment needs bump_mode='explicit'")
    layer = model.bump_layer
    fill = model.library[layer.fill]
    if fill.is_conductor:
        raise GeometryError("the bump fill must be a dielectric")
    pitch, diameter = layer.pitch, layer.diameter
    f_max = max(frequencies)
    needed = C0 / (f_max * math.sqrt(fill.rel_permittivity)) / cells_per_wavelength
    if cell is None:
        cell = explicit_bump_cell(model, needed) if diameter > 0 else needed
    if cell > needed * (1 + 1e-9):
        raise SizingError(f"cell {cell:.3g} m is coarser than lambda/{cells_per_wavelength:g} = "
                          f"{needed:.3g} m at {f_max:g} Hz in {fill.name}",
                          int(math.ceil(model.chip_lateral / needed)))
    length = model.chip_lateral
    feed = feed_length if feed_length is not None else cell * max(20, math.ceil(0.25 * pitch / cell))
    lead = 2 * feed
    x = uniform_axis(length + 2 * lead + 2 * pml_cells * cell, cell, -lead - pml_cells * cell)
    y = uniform_axis(pitch, cell, 0.0)
    z = uniform_axis(layer.thickness, layer.thickness / 2)
    xc = 0.5 * (x[1:] + x[:-1])
    yc = 0.5 * (y[1:] + y[:-1])
    n_posts = int(math.floor(length / pitch + 1e-9))
    centres = pitch * (np.arange(n_posts) + 0.5) + 0.5 * (length - n_posts * pitch)
    if diameter > 0 and n_posts:
        dx = np.min(np.abs(xc[:, None] - centres[None, :]), axis=1)
        post = dx[:, None] ** 2 + (yc[None, :] - 0.5 * pitch) ** 2 < (0.5 * diameter) ** 2
        post &= ((xc > 0) & (xc < length))[:, None]
    else:
        post = np.zeros((len(xc), len(yc)), dtype=bool)
    material_id = np.repeat(post[:, :, None], len(z) - 1, axis=2).astype(np.int16)
    materials = (fill, model.library[layer.material])
    i_src = int(np.argmin(np.abs(x + feed)))

    profiles = {}
    steps_used = {}
    for f in frequencies:
        grid = box_grid(x, y, z, dim=3, materials=materials, material_id=material_id,
                        pml_cells=(pml_cells, 0, 0), periodic_y=True, f_pin=f)
        grid.ports = tuple(PortCell(1 + j * (len(z) - 1) + k, "z", (i_src, j, k), math.inf)
                           for j in range(len(y) - 1) for k in range(len(z) - 1))
        yee = build_yee_grid(grid)
        source = SourceSpec(port=tuple(p.port for p in grid.ports), f0=f, band=(0.5 * f, 1.5 * f),
                            edge_level=0.1)
        transit = (length + 2 * lead) * math.sqrt(fill.rel_permittivity) / C0
        steps = int(math.ceil((source.duration + settle_transits * transit) / yee.dt))
        probe = ProbeSpec("midline", component="z", axis="x", location=(0.0, 0.0, 0.5 * layer.thickness),
                          span=(0.0, length), frequencies=(f,))
        record = run_simulation(yee, source, (probe,),
                                settings=RunSettings(max_steps=steps, min_steps=steps))
        line = record.lines["midline"]
        mag = np.abs(line.spectrum[0])
        edge = mag[0]
        centre = float(np.interp(0.5 * length, line.coords, mag))
        profiles[f] = PenetrationProfile(f, line.coords.copy(), mag / edge, float(centre / edge), record.steps)
        steps_used[f] = record.steps
    meta = {"fill": fill.name, "fill_rel_permittivity": fill.rel_permittivity,
            "bump_pitch": pitch, "bump_diameter": diameter, "cell": cell,
            "conductivity_pinned_at": "each excitation frequency",
            "steps": steps_used}
    return PenetrationResult(profiles, meta)
