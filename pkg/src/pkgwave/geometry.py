"""Declarative flip-chip package model and its rasterization onto a grid.

Coordinates: ``x`` and ``y`` are lateral with the chip occupying
``[0, chip_lateral]``; the carrier is centred on the chip. ``z`` is vertical
with ``z = 0`` at the bottom of the lowest layer. All lengths are metres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.constants import c as C0

from .materials import DEFAULT_PIN_FREQUENCY, Material, MaterialLibrary, builtin_library

LAYER_ORDER = ("heat_sink", "spreader", "silicon", "interconnect", "bumps",
               "carrier", "solder_balls", "pcb")
OPTIONAL_LAYERS = frozenset({"spreader"})
LAYER_KINDS = ("dielectric", "conductor", "bump_array")
BUMP_MODES = ("homogenized_pec", "explicit")
ANTENNA_KINDS = ("point_dipole", "monopole", "patch")


class GeometryError(ValueError):
    pass


class SizingError(RuntimeError):
    """Raised when a grid cannot satisfy the resolution policy within budget."""

    def __init__(self, message: str, required_cells: int):
        super().__init__(message)
        self.required_cells = required_cells


@dataclass(frozen=True)
class Layer:
    name: str
    thickness: float
    material: str
    kind: str = "dielectric"
    extent: str = "carrier"  # lateral span: "chip" or "carrier"
    pitch: float | None = None
    diameter: float | None = None
    fill: str = "alumina"  # material between bumps in explicit mode

    def __post_init__(self):
        if not (self.thickness > 0 and math.isfinite(self.thickness)):
            raise GeometryError(f"layer {self.name!r}: thickness must be > 0, got {self.thickness}")
        if self.kind not in LAYER_KINDS:
            raise GeometryError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        if self.extent not in ("chip", "carrier"):
            raise GeometryError(f"layer {self.name!r}: unknown extent {self.extent!r}")
        if self.kind == "bump_array":
            if self.pitch is None or self.diameter is None:
                raise GeometryError("bump_array layers need pitch and diameter")
            if not 0 <= self.diameter < self.pitch:
                raise GeometryError(
                    f"bump diameter {self.diameter} must be in [0, pitch={self.pitch})")


@dataclass(frozen=True)
class PortPlacement:
    index: int
    kind: str
    x: float
    y: float
    monopole_length: float | None = None
    patch_length: float | None = None
    patch_width: float | None = None
    feed_layer: str = "interconnect"

    def __post_init__(self):
        if self.kind not in ANTENNA_KINDS:
            raise GeometryError(f"unknown antenna kind {self.kind!r}")
        if self.kind == "monopole" and self.monopole_length is not None and self.monopole_length <= 0:
            raise GeometryError("monopole_length must be > 0")


def quarter_wave_length(f: float, rel_permittivity: float) -> float:
    """lambda/4 in a medium, the starting guess for a monopole."""
    return C0 / (4.0 * f * math.sqrt(rel_permittivity))


def half_wave_patch_length(f: float, rel_permittivity: float) -> float:
    return C0 / (2.0 * f * math.sqrt(rel_permittivity))


@dataclass(frozen=True)
class PackageModel:
    layers: tuple[Layer, ...]
    chip_lateral: float = 22e-3
    carrier_lateral: float = 33e-3
    bump_mode: str = "homogenized_pec"
    ports: tuple[PortPlacement, ...] = ()
    library: MaterialLibrary = field(default_factory=builtin_library)
    f_pin: float = DEFAULT_PIN_FREQUENCY

    def __post_init__(self):
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise GeometryError(f"duplicate layer names: {names}")
        unknown = [n for n in names if n not in LAYER_ORDER]
        if unknown:
            raise GeometryError(f"unknown layer(s) {unknown}; expected names from {LAYER_ORDER}")
        if names != [n for n in LAYER_ORDER if n in names]:
            raise GeometryError(f"layers out of order: {names}")
        missing = [n for n in LAYER_ORDER if n not in names and n not in OPTIONAL_LAYERS]
        if missing:
            raise GeometryError(f"missing required layer(s): {missing}")
        if not 0 < self.chip_lateral < self.carrier_lateral:
            raise GeometryError(
                f"need 0 < chip_lateral < carrier_lateral, got {self.chip_lateral}, {self.carrier_lateral}")
        if self.bump_mode not in BUMP_MODES:
            raise GeometryError(f"unknown bump_mode {self.bump_mode!r}")
        for layer in self.layers:
            mat = self.library[layer.material]
            if layer.kind == "conductor" and not mat.is_conductor:
                raise GeometryError(f"layer {layer.name!r} is a conductor but {mat.name!r} is not")
            if layer.kind == "dielectric" and mat.is_conductor:
                raise GeometryError(f"layer {layer.name!r} is a dielectric but {mat.name!r} is a conductor")
        ids = [p.index for p in self.ports]
        if len(set(ids)) != len(ids):
            raise GeometryError(f"duplicate port indices: {ids}")
        for p in self.ports:
            if not (0 < p.x < self.chip_lateral and 0 < p.y < self.chip_lateral):
                raise GeometryError(f"port {p.index} at ({p.x}, {p.y}) is outside the chip footprint")

    # -- queries -------------------------------------------------------
    def layer(self, name: str) -> Layer:
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(f"no layer named {name!r}")

    def has_layer(self, name: str) -> bool:
        return any(l.name == name for l in self.layers)

    @property
    def bump_layer(self) -> Layer:
        return self.layer("bumps")

    @property
    def bump_pitch(self) -> float:
        return self.bump_layer.pitch

    @property
    def bump_diameter(self) -> float:
        return self.bump_layer.diameter

    @property
    def total_height(self) -> float:
        return float(sum(l.thickness for l in self.layers))

    @property
    def die_thickness(self) -> float:
        """Silicon plus interconnect: the longest through-silicon via."""
        return self.layer("silicon").thickness + self.layer("interconnect").thickness

    def z_bounds(self) -> dict[str, tuple[float, float]]:
        """Layer name -> (z_bottom, z_top); layers listed top to bottom."""
        out = {}
        z = 0.0
        for layer in reversed(self.layers):
            out[layer.name] = (z, z + layer.thickness)
            z += layer.thickness
        return dict(reversed(list(out.items())))

    def lateral_span(self, layer: Layer) -> tuple[float, float]:
        if layer.extent == "chip":
            return 0.0, self.chip_lateral
        pad = 0.5 * (self.carrier_lateral - self.chip_lateral)
        return -pad, self.chip_lateral + pad

    def with_ports(self, ports: Sequence[PortPlacement]) -> "PackageModel":
        return replace(self, ports=tuple(ports))

    def with_layer(self, name: str, **changes) -> "PackageModel":
        layers = tuple(replace(l, **changes) if l.name == name else l for l in self.layers)
        if not any(l.name == name for l in self.layers):
            raise KeyError(f"no layer named {name!r}")
        return replace(self, layers=layers)


def _default_layers() -> list[Layer]:
    return [
        Layer("heat_sink", 0.5e-3, "aluminum", "conductor", "carrier"),
        Layer("spreader", 0.25e-3, "thermal_conductor", "dielectric", "chip"),
        Layer("silicon", 0.489e-3, "silicon", "dielectric", "chip"),
        Layer("interconnect", 13e-6, "sio2", "dielectric", "chip"),
        Layer("bumps", 87.5e-6, "solder", "bump_array", "chip", pitch=100e-6, diameter=60e-6),
        Layer("carrier", 0.5e-3, "alumina", "dielectric", "carrier"),
        Layer("solder_balls", 0.32e-3, "lead", "conductor", "carrier"),
        Layer("pcb", 0.5e-3, "epoxy", "dielectric", "carrier"),
    ]


_MODEL_KEYS = {"chip_lateral", "carrier_lateral", "bump_mode", "bump_pitch",
               "bump_diameter", "f_pin"}
_LAYER_FIELDS = {"thickness", "material", "pitch", "diameter"}


def default_flip_chip_package(overrides: Mapping | None = None,
                              library: MaterialLibrary | None = None) -> PackageModel:
    """Baseline package stack, optionally modified.

    ``overrides`` keys are layer names (value: thickness in metres, or a dict
    with ``thickness``/``material``/``pitch``/``diameter``) or one of
    ``chip_lateral``, ``carrier_lateral``, ``bump_mode``, ``bump_pitch``,
    ``bump_diameter``, ``f_pin``. A spreader thickness of 0 removes the
    spreader layer; any other non-positive thickness is rejected.
    """
    overrides = dict(overrides or {})
    library = library or builtin_library()
    layers = {l.name: l for l in _default_layers()}
    model_kw = {}
    for key, value in overrides.items():
        if key in _MODEL_KEYS:
            model_kw[key] = value
            continue
        if key not in layers:
            raise GeometryError(f"unknown override {key!r}")
        changes = dict(value) if isinstance(value, Mapping) else {"thickness": value}
        bad = set(changes) - _LAYER_FIELDS
        if bad:
            raise GeometryError(f"unknown field(s) {sorted(bad)} for layer {key!r}")
        if "material" in changes and changes["material"] not in library:
            raise GeometryError(f"layer {key!r}: unknown material {changes['material']!r}")
        thickness = changes.get("thickness")
        if thickness is not None and thickness == 0 and key in OPTIONAL_LAYERS:
            layers[key] = None
            continue
        layers[key] = replace(layers[key], **changes)

    bump_kw = {k[len("bump_"):]: model_kw.pop(k) for k in ("bump_pitch", "bump_diameter") if k in model_kw}
    if bump_kw:
        layers["bumps"] = replace(layers["bumps"], **bump_kw)
    return PackageModel(layers=tuple(l for l in layers.values() if l is not None),
                        library=library, **model_kw)


def default_monopole_length(model: PackageModel, design_frequency: float = 60e9) -> float:
    """Quarter wave in silicon, capped at the die thickness (the via cannot leave the die)."""
    quarter = quarter_wave_length(design_frequency, model.library["silicon"].rel_permittivity)
    return min(quarter, model.die_thickness)


def place_port_grid(model: PackageModel, rows: int = 4, cols: int = 4,
                    antenna_kind: str = "monopole", *, monopole_length: float | None = None,
                    patch_length: float | None = None, patch_width: float | None = None,
                    design_frequency: float = 60e9) -> PackageModel:
    """Uniform rows x cols antenna grid over the chip with half-pitch edge margins."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise GeometryError(f"need rows*cols >= 2, got {rows}x{cols}")
    pitch_x = model.chip_lateral / cols
    pitch_y = model.chip_lateral / rows
    clearance = 2.0 * model.bump_pitch
    if antenna_kind == "monopole" and min(pitch_x, pitch_y) < clearance:
        raise GeometryError(
            f"antenna pitch {min(pitch_x, pitch_y):.3e} m is below the monopole clearance "
            f"of two bump pitches ({clearance:.3e} m)")
    if antenna_kind == "monopole" and monopole_length is None:
        monopole_length = default_monopole_length(model, design_frequency)
    if antenna_kind == "patch":
        eps = model.library[model.layer("interconnect").material].rel_permittivity
        patch_length = patch_length or half_wave_patch_length(design_frequency, eps)
        patch_width = patch_width or patch_length
    ports = []
    for r in range(rows):
        for c in range(cols):
            ports.append(PortPlacement(
                index=len(ports) + 1, kind=antenna_kind,
                x=pitch_x * (c + 0.5), y=pitch_y * (r + 0.5),
                monopole_length=monopole_length if antenna_kind == "monopole" else None,
                patch_length=patch_length, patch_width=patch_width))
    return model.with_ports(ports)


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolutionPolicy:
    f_max: float = 73e9
    cells_per_wavelength: float = 15.0
    min_cells_per_layer: int = 2
    grading_ratio: float = 1.3
    f_center: float = 60e9
    air_margin: float | None = None  # default: quarter free-space wavelength at f_center
    pml_cells: int = 10
    max_cells: int = 4_000_000
    depth_2d: float = 1e-3  # y thickness of the single 2-D cell

    def __post_init__(self):
        if self.f_max <= 0 or self.cells_per_wavelength <= 0:
            raise GeometryError("f_max and cells_per_wavelength must be positive")
        if self.min_cells_per_layer < 1:
            raise GeometryError("min_cells_per_layer must be >= 1")
        if not 1.0 < self.grading_ratio <= 2.0:
            raise GeometryError("grading_ratio must be in (1, 2]")
        if self.pml_cells < 0:
            raise GeometryError("pml_cells must be >= 0")

    @property
    def margin(self) -> float:
        if self.air_margin is not None:
            return self.air_margin
        return C0 / self.f_center / 4.0

    def max_cell(self, material: Material) -> float:
        return C0 / (self.f_max * math.sqrt(material.rel_permittivity)) / self.cells_per_wavelength


@dataclass(frozen=True)
class PortCell:
    """A lumped port on one Yee edge. ``index`` is (i, j, k); j = 0 in 2-D."""
    port: int
    component: str
    index: tuple[int, int, int]
    resistance: float = 50.0


@dataclass
class MaterialGrid:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    material_id: np.ndarray  # (Nx, Ny, Nz) int
    materials: tuple[Material, ...]
    pec: np.ndarray  # (Nx, Ny, Nz) bool
    pec_edges: dict[str, np.ndarray]  # extra PEC edges: wires and sheets
    ports: tuple[PortCell, ...]
    dim: int
    pml_cells: tuple[int, int, int]
    layer_bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    pillar_count: int = 0
    f_pin: float = DEFAULT_PIN_FREQUENCY
    f_max: float = 73e9
    periodic_y: bool = False

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.x) - 1, len(self.y) - 1, len(self.z) - 1

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz

    def cell_sizes(self, axis: str) -> np.ndarray:
        return np.diff(getattr(self, axis))

    def centers(self, axis: str) -> np.ndarray:
        a = getattr(self, axis)
        return 0.5 * (a[1:] + a[:-1])

    def eps_r(self) -> np.ndarray:
        table = np.array([m.rel_permittivity if not m.is_conductor else 1.0 for m in self.materials])
        return table[self.material_id]

    def sigma(self) -> np.ndarray:
        table = np.array([0.0 if m.is_conductor else m.conductivity(self.f_pin) for m in self.materials])
        return table[self.material_id]

    def node_index(self, axis: str, value: float) -> int:
        return int(np.argmin(np.abs(getattr(self, axis) - value)))

    def summary(self) -> dict:
        nx, ny, nz = self.shape
        return {
            "dim": self.dim, "shape": [nx, ny, nz], "n_cells": self.n_cells,
            "min_cell": {a: float(self.cell_sizes(a).min()) for a in "xyz"},
            "max_cell": {a: float(self.cell_sizes(a).max()) for a in "xyz"},
            "pml_cells": list(self.pml_cells), "f_pin": self.f_pin, "f_max": self.f_max,
            "pillar_count": self.pillar_count, "ports": len(self.ports),
        }


def edge_shape(component: str, nx: int, ny: int, nz: int, dim: int) -> tuple[int, ...]:
    """Array shape of an E component on the Yee grid (2-D drops the y axis)."""
    if dim == 2:
        return {"x": (nx, nz + 1), "y": (nx + 1, nz + 1), "z": (nx + 1, nz)}[component]
    return {"x": (nx, ny + 1, nz + 1), "y": (nx + 1, ny, nz + 1),
            "z": (nx + 1, ny + 1, nz)}[component]


def graded_axis(breaks: Sequence[float], hmax: Sequence[float], ratio: float = 1.3,
                min_cells: Sequence[int] | None = None) -> np.ndarray:
    """Nodes hitting every breakpoint, cell size <= hmax per interval, and
    adjacent-cell size ratio <= ``ratio``.

    The local size bound is h(z) = min_j(h_j + (r - 1) * dist(z, I_j)), which
    is the envelope of geometric growth away from each interval. Each interval
    is then split by inverting the cumulative integral of 1/h.
    """
    breaks = np.asarray(breaks, dtype=float)
    hmax = np.asarray(hmax, dtype=float)
    if np.any(np.diff(breaks) <= 0):
        raise GeometryError("breakpoints must be strictly increasing")
    if len(hmax) != len(breaks) - 1:
        raise GeometryError("need one hmax per interval")
    min_cells = np.ones(len(hmax), dtype=int) if min_cells is None else np.asarray(min_cells)
    # an interval narrower than its hmax still forces cells no wider than itself
    hmax = np.minimum(hmax, np.diff(breaks) / np.maximum(min_cells, 1))

    def local_h(zs, growth):
        h = np.full_like(zs, np.inf)
        for (a, b), hj in zip(zip(breaks[:-1], breaks[1:]), hmax):
            dist = np.maximum(0.0, np.maximum(a - zs, zs - b))
            h = np.minimum(h, hj + growth * dist)
        return h

    growth = ratio - 1.0
    widths = np.diff(breaks)
    for _ in range(40):
        nodes = [breaks[0]]
        counts = []
        for idx, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
            zs = np.linspace(a, b, 513)
            inv = 1.0 / local_h(zs, growth)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(zs))])
            n = max(int(min_cells[idx]), int(math.ceil(cum[-1] - 1e-6)))
            counts.append(n)
            targets = np.arange(1, n) * cum[-1] / n
            nodes.extend(np.interp(targets, cum, zs))
            nodes.append(b)
        nodes = np.asarray(nodes)
        h = np.diff(nodes)
        worst = np.max(np.maximum(h[1:] / h[:-1], h[:-1] / h[1:])) if len(h) > 1 else 1.0
        if worst <= ratio + 1e-9:
            return nodes
        # rounding n up shrinks short intervals below the envelope; let neighbours see it
        hmax = np.minimum(hmax, widths / np.asarray(counts))
        growth *= 0.9
    raise GeometryError(f"could not grade axis to ratio {ratio} (worst {worst:.3f})")


def _extend_pml(nodes: np.ndarray, n_pml: int) -> np.ndarray:
    if n_pml == 0:
        return nodes
    h_lo = nodes[1] - nodes[0]
    h_hi = nodes[-1] - nodes[-2]
    lo = nodes[0] - h_lo * np.arange(n_pml, 0, -1)
    hi = nodes[-1] + h_hi * np.arange(1, n_pml + 1)
    return np.concatenate([lo, nodes, hi])


def _layer_hmax(layer: Layer, model: PackageModel, policy: ResolutionPolicy) -> float:
    floor = layer.thickness / policy.min_cells_per_layer
    if layer.kind == "conductor":
        return floor
    if layer.kind == "bump_array":
        if model.bump_mode == "homogenized_pec":
            return floor
        return min(floor, policy.max_cell(model.library[layer.fill]))
    return min(floor, policy.max_cell(model.library[layer.material]))


def _lateral_hmax(model: PackageModel, policy: ResolutionPolicy, inside_chip: bool) -> float:
    h = policy.max_cell(model.library["vacuum"])
    for layer in model.layers:
        if layer.extent == "chip" and not inside_chip:
            continue
        mat = model.library[layer.fill if layer.kind == "bump_array" else layer.material]
        if not mat.is_conductor:
            h = min(h, policy.max_cell(mat))
    return h


def explicit_bump_cell(model: PackageModel, h_target: float) -> float:
    """Uniform lateral cell that puts every pillar edge on a node."""
    pitch, diam = model.bump_pitch, model.bump_diameter
    unit = 1e-9
    parts = [round(v / unit) for v in (0.5 * (pitch - diam), diam) if round(v / unit) > 0]
    g = parts[0]
    for p in parts[1:]:
        g = math.gcd(g, p)
    h = g * unit
    return h / math.ceil(h / min(h_target, (pitch - diam) / 3 if diam > 0 else h_target) - 1e-9)


def _lateral_axis(model: PackageModel, policy: ResolutionPolicy, port_coords: Sequence[float]) -> np.ndarray:
    margin = policy.margin
    pad = 0.5 * (model.carrier_lateral - model.chip_lateral)
    chip = model.chip_lateral
    h_chip = _lateral_hmax(model, policy, inside_chip=True)
    h_out = _lateral_hmax(model, policy, inside_chip=False)
    h_air = policy.max_cell(model.library["vacuum"])
    explicit = model.bump_mode == "explicit" and model.bump_diameter > 0
    if explicit:
        h_chip = explicit_bump_cell(model, h_chip)
        chip_breaks = [0.0, chip]
    else:
        chip_breaks = sorted({0.0, chip, *[p for p in port_coords if 0 < p < chip]})
    breaks = [-pad - margin, -pad] + chip_breaks + [chip + pad, chip + pad + margin]
    hmax = [h_air, h_out] + [h_chip] * (len(chip_breaks) - 1) + [h_out, h_air]
    return graded_axis(breaks, hmax, policy.grading_ratio)


def rasterize(model: PackageModel, policy: ResolutionPolicy | None = None, *, dim: int = 2,
              section_y: float | None = None, port_resistance: float = 50.0) -> MaterialGrid:
    """Map the package onto a nonuniform rectilinear grid.

    In 2-D the grid is the vertical x-z cross-section at ``section_y``
    (default: the common y of the ports, else the chip centre).
    """
    policy = policy or ResolutionPolicy()
    if dim not in (2, 3):
        raise GeometryError(f"dim must be 2 or 3, got {dim}")
    if dim == 2:
        if any(p.kind == "patch" for p in model.ports):
            raise GeometryError("patch antennas need a 3-D grid (planar resonance is inherently 3-D)")
        ys = {round(p.y, 12) for p in model.ports}
        if section_y is None:
            section_y = ys.pop() if len(ys) == 1 else 0.5 * model.chip_lateral
            ys = {round(section_y, 12)} if model.ports else set()
        if model.ports and ys != {round(section_y, 12)}:
            raise GeometryError("2-D cross-section requires all ports on the section line y = const")

    bounds = model.z_bounds()
    margin = policy.margin
    z_breaks = [-margin]
    z_hmax = []
    z_min_cells = []
    h_air = policy.max_cell(model.library["vacuum"])
    z_hmax.append(h_air)
    z_min_cells.append(1)
    for layer in reversed(model.layers):
        z_breaks.append(bounds[layer.name][0])
        z_hmax.append(_layer_hmax(layer, model, policy))
        z_min_cells.append(policy.min_cells_per_layer)
    z_breaks.append(model.total_height)
    z_breaks.append(model.total_height + margin)
    z_hmax.append(h_air)
    z_min_cells.append(1)
    z = graded_axis(z_breaks, z_hmax, policy.grading_ratio, z_min_cells)

    x = _lateral_axis(model, policy, [p.x for p in model.ports] + _patch_coords(model, "x"))
    n_pml = policy.pml_cells
    x = _extend_pml(x, n_pml)
    z = _extend_pml(z, n_pml)
    if dim == 3:
        y = _extend_pml(_lateral_axis(model, policy, [p.y for p in model.ports] + _patch_coords(model, "y")), n_pml)
        pml = (n_pml, n_pml, n_pml)
    else:
        y = np.array([section_y - 0.5 * policy.depth_2d, section_y + 0.5 * policy.depth_2d])
        pml = (n_pml, 0, n_pml)

    nx, ny, nz = len(x) - 1, len(y) - 1, len(z) - 1
    total = nx * ny * nz
    if total > policy.max_cells:
        raise SizingError(
            f"grid needs {total} cells ({nx}x{ny}x{nz}) but the budget is {policy.max_cells}", total)

    materials = list(dict.fromkeys(["vacuum"] + [l.material for l in model.layers] +
                                   [l.fill for l in model.layers if l.kind == "bump_array"]))
    mat_index = {name: i for i, name in enumerate(materials)}
    material_id = np.zeros((nx, ny, nz), dtype=np.int16)
    pec = np.zeros((nx, ny, nz), dtype=bool)
    xc = 0.5 * (x[1:] + x[:-1])
    yc = 0.5 * (y[1:] + y[:-1])
    zc = 0.5 * (z[1:] + z[:-1])
    pillar_count = 0
    for layer in model.layers:
        z_lo, z_hi = bounds[layer.name]
        lo, hi = model.lateral_span(layer)
        in_z = (zc > z_lo) & (zc < z_hi)
        in_x = (xc > lo) & (xc < hi)
        in_y = (yc > lo) & (yc < hi) if dim == 3 else np.ones(ny, dtype=bool)
        region = in_x[:, None, None] & in_y[None, :, None] & in_z[None, None, :]
        if layer.kind == "bump_array" and model.bump_mode == "explicit":
            material_id[region] = mat_index[layer.fill]
            pillars, pillar_count = _pillar_mask(model, layer, xc, yc, dim)
            solid = region & pillars[:, :, None]
            material_id[solid] = mat_index[layer.material]
            pec |= solid
            continue
        material_id[region] = mat_index[layer.material]
        if model.library[layer.material].is_conductor:
            pec |= region

    grid = MaterialGrid(
        x=x, y=y, z=z, material_id=material_id,
        materials=tuple(model.library[m] for m in materials), pec=pec,
        pec_edges={c: np.zeros(edge_shape(c, nx, ny, nz, dim), dtype=bool) for c in "xyz"},
        ports=(), dim=dim, pml_cells=pml, layer_bounds=bounds,
        pillar_count=pillar_count, f_pin=model.f_pin, f_max=policy.f_max)
    grid.ports = tuple(_place_ports(model, grid, port_resistance))
    return grid


def _patch_coords(model: PackageModel, axis: str) -> list[float]:
    out = []
    for p in model.ports:
        if p.kind != "patch":
            continue
        if axis == "x":
            out += [p.x, p.x + p.patch_length]
        else:
            out += [p.y - 0.5 * p.patch_width, p.y + 0.5 * p.patch_width]
    return out


def _pillar_mask(model: PackageModel, layer: Layer, xc, yc, dim):
    pitch, radius = layer.pitch, 0.5 * layer.diameter
    n = int(math.floor(model.chip_lateral / pitch + 1e-9))
    centers = pitch * (np.arange(n) + 0.5) + 0.5 * (model.chip_lateral - n * pitch)
    if radius == 0:
        return np.zeros((len(xc), len(yc)), dtype=bool), 0
    dx = np.abs(xc[:, None] - centers[None, :])
    nearest_x = np.min(dx, axis=1)
    if dim == 2:
        mask = nearest_x < radius
        return np.repeat(mask[:, None], len(yc), axis=1), n
    dy = np.min(np.abs(yc[:, None] - centers[None, :]), axis=1)
    mask = nearest_x[:, None] ** 2 + dy[None, :] ** 2 < radius ** 2
    return mask, n * n


def _place_ports(model: PackageModel, grid: MaterialGrid, resistance: float) -> list[PortCell]:
    bounds = grid.layer_bounds
    ground = bounds["bumps"][1]
    k_ground = grid.node_index("z", ground)
    die_top = bounds["silicon"][1]
    ic_lo, ic_hi = bounds["interconnect"]
    cells = []
    dim = grid.dim
    for p in model.ports:
        i = grid.node_index("x", p.x)
        j = grid.node_index("y", p.y) if dim == 3 else 0
        if p.kind == "monopole":
            length = p.monopole_length
            if length is None:
                length = default_monopole_length(model)
            if length <= ic_hi - ic_lo:
                raise GeometryError(
                    f"monopole {p.index}: length {length} does not reach through the interconnect layer")
            if ground + length > die_top * (1 + 1e-12):
                raise GeometryError(
                    f"monopole {p.index}: length {length:.4g} m exceeds the die thickness "
                    f"{model.die_thickness:.4g} m")
            k_tip = grid.node_index("z", ground + length)
            k_tip = max(k_tip, k_ground + 2)
            _mark_wire(grid, i, j, k_ground + 1, k_tip)
            cells.append(PortCell(p.index, "z", (i, j, k_ground), resistance))
        elif p.kind == "point_dipole":
            k_mid = grid.node_index("z", 0.5 * (ic_lo + ic_hi))
            if not ic_lo < grid.z[k_mid] < ic_hi:
                raise GeometryError("interconnect layer has no interior node for the dipole feed")
            cells.append(PortCell(p.index, "x", (i, j, k_mid), resistance))
        else:
            if dim != 3:
                raise GeometryError("patch antennas need a 3-D grid")
            k_top = grid.node_index("z", ic_hi)
            i1 = grid.node_index("x", p.x + p.patch_length)
            j0 = grid.node_index("y", p.y - 0.5 * p.patch_width)
            j1 = grid.node_index("y", p.y + 0.5 * p.patch_width)
            grid.pec_edges["x"][i:i1, j0:j1 + 1, k_top] = True
            grid.pec_edges["y"][i:i1 + 1, j0:j1, k_top] = True
            if k_top - k_ground >= 2:
                _mark_wire(grid, i, j, k_ground + 1, k_top)
            cells.append(PortCell(p.index, "z", (i, j, k_ground), resistance))
    return cells


def _mark_wire(grid: MaterialGrid, i: int, j: int, k0: int, k1: int) -> None:
    """PEC Ez edges along node line (i, j) for z cells k0..k1-1."""
    if grid.dim == 2:
        grid.pec_edges["z"][i, k0:k1] = True
    else:
        grid.pec_edges["z"][i, j, k0:k1] = True
