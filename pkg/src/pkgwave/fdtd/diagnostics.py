"""Solver self-checks: PML reflection and regional energy."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.constants import c as C0

from ..geometry import PortCell
from .fixtures import box_grid, uniform_axis
from .grid import PMLSpec, YeeGrid, build_yee_grid
from .solver import FieldState, RunSettings, run_simulation
from .sources import ProbeSpec, SourceSpec


def measure_pml_reflection(pml_cells: int = 10, pml: PMLSpec | None = None, *,
                           cell: float | None = None, f0: float = 60e9) -> float:
    """Peak spurious reflection (dB) of a PML-terminated 2-D box.

    A point current source at the box centre radiates a short pulse. Two
    probes sit two cells in front of the +x absorber, one at normal incidence
    and one at 30 degrees. The same run in a much larger box is the
    reflection-free reference. Each probe is gated to end before echoes from
    any other wall can arrive, so only the +x wall is measured. The result is
    20 log10(max |E - E_ref| / max |E_ref|) over both probes.
    """
    cell = cell or C0 / 73e9 / 15
    source = SourceSpec(port=1, f0=f0, band=(0.2 * f0, 1.8 * f0), edge_level=0.1)
    spread = 3 * source.tau * C0 / cell  # pulse half-length in cells
    half = 130
    wall = half * cell
    probes_xy = []
    for angle in (0.0, 30.0):
        px = wall - 2 * cell
        pz = round(px * math.tan(math.radians(angle)) / cell) * cell
        d_wanted = math.hypot(2 * wall - px, pz)
        others = [(-2 * wall, 0.0), (0.0, 2 * wall), (0.0, -2 * wall), (2 * wall, 2 * wall),
                  (2 * wall, -2 * wall)]
        d_other = min(math.hypot(ix - px, iz - pz) for ix, iz in others)
        if (d_other - d_wanted) / cell < 2 * spread:
            raise RuntimeError("reflection test box too small for the pulse length")
        gate = source.delay + (d_other / cell - spread) * cell / C0
        probes_xy.append((px, pz, gate))
    t_end = max(g for *_, g in probes_xy)
    pad = int(math.ceil((C0 * t_end / cell + 2 - half) / 2)) + 10

    def run(n_extra: int, n_pml: int):
        n = half + n_extra + n_pml
        x = uniform_axis(2 * n * cell, cell, -n * cell)
        grid = box_grid(x, np.array([0.0, cell]), x.copy(), dim=2, pml_cells=(n_pml, 0, n_pml),
                        ports=(PortCell(1, "z", (n, 0, n), math.inf),))
        probes = [ProbeSpec(f"p{m}", component="z", axis="x", location=(0.0, 0.0, pz + 0.5 * cell),
                            span=(px - 0.1 * cell, px + 0.1 * cell), keep_time=True)
                  for m, (px, pz, _) in enumerate(probes_xy)]
        yee = build_yee_grid(grid, pml=pml or PMLSpec())
        settings = RunSettings(max_steps=int(t_end / yee.dt) + 1, energy_decay=1e-15)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return run_simulation(yee, source, probes, settings=settings)

    test = run(0, pml_cells)
    ref = run(pad, pml_cells)
    worst = 0.0
    for m, (_, _, gate) in enumerate(probes_xy):
        rec_t, rec_r = test.lines[f"p{m}"], ref.lines[f"p{m}"]
        keep = rec_t.times <= gate
        a = rec_t.samples[keep, 0]
        b = rec_r.samples[keep, 0]
        worst = max(worst, np.max(np.abs(a - b)) / np.max(np.abs(b)))
    return 20 * math.log10(max(worst, 1e-300))


def _positions(grid: YeeGrid, comp: str, kind: str):
    """Coordinates of field component samples along each axis."""
    nodes = {"x": grid.x, "y": grid.y, "z": grid.z}
    centres = {a: 0.5 * (v[1:] + v[:-1]) for a, v in nodes.items()}
    out = {}
    for a in "xyz":
        along = a == comp
        # E lives at the centre along its own axis; H at nodes along its own axis
        out[a] = centres[a] if along == (kind == "e") else nodes[a]
    return out


def region_energy(state: FieldState, grid: YeeGrid, *, x: tuple[float, float] | None = None,
                  y: tuple[float, float] | None = None,
                  z: tuple[float, float] | None = None) -> float:
    """Instantaneous field energy (J) in an axis-aligned box."""
    limits = {"x": x, "y": y, "z": z}
    total = 0.0
    for kind, weights in (("e", grid.energy_weight_e), ("h", grid.energy_weight_h)):
        for comp in "xyz":
            values = getattr(state, kind + comp)
            pos = _positions(grid, comp, kind)
            axes = "xz" if grid.dim == 2 else "xyz"
            masks = []
            for a in axes:
                lim = limits[a]
                p = pos[a]
                masks.append(np.ones(len(p), bool) if lim is None else (p >= lim[0]) & (p <= lim[1]))
            if grid.dim == 2:
                m = masks[0][:, None] & masks[1][None, :]
            else:
                m = masks[0][:, None, None] & masks[1][None, :, None] & masks[2][None, None, :]
            total += float(np.sum(weights[comp][m] * values[m] ** 2))
    return total
