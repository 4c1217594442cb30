"""Simple material grids for solver verification."""

from __future__ import annotations

import numpy as np

from ..geometry import MaterialGrid, PortCell, edge_shape
from ..materials import DEFAULT_PIN_FREQUENCY, Material, builtin_library


def uniform_axis(length: float, h: float, origin: float = 0.0) -> np.ndarray:
    n = max(1, int(round(length / h)))
    return origin + np.arange(n + 1) * (length / n)


def box_grid(x: np.ndarray, y: np.ndarray, z: np.ndarray, *, dim: int = 2,
             materials: tuple[Material, ...] | None = None, material_id: np.ndarray | None = None,
             pml_cells: tuple[int, int, int] = (10, 0, 10), ports: tuple[PortCell, ...] = (),
             periodic_y: bool = False, f_pin: float = DEFAULT_PIN_FREQUENCY) -> MaterialGrid:
    """A box of cells filled per ``material_id`` (vacuum by default).

    Conductor materials become PEC cells. The node arrays are used as given,
    so PML cells must already be included in them.
    """
    x, y, z = (np.asarray(a, dtype=float) for a in (x, y, z))
    nx, ny, nz = len(x) - 1, len(y) - 1, len(z) - 1
    if dim == 2 and ny != 1:
        raise ValueError("2-D grids have exactly one cell along y")
    materials = materials or (builtin_library()["vacuum"],)
    if material_id is None:
        material_id = np.zeros((nx, ny, nz), dtype=np.int16)
    material_id = np.asarray(material_id).reshape(nx, ny, nz)
    pec = np.array([m.is_conductor for m in materials])[material_id]
    return MaterialGrid(
        x=x, y=y, z=z, material_id=material_id, materials=tuple(materials), pec=pec,
        pec_edges={c: np.zeros(edge_shape(c, nx, ny, nz, dim), dtype=bool) for c in "xyz"},
        ports=tuple(ports), dim=dim, pml_cells=pml_cells, periodic_y=periodic_y, f_pin=f_pin)


def layered_z(grid: MaterialGrid, material_index: int, z_lo: float, z_hi: float) -> MaterialGrid:
    """Fill cells whose centres lie in [z_lo, z_hi] with a material (in place)."""
    zc = 0.5 * (grid.z[1:] + grid.z[:-1])
    sel = (zc >= z_lo) & (zc <= z_hi)
    grid.material_id[:, :, sel] = material_index
    grid.pec = np.array([m.is_conductor for m in grid.materials])[grid.material_id]
    return grid


def sheet_source(grid: MaterialGrid, component: str, k: int, first_port: int = 1,
                 resistance: float = float("inf")) -> tuple[PortCell, ...]:
    """Port cells on every interior edge of one z plane (a current sheet)."""
    nx, ny, nz = grid.shape
    shape = edge_shape(component, nx, ny, nz, grid.dim)
    cells = []
    n = first_port
    if grid.dim == 2:
        lo = 0 if component == "x" else 1
        hi = shape[0] if component == "x" else shape[0] - 1
        for i in range(lo, hi):
            cells.append(PortCell(n, component, (i, 0, k), resistance))
            n += 1
        return tuple(cells)
    jr = range(ny) if grid.periodic_y else range(1, shape[1] - 1)
    ir = range(shape[0]) if component == "x" else range(1, shape[0] - 1)
    for i in ir:
        for j in jr:
            cells.append(PortCell(n, component, (i, j, k), resistance))
            n += 1
    return tuple(cells)
