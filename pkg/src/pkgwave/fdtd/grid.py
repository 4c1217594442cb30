"""Update coefficients on the staggered grid.

Component placement (3-D, node indices i, j, k; cell indices i+1/2 ...)::

    Ex (i+1/2, j, k)    Hx (i, j+1/2, k+1/2)
    Ey (i, j+1/2, k)    Hy (i+1/2, j, k+1/2)
    Ez (i, j, k+1/2)    Hz (i+1/2, j+1/2, k)

The 2-D cross-section is the x-z plane with d/dy = 0; arrays drop the y axis.
Both in-plane polarisations are carried: (Ex, Ez, Hy) and (Ey, Hx, Hz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C0, epsilon_0 as EPS0, mu_0 as MU0

from ..geometry import MaterialGrid, PortCell, edge_shape

ETA0 = math.sqrt(MU0 / EPS0)


@dataclass(frozen=True)
class PMLSpec:
    order: float = 3.0
    reflection: float = 1e-6
    kappa_max: float = 1.0
    alpha_max: float = 2 * math.pi * EPS0 * 5e9

    def __post_init__(self):
        if not 0 < self.reflection < 1:
            raise ValueError("PML target reflection must be in (0, 1)")
        if self.kappa_max < 1:
            raise ValueError("kappa_max must be >= 1")


def max_stable_timestep(x, y=None, z=None, *, dim: int = 3, safety: float = 0.99) -> float:
    """CFL limit: safety / (c * sqrt(sum over axes of 1/dmin^2)).

    Accepts node arrays or scalar cell sizes. In 2-D pass ``x`` and ``z``.
    """
    axes = [x, z] if dim == 2 else [x, y, z]
    total = 0.0
    for a in axes:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        dmin = a[0] if a.size == 1 else np.min(np.diff(a))
        if not dmin > 0:
            raise ValueError("cell sizes must be positive")
        total += 1.0 / dmin ** 2
    return safety / (C0 * math.sqrt(total))


def _dual(h: np.ndarray, periodic: bool = False) -> np.ndarray:
    """Dual lengths at the n+1 nodes of an axis with cell sizes h."""
    d = np.empty(len(h) + 1)
    d[1:-1] = 0.5 * (h[1:] + h[:-1])
    if periodic:
        d[0] = d[-1] = 0.5 * (h[0] + h[-1])
    else:
        d[0] = 0.5 * h[0]
        d[-1] = 0.5 * h[-1]
    return d


def _pml_profile(nodes: np.ndarray, n_pml: int, dt: float, spec: PMLSpec):
    """CPML (b, c, 1/kappa, flag) at nodes (E positions) and centres (H positions)."""
    n = len(nodes) - 1
    centres = 0.5 * (nodes[1:] + nodes[:-1])
    out = []
    for pos in (nodes, centres):
        b = np.ones(len(pos))
        c = np.zeros(len(pos))
        ik = np.ones(len(pos))
        flag = np.zeros(len(pos), dtype=np.uint8)
        if n_pml > 0:
            lo, hi = nodes[n_pml], nodes[n - n_pml]
            width_lo = lo - nodes[0]
            width_hi = nodes[-1] - hi
            rho = np.where(pos < lo, (lo - pos) / width_lo,
                           np.where(pos > hi, (pos - hi) / width_hi, 0.0))
            width = np.where(pos < lo, width_lo, width_hi)
            sigma_max = -(spec.order + 1) * math.log(spec.reflection) / (2 * ETA0 * width)
            sigma = sigma_max * rho ** spec.order
            kappa = 1 + (spec.kappa_max - 1) * rho ** spec.order
            alpha = spec.alpha_max * (1 - rho)
            inside = rho > 0
            b = np.where(inside, np.exp(-(sigma / kappa + alpha) * dt / EPS0), 1.0)
            denom = sigma * kappa + kappa ** 2 * alpha
            c = np.where(inside & (denom > 0), sigma / np.where(denom > 0, denom, 1) * (b - 1), 0.0)
            ik = 1.0 / kappa
            flag = inside.astype(np.uint8)
        out.append((b, c, ik, flag))
    return out


PORT_RESISTIVE, PORT_HARD, PORT_CURRENT = 0, 1, 2


@dataclass
class PortCoefficients:
    component: np.ndarray  # 0, 1, 2 for x, y, z
    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    cs: np.ndarray  # source coefficient applied to V_s (or I_s for current sources)
    dl: np.ndarray  # edge length (V = E * dl)
    conductance: np.ndarray  # 1 / R; 0 for current sources
    mode: np.ndarray  # PORT_RESISTIVE, PORT_HARD or PORT_CURRENT

    @property
    def resistance(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.conductance


@dataclass
class YeeGrid:
    dim: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    dt: float
    ca: dict[str, np.ndarray]
    cb: dict[str, np.ndarray]
    eps: dict[str, np.ndarray]
    pec: dict[str, np.ndarray]
    inv_primal: dict[str, np.ndarray]
    inv_dual: dict[str, np.ndarray]
    pml_e: dict[str, tuple]
    pml_h: dict[str, tuple]
    pml_cells: tuple[int, int, int]
    ports: tuple[PortCell, ...]
    port_coeffs: PortCoefficients
    energy_weight_e: dict[str, np.ndarray]
    energy_weight_h: dict[str, np.ndarray]
    periodic_y: bool = False
    cfl_safety: float = 0.99
    source_grid: MaterialGrid | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.x) - 1, len(self.y) - 1, len(self.z) - 1

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz

    @property
    def depth(self) -> float:
        return float(self.y[-1] - self.y[0])


def _cell_average(values: np.ndarray, weights: tuple, comp: str, dim: int, periodic_y: bool,
                  reduce: str = "mean") -> np.ndarray:
    """Average (or any-reduce) cell values onto the edges of one E component."""
    hx, hy, hz = weights
    if dim == 2:
        v = values[:, 0, :]
        vp = np.pad(v, 1, mode="edge")
        wx = np.pad(hx, 1, mode="edge")
        wz = np.pad(hz, 1, mode="edge")
        nx, nz = v.shape
        # offsets: which neighbouring cells touch the edge along x and z
        offs = {"x": ((1,), (0, 1)), "y": ((0, 1), (0, 1)), "z": ((0, 1), (1,))}[comp]
        lx = nx if comp == "x" else nx + 1
        lz = nz if comp == "z" else nz + 1
        acc = np.zeros((lx, lz))
        wacc = np.zeros((lx, lz))
        anyp = np.zeros((lx, lz), dtype=bool)
        for ox in offs[0]:
            for oz in offs[1]:
                w = (wx[ox:ox + lx] if len(offs[0]) == 2 else np.ones(lx))[:, None] * \
                    (wz[oz:oz + lz] if len(offs[1]) == 2 else np.ones(lz))[None, :]
                cell = vp[ox:ox + lx, oz:oz + lz]
                acc += w * cell
                wacc += w
                anyp |= cell.astype(bool)
        return anyp if reduce == "any" else acc / wacc

    nx, ny, nz = values.shape
    mode_y = "wrap" if periodic_y else "edge"
    vp = np.pad(values, ((1, 1), (1, 1), (1, 1)), mode="edge")
    if periodic_y:
        vp[:, 0, :] = vp[:, -2, :]
        vp[:, -1, :] = vp[:, 1, :]
    wx = np.pad(hx, 1, mode="edge")
    wy = np.pad(hy, 1, mode=mode_y)
    wz = np.pad(hz, 1, mode="edge")
    shape = edge_shape(comp, nx, ny, nz, 3)
    ax_offs = {"x": ((1,), (0, 1), (0, 1)), "y": ((0, 1), (1,), (0, 1)),
               "z": ((0, 1), (0, 1), (1,))}[comp]
    acc = np.zeros(shape)
    wacc = np.zeros(shape)
    anyp = np.zeros(shape, dtype=bool)
    ws = (wx, wy, wz)
    for ox in ax_offs[0]:
        for oy in ax_offs[1]:
            for oz in ax_offs[2]:
                w = np.ones(shape)
                for axis, (o, offs) in enumerate(zip((ox, oy, oz), ax_offs)):
                    if len(offs) == 2:
                        sl = ws[axis][o:o + shape[axis]]
                        w = w * sl.reshape([-1 if a == axis else 1 for a in range(3)])
                cell = vp[ox:ox + shape[0], oy:oy + shape[1], oz:oz + shape[2]]
                acc += w * cell
                wacc += w
                anyp |= cell.astype(bool)
    return anyp if reduce == "any" else acc / wacc


def build_yee_grid(mgrid: MaterialGrid, *, cfl_safety: float = 0.99, pml: PMLSpec | None = None,
                   dt: float | None = None, hard_ports: tuple[int, ...] = ()) -> YeeGrid:
    """Turn a rasterized material grid into solver coefficients."""
    pml = pml or PMLSpec()
    dim = mgrid.dim
    periodic_y = mgrid.periodic_y and dim == 3
    hx, hy, hz = (np.diff(a) for a in (mgrid.x, mgrid.y, mgrid.z))
    if dt is None:
        dt = max_stable_timestep(mgrid.x, mgrid.y, mgrid.z, dim=dim, safety=cfl_safety)
    eps_cell = EPS0 * mgrid.eps_r()
    sigma_cell = mgrid.sigma()
    nx, ny, nz = mgrid.shape

    inv_primal = {"x": 1 / hx, "y": 1 / hy, "z": 1 / hz}
    duals = {"x": _dual(hx), "y": _dual(hy, periodic_y), "z": _dual(hz)}
    inv_dual = {a: 1 / d for a, d in duals.items()}

    ca, cb, eps_e, pec_e, we = {}, {}, {}, {}, {}
    for comp in "xyz":
        eps = _cell_average(eps_cell, (hx, hy, hz), comp, dim, periodic_y)
        sig = _cell_average(sigma_cell, (hx, hy, hz), comp, dim, periodic_y)
        pec = _cell_average(mgrid.pec, (hx, hy, hz), comp, dim, periodic_y, reduce="any")
        pec = pec | mgrid.pec_edges[comp]
        _mark_outer_boundary(pec, comp, dim, periodic_y)
        loss = sig * dt / (2 * eps)
        a = (1 - loss) / (1 + loss)
        b = (dt / eps) / (1 + loss)
        a[pec] = 0.0
        b[pec] = 0.0
        ca[comp], cb[comp], eps_e[comp], pec_e[comp] = a, b, eps, pec
        we[comp] = 0.5 * eps * _edge_volume(comp, hx, hy, hz, duals, dim)

    wh = {comp: 0.5 * MU0 * _face_volume(comp, hx, hy, hz, duals, dim) for comp in "xyz"}

    pml_e, pml_h = {}, {}
    for axis, nodes, n_p in zip("xyz", (mgrid.x, mgrid.y, mgrid.z), mgrid.pml_cells):
        e_prof, h_prof = _pml_profile(nodes, n_p, dt, pml)
        pml_e[axis], pml_h[axis] = e_prof, h_prof

    port_coeffs = _port_coefficients(mgrid.ports, ca, cb, eps_e, dim, hx, hy, hz, duals, dt,
                                     pec_e, hard_ports)
    return YeeGrid(dim=dim, x=mgrid.x, y=mgrid.y, z=mgrid.z, dt=dt, ca=ca, cb=cb, eps=eps_e,
                   pec=pec_e, inv_primal=inv_primal, inv_dual=inv_dual, pml_e=pml_e,
                   pml_h=pml_h, pml_cells=mgrid.pml_cells, ports=mgrid.ports,
                   port_coeffs=port_coeffs, energy_weight_e=we, energy_weight_h=wh,
                   periodic_y=periodic_y, cfl_safety=cfl_safety, source_grid=mgrid)


def _mark_outer_boundary(pec: np.ndarray, comp: str, dim: int, periodic_y: bool) -> None:
    """Tangential E on the outer box faces is held at zero."""
    if dim == 2:
        if comp == "x":
            pec[:, 0] = pec[:, -1] = True
        elif comp == "y":
            pec[0, :] = pec[-1, :] = True
            pec[:, 0] = pec[:, -1] = True
        else:
            pec[0, :] = pec[-1, :] = True
        return
    tangential = {"x": (1, 2), "y": (0, 2), "z": (0, 1)}[comp]
    for axis in tangential:
        if axis == 1 and periodic_y:
            continue
        idx = [slice(None)] * 3
        idx[axis] = 0
        pec[tuple(idx)] = True
        idx[axis] = -1
        pec[tuple(idx)] = True


def _edge_volume(comp, hx, hy, hz, duals, dim):
    if dim == 2:
        depth = hy[0]
        if comp == "x":
            return hx[:, None] * duals["z"][None, :] * depth
        if comp == "y":
            return duals["x"][:, None] * duals["z"][None, :] * depth
        return duals["x"][:, None] * hz[None, :] * depth
    lx = hx if comp == "x" else duals["x"]
    ly = hy if comp == "y" else duals["y"]
    lz = hz if comp == "z" else duals["z"]
    return lx[:, None, None] * ly[None, :, None] * lz[None, None, :]


def _face_volume(comp, hx, hy, hz, duals, dim):
    # H component `comp` sits on a face normal to `comp`: primal in the other
    # two axes, dual along its own axis.
    if dim == 2:
        depth = hy[0]
        if comp == "x":
            return duals["x"][:, None] * hz[None, :] * depth
        if comp == "y":
            return hx[:, None] * hz[None, :] * depth
        return hx[:, None] * duals["z"][None, :] * depth
    lx = duals["x"] if comp == "x" else hx
    ly = duals["y"] if comp == "y" else hy
    lz = duals["z"] if comp == "z" else hz
    return lx[:, None, None] * ly[None, :, None] * lz[None, None, :]


def _port_coefficients(ports, ca, cb, eps_e, dim, hx, hy, hz, duals, dt, pec, hard_ports):
    """Fold lumped ports into the edge coefficients.

    A resistive port of resistance R on an edge of length dl and dual area A
    adds the current (V_s - E dl) / R, treated semi-implicitly; R = inf gives
    an ideal current source whose waveform is the injected current.
    """
    n = len(ports)
    out = PortCoefficients(*(np.zeros(n, dtype=np.int64) for _ in range(4)),
                           np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n, dtype=np.int64))
    for p, port in enumerate(ports):
        comp = port.component
        i, j, k = port.index
        key = (i, k) if dim == 2 else (i, j, k)
        if pec[comp][key]:
            raise ValueError(f"port {port.port} sits on a PEC edge")
        depth = hy[0]
        if comp == "x":
            length = hx[i]
            area = duals["z"][k] * (depth if dim == 2 else duals["y"][j])
        elif comp == "y":
            length = depth if dim == 2 else hy[j]
            area = duals["x"][i] * duals["z"][k]
        else:
            length = hz[k]
            area = duals["x"][i] * (depth if dim == 2 else duals["y"][j])
        eps = eps_e[comp][key]
        a = ca[comp][key]
        loss = (1 - a) / (1 + a)  # sigma dt / (2 eps) recovered from the lossy coefficient
        if port.port in hard_ports:
            out.mode[p] = PORT_HARD
            out.conductance[p] = 1.0 / port.resistance if math.isfinite(port.resistance) else 0.0
        elif math.isinf(port.resistance):
            out.mode[p] = PORT_CURRENT
            out.cs[p] = (dt / (eps * area)) / (1 + loss)
        else:
            beta = dt * length / (2 * port.resistance * eps * area)
            denom = 1 + loss + beta
            ca[comp][key] = (1 - loss - beta) / denom
            cb[comp][key] = (dt / eps) / denom
            out.cs[p] = (dt / (port.resistance * eps * area)) / denom
            out.conductance[p] = 1.0 / port.resistance
        out.component[p] = "xyz".index(comp)
        out.i[p], out.j[p], out.k[p] = i, j, k
        out.dl[p] = length
    return out
