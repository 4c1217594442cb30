"""Compiled leapfrog kernels.

Each kernel advances the fields by ``nsteps`` full iterations (H then E) and
applies the lumped ports after every E update. Port modes: 0 resistive
(Thevenin source behind a resistor), 1 hard voltage, 2 ideal current source. Loops are serial so that runs
are bit-for-bit reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _port_value(v_s, e, p, pcs, pdl, pmode):
    if pmode[p] == 1:
        return v_s / pdl[p]
    return e + pcs[p] * v_s


@njit(cache=True, nogil=True)
def _port_current(v_s, vbar, p, pg, pmode):
    if pmode[p] == 2:
        return v_s
    return (v_s - vbar) * pg[p]


@njit(cache=True, nogil=True)
def _apply_ports_2d(ex, ey, ez, eold, pc, pi, pk, pcs, pdl, pg, pmode, vs, rec_v, rec_i, n):
    for p in range(pc.shape[0]):
        v_s = vs[p, n]
        i = pi[p]
        k = pk[p]
        if pc[p] == 0:
            enew = _port_value(v_s, ex[i, k], p, pcs, pdl, pmode)
            ex[i, k] = enew
        elif pc[p] == 1:
            enew = _port_value(v_s, ey[i, k], p, pcs, pdl, pmode)
            ey[i, k] = enew
        else:
            enew = _port_value(v_s, ez[i, k], p, pcs, pdl, pmode)
            ez[i, k] = enew
        vbar = 0.5 * (eold[p] + enew) * pdl[p]
        rec_v[p, n] = vbar
        rec_i[p, n] = _port_current(v_s, vbar, p, pg, pmode)


@njit(cache=True, nogil=True)
def _apply_ports_3d(ex, ey, ez, eold, pc, pi, pj, pk, pcs, pdl, pg, pmode, vs, rec_v, rec_i, n):
    for p in range(pc.shape[0]):
        v_s = vs[p, n]
        i = pi[p]
        j = pj[p]
        k = pk[p]
        if pc[p] == 0:
            enew = _port_value(v_s, ex[i, j, k], p, pcs, pdl, pmode)
            ex[i, j, k] = enew
        elif pc[p] == 1:
            enew = _port_value(v_s, ey[i, j, k], p, pcs, pdl, pmode)
            ey[i, j, k] = enew
        else:
            enew = _port_value(v_s, ez[i, j, k], p, pcs, pdl, pmode)
            ez[i, j, k] = enew
        vbar = 0.5 * (eold[p] + enew) * pdl[p]
        rec_v[p, n] = vbar
        rec_i[p, n] = _port_current(v_s, vbar, p, pg, pmode)


@njit(cache=True, nogil=True)
def step_chunk_2d(F, CA, CB, PSI, L, FL, db, use_hy, use_ey,
                  pc, pi, pj, pk, pcs, pdl, pg, pmode, vs, rec_v, rec_i, n0, nsteps):
    ex, ey, ez, hx, hy, hz = F
    cax, cay, caz = CA
    cbx, cby, cbz = CB
    psi_hyx, psi_hyz, psi_hxz, psi_hzx, psi_exz, psi_eyx, psi_eyz, psi_ezx = PSI
    idx, idz, idxd, idzd, bex, cex, kex, bhx, chx, khx, bez, cez, kez, bhz, chz, khz = L
    fex, fhx, fez, fhz = FL
    nx = hy.shape[0]
    nz = hy.shape[1]
    npt = pc.shape[0]
    eold = np.empty(npt)
    for s in range(nsteps):
        if use_hy:
            for i in range(nx):
                for k in range(nz):
                    dexdz = (ex[i, k + 1] - ex[i, k]) * idz[k]
                    dezdx = (ez[i + 1, k] - ez[i, k]) * idx[i]
                    if fhz[k]:
                        psi_hyz[i, k] = bhz[k] * psi_hyz[i, k] + chz[k] * dexdz
                        dexdz = dexdz * khz[k] + psi_hyz[i, k]
                    if fhx[i]:
                        psi_hyx[i, k] = bhx[i] * psi_hyx[i, k] + chx[i] * dezdx
                        dezdx = dezdx * khx[i] + psi_hyx[i, k]
                    hy[i, k] -= db * (dexdz - dezdx)
        if use_ey:
            for i in range(nx + 1):
                for k in range(nz):
                    d = (ey[i, k + 1] - ey[i, k]) * idz[k]
                    if fhz[k]:
                        psi_hxz[i, k] = bhz[k] * psi_hxz[i, k] + chz[k] * d
                        d = d * khz[k] + psi_hxz[i, k]
                    hx[i, k] += db * d
            for i in range(nx):
                for k in range(nz + 1):
                    d = (ey[i + 1, k] - ey[i, k]) * idx[i]
                    if fhx[i]:
                        psi_hzx[i, k] = bhx[i] * psi_hzx[i, k] + chx[i] * d
                        d = d * khx[i] + psi_hzx[i, k]
                    hz[i, k] -= db * d

        for p in range(npt):
            c = pc[p]
            if c == 0:
                eold[p] = ex[pi[p], pk[p]]
            elif c == 1:
                eold[p] = ey[pi[p], pk[p]]
            else:
                eold[p] = ez[pi[p], pk[p]]

        if use_hy:
            for i in range(nx):
                for k in range(1, nz):
                    d = (hy[i, k] - hy[i, k - 1]) * idzd[k]
                    if fez[k]:
                        psi_exz[i, k] = bez[k] * psi_exz[i, k] + cez[k] * d
                        d = d * kez[k] + psi_exz[i, k]
                    ex[i, k] = cax[i, k] * ex[i, k] - cbx[i, k] * d
            for i in range(1, nx):
                for k in range(nz):
                    d = (hy[i, k] - hy[i - 1, k]) * idxd[i]
                    if fex[i]:
                        psi_ezx[i, k] = bex[i] * psi_ezx[i, k] + cex[i] * d
                        d = d * kex[i] + psi_ezx[i, k]
                    ez[i, k] = caz[i, k] * ez[i, k] + cbz[i, k] * d
        if use_ey:
            for i in range(1, nx):
                for k in range(1, nz):
                    dz_ = (hx[i, k] - hx[i, k - 1]) * idzd[k]
                    dx_ = (hz[i, k] - hz[i - 1, k]) * idxd[i]
                    if fez[k]:
                        psi_eyz[i, k] = bez[k] * psi_eyz[i, k] + cez[k] * dz_
                        dz_ = dz_ * kez[k] + psi_eyz[i, k]
                    if fex[i]:
                        psi_eyx[i, k] = bex[i] * psi_eyx[i, k] + cex[i] * dx_
                        dx_ = dx_ * kex[i] + psi_eyx[i, k]
                    ey[i, k] = cay[i, k] * ey[i, k] + cby[i, k] * (dz_ - dx_)

        _apply_ports_2d(ex, ey, ez, eold, pc, pi, pk, pcs, pdl, pg, pmode, vs, rec_v, rec_i, n0 + s)


@njit(cache=True, nogil=True)
def step_chunk_3d(F, CA, CB, PSI, L, FL, db, periodic_y,
                  pc, pi, pj, pk, pcs, pdl, pg, pmode, vs, rec_v, rec_i, n0, nsteps):
    ex, ey, ez, hx, hy, hz = F
    cax, cay, caz = CA
    cbx, cby, cbz = CB
    (p_hxy, p_hxz, p_hyz, p_hyx, p_hzx, p_hzy,
     p_exy, p_exz, p_eyz, p_eyx, p_ezx, p_ezy) = PSI
    (idx, idy, idz, idxd, idyd, idzd,
     bex, cex, kex, bhx, chx, khx,
     bey, cey, key, bhy, chy, khy,
     bez, cez, kez, bhz, chz, khz) = L
    fex, fhx, fey, fhy, fez, fhz = FL
    nx = hz.shape[0]
    ny = hz.shape[1]
    nz = hx.shape[2]
    npt = pc.shape[0]
    eold = np.empty(npt)
    jlo = 0 if periodic_y else 1
    for s in range(nsteps):
        # H half step
        for i in range(nx + 1):
            for j in range(ny):
                for k in range(nz):
                    a = (ez[i, j + 1, k] - ez[i, j, k]) * idy[j]
                    b = (ey[i, j, k + 1] - ey[i, j, k]) * idz[k]
                    if fhy[j]:
                        p_hxy[i, j, k] = bhy[j] * p_hxy[i, j, k] + chy[j] * a
                        a = a * khy[j] + p_hxy[i, j, k]
                    if fhz[k]:
                        p_hxz[i, j, k] = bhz[k] * p_hxz[i, j, k] + chz[k] * b
                        b = b * khz[k] + p_hxz[i, j, k]
                    hx[i, j, k] -= db * (a - b)
        for i in range(nx):
            for j in range(ny + 1):
                for k in range(nz):
                    a = (ex[i, j, k + 1] - ex[i, j, k]) * idz[k]
                    b = (ez[i + 1, j, k] - ez[i, j, k]) * idx[i]
                    if fhz[k]:
                        p_hyz[i, j, k] = bhz[k] * p_hyz[i, j, k] + chz[k] * a
                        a = a * khz[k] + p_hyz[i, j, k]
                    if fhx[i]:
                        p_hyx[i, j, k] = bhx[i] * p_hyx[i, j, k] + chx[i] * b
                        b = b * khx[i] + p_hyx[i, j, k]
                    hy[i, j, k] -= db * (a - b)
        for i in range(nx):
            for j in range(ny):
                for k in range(nz + 1):
                    a = (ey[i + 1, j, k] - ey[i, j, k]) * idx[i]
                    b = (ex[i, j + 1, k] - ex[i, j, k]) * idy[j]
                    if fhx[i]:
                        p_hzx[i, j, k] = bhx[i] * p_hzx[i, j, k] + chx[i] * a
                        a = a * khx[i] + p_hzx[i, j, k]
                    if fhy[j]:
                        p_hzy[i, j, k] = bhy[j] * p_hzy[i, j, k] + chy[j] * b
                        b = b * khy[j] + p_hzy[i, j, k]
                    hz[i, j, k] -= db * (a - b)

        for p in range(npt):
            c = pc[p]
            if c == 0:
                eold[p] = ex[pi[p], pj[p], pk[p]]
            elif c == 1:
                eold[p] = ey[pi[p], pj[p], pk[p]]
            else:
                eold[p] = ez[pi[p], pj[p], pk[p]]

        # E half step
        for i in range(nx):
            for j in range(jlo, ny):
                jm = j - 1 if j > 0 else ny - 1
                for k in range(1, nz):
                    a = (hz[i, j, k] - hz[i, jm, k]) * idyd[j]
                    b = (hy[i, j, k] - hy[i, j, k - 1]) * idzd[k]
                    if fey[j]:
                        p_exy[i, j, k] = bey[j] * p_exy[i, j, k] + cey[j] * a
                        a = a * key[j] + p_exy[i, j, k]
                    if fez[k]:
                        p_exz[i, j, k] = bez[k] * p_exz[i, j, k] + cez[k] * b
                        b = b * kez[k] + p_exz[i, j, k]
                    ex[i, j, k] = cax[i, j, k] * ex[i, j, k] + cbx[i, j, k] * (a - b)
        for i in range(1, nx):
            for j in range(ny):
                for k in range(1, nz):
                    a = (hx[i, j, k] - hx[i, j, k - 1]) * idzd[k]
                    b = (hz[i, j, k] - hz[i - 1, j, k]) * idxd[i]
                    if fez[k]:
                        p_eyz[i, j, k] = bez[k] * p_eyz[i, j, k] + cez[k] * a
                        a = a * kez[k] + p_eyz[i, j, k]
                    if fex[i]:
                        p_eyx[i, j, k] = bex[i] * p_eyx[i, j, k] + cex[i] * b
                        b = b * kex[i] + p_eyx[i, j, k]
                    ey[i, j, k] = cay[i, j, k] * ey[i, j, k] + cby[i, j, k] * (a - b)
        for i in range(1, nx):
            for j in range(jlo, ny):
                jm = j - 1 if j > 0 else ny - 1
                for k in range(nz):
                    a = (hy[i, j, k] - hy[i - 1, j, k]) * idxd[i]
                    b = (hx[i, j, k] - hx[i, jm, k]) * idyd[j]
                    if fex[i]:
                        p_ezx[i, j, k] = bex[i] * p_ezx[i, j, k] + cex[i] * a
                        a = a * kex[i] + p_ezx[i, j, k]
                    if fey[j]:
                        p_ezy[i, j, k] = bey[j] * p_ezy[i, j, k] + cey[j] * b
                        b = b * key[j] + p_ezy[i, j, k]
                    ez[i, j, k] = caz[i, j, k] * ez[i, j, k] + cbz[i, j, k] * (a - b)

        _apply_ports_3d(ex, ey, ez, eold, pc, pi, pj, pk, pcs, pdl, pg, pmode, vs, rec_v, rec_i,
                        n0 + s)
        if periodic_y:
            for i in range(nx):
                for k in range(nz + 1):
                    ex[i, ny, k] = ex[i, 0, k]
            for i in range(nx + 1):
                for k in range(nz):
                    ez[i, ny, k] = ez[i, 0, k]


@njit(cache=True, nogil=True)
def weighted_dot(w, a, b):
    """sum(w * a * b) with a fixed summation order."""
    fw = w.ravel()
    fa = a.ravel()
    fb = b.ravel()
    total = 0.0
    for n in range(fw.shape[0]):
        total += fw[n] * fa[n] * fb[n]
    return total
