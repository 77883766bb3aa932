"""Numba kernels for the rotated-grid sweeps.

Mirrors the numpy backend in _sweep.py operation for operation; the two are
cross-checked in the test suite. Kernels are race-free under prange because
every write target is private to one direction slice.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

_SIG_OPTS = dict(cache=True, nogil=True)


@njit(inline="always", **_SIG_OPTS)
def _gat3(arr, nx, ny, t, gx, gy):
    """Bilinear gather from direction slice t, zero outside the grid."""
    if gx <= -1.0 or gx >= nx or gy <= -1.0 or gy >= ny:
        return 0.0
    i0 = int(math.floor(gx))
    j0 = int(math.floor(gy))
    fx = gx - i0
    fy = gy - j0
    v = 0.0
    for di in range(2):
        ii = i0 + di
        if 0 <= ii < nx:
            wx = fx if di == 1 else 1.0 - fx
            for dj in range(2):
                jj = j0 + dj
                if 0 <= jj < ny:
                    wy = fy if dj == 1 else 1.0 - fy
                    v += wx * wy * arr[ii, jj, t]
    return v


@njit(inline="always", **_SIG_OPTS)
def _gat2(arr, n0, n1, g0, g1):
    if g0 <= -1.0 or g0 >= n0 or g1 <= -1.0 or g1 >= n1:
        return 0.0
    i0 = int(math.floor(g0))
    j0 = int(math.floor(g1))
    f0 = g0 - i0
    f1 = g1 - j0
    v = 0.0
    for di in range(2):
        ii = i0 + di
        if 0 <= ii < n0:
            w0 = f0 if di == 1 else 1.0 - f0
            for dj in range(2):
                jj = j0 + dj
                if 0 <= jj < n1:
                    w1 = f1 if dj == 1 else 1.0 - f1
                    v += w0 * w1 * arr[ii, jj]
    return v


@njit(inline="always", **_SIG_OPTS)
def _scat2(arr, n0, n1, g0, g1, val):
    if g0 <= -1.0 or g0 >= n0 or g1 <= -1.0 or g1 >= n1:
        return
    i0 = int(math.floor(g0))
    j0 = int(math.floor(g1))
    f0 = g0 - i0
    f1 = g1 - j0
    for di in range(2):
        ii = i0 + di
        if 0 <= ii < n0:
            w0 = f0 if di == 1 else 1.0 - f0
            for dj in range(2):
                jj = j0 + dj
                if 0 <= jj < n1:
                    w1 = f1 if dj == 1 else 1.0 - f1
                    arr[ii, jj] += w0 * w1 * val


@njit(inline="always", **_SIG_OPTS)
def _scat3(arr, nx, ny, t, gx, gy, val):
    if gx <= -1.0 or gx >= nx or gy <= -1.0 or gy >= ny:
        return
    i0 = int(math.floor(gx))
    j0 = int(math.floor(gy))
    fx = gx - i0
    fy = gy - j0
    for di in range(2):
        ii = i0 + di
        if 0 <= ii < nx:
            wx = fx if di == 1 else 1.0 - fx
            for dj in range(2):
                jj = j0 + dj
                if 0 <= jj < ny:
                    wy = fy if dj == 1 else 1.0 - fy
                    arr[ii, jj, t] += wx * wy * val


@njit(parallel=True, **_SIG_OPTS)
def build_ea(sigma, nx, ny, x0, y0, dx, dy, cx, cy, cos_t, sin_t,
             n_p, n_s, p0, s0, dp, h, ea):
    n_theta = cos_t.shape[0]
    for t in prange(n_theta):
        ct = cos_t[t]
        st = sin_t[t]
        for r in range(n_p):
            p = p0 + r * dp
            bxr = cx - st * p
            byr = cy + ct * p
            depth = 0.0
            sig_prev = 0.0
            for c in range(n_s):
                s = s0 + c * h
                gx = (bxr + ct * s - x0) / dx
                gy = (byr + st * s - y0) / dy
                sg = _gat3(sigma, nx, ny, t, gx, gy)
                if c > 0:
                    depth += 0.5 * h * (sig_prev + sg)
                sig_prev = sg
                ea[t, r, c] = math.exp(depth)


@njit(parallel=True, **_SIG_OPTS)
def forward_term_cached(a, ea, nx, ny, x0, y0, dx, dy, cx, cy, cos_t, sin_t,
                        n_p, n_s, p0, s0, dp, h, dir_ptr, cw, bxa, bya,
                        out_field, contrib):
    n_theta = cos_t.shape[0]
    for t in prange(n_theta):
        ct = cos_t[t]
        st = sin_t[t]
        u_rot = np.empty((n_p, n_s))
        for r in range(n_p):
            p = p0 + r * dp
            bxr = cx - st * p
            byr = cy + ct * p
            acc = 0.0
            for c in range(n_s):
                s = s0 + c * h
                gx = (bxr + ct * s - x0) / dx
                gy = (byr + st * s - y0) / dy
                g = _gat3(a, nx, ny, t, gx, gy)
                e = ea[t, r, c]
                acc += e * g
                u_rot[r, c] = h * acc / e - 0.5 * h * g
        for i in range(nx):
            xr = x0 + i * dx - cx
            for j in range(ny):
                yr = y0 + j * dy - cy
                pn = (-st * xr + ct * yr - p0) / dp
                sn = (ct * xr + st * yr - s0) / h
                out_field[i, j, t] = _gat2(u_rot, n_p, n_s, pn, sn)
        for k in range(dir_ptr[t], dir_ptr[t + 1]):
            xr = bxa[k] - cx
            yr = bya[k] - cy
            pb = (-st * xr + ct * yr - p0) / dp
            sb = (ct * xr + st * yr - s0) / h
            contrib[k] = cw[k] * _gat2(u_rot, n_p, n_s, pb, sb)


@njit(parallel=True, **_SIG_OPTS)
def forward_term_stream(a, sigma, nx, ny, x0, y0, dx, dy, cx, cy, cos_t, sin_t,
                        n_p, n_s, p0, s0, dp, h, dir_ptr, cw, bxa, bya,
                        out_field, contrib):
    n_theta = cos_t.shape[0]
    for t in prange(n_theta):
        ct = cos_t[t]
        st = sin_t[t]
        u_rot = np.empty((n_p, n_s))
        for r in range(n_p):
            p = p0 + r * dp
            bxr = cx - st * p
            byr = cy + ct * p
            acc = 0.0
            depth = 0.0
            sig_prev = 0.0
            for c in range(n_s):
                s = s0 + c * h
                gx = (bxr + ct * s - x0) / dx
                gy = (byr + st * s - y0) / dy
                g = _gat3(a, nx, ny, t, gx, gy)
                sg = _gat3(sigma, nx, ny, t, gx, gy)
                if c > 0:
                    depth += 0.5 * h * (sig_prev + sg)
                sig_prev = sg
                e = math.exp(depth)
                acc += e * g
                u_rot[r, c] = h * acc / e - 0.5 * h * g
        for i in range(nx):
            xr = x0 + i * dx - cx
            for j in range(ny):
                yr = y0 + j * dy - cy
                pn = (-st * xr + ct * yr - p0) / dp
                sn = (ct * xr + st * yr - s0) / h
                out_field[i, j, t] = _gat2(u_rot, n_p, n_s, pn, sn)
        for k in range(dir_ptr[t], dir_ptr[t + 1]):
            xr = bxa[k] - cx
            yr = bya[k] - cy
            pb = (-st * xr + ct * yr - p0) / dp
            sb = (ct * xr + st * yr - s0) / h
            contrib[k] = cw[k] * _gat2(u_rot, n_p, n_s, pb, sb)


@njit(parallel=True, **_SIG_OPTS)
def adjoint_term_cached(spread, dir_ptr, bxa, bya, v, have_v, ea,
                        nx, ny, x0, y0, dx, dy, cx, cy, cos_t, sin_t,
                        n_p, n_s, p0, s0, dp, h, out_field):
    n_theta = cos_t.shape[0]
    for t in prange(n_theta):
        ct = cos_t[t]
        st = sin_t[t]
        u_adj = np.zeros((n_p, n_s))
        for k in range(dir_ptr[t], dir_ptr[t + 1]):
            xr = bxa[k] - cx
            yr = bya[k] - cy
            pb = (-st * xr + ct * yr - p0) / dp
            sb = (ct * xr + st * yr - s0) / h
            _scat2(u_adj, n_p, n_s, pb, sb, spread[k])
        if have_v:
            for i in range(nx):
                xr = x0 + i * dx - cx
                for j in range(ny):
                    yr = y0 + j * dy - cy
                    pn = (-st * xr + ct * yr - p0) / dp
                    sn = (ct * xr + st * yr - s0) / h
                    _scat2(u_adj, n_p, n_s, pn, sn, v[i, j, t])
        for r in range(n_p):
            p = p0 + r * dp
            bxr = cx - st * p
            byr = cy + ct * p
            racc = 0.0
            for c in range(n_s - 1, -1, -1):
                e = ea[t, r, c]
                ub = u_adj[r, c]
                racc += ub / e
                gadj = h * e * racc - 0.5 * h * ub
                if gadj != 0.0:
                    s = s0 + c * h
                    gx = (bxr + ct * s - x0) / dx
                    gy = (byr + st * s - y0) / dy
                    _scat3(out_field, nx, ny, t, gx, gy, gadj)


@njit(parallel=True, **_SIG_OPTS)
def adjoint_term_stream(spread, dir_ptr, bxa, bya, v, have_v, sigma,
                        nx, ny, x0, y0, dx, dy, cx, cy, cos_t, sin_t,
                        n_p, n_s, p0, s0, dp, h, out_field):
    n_theta = cos_t.shape[0]
    for t in prange(n_theta):
        ct = cos_t[t]
        st = sin_t[t]
        u_adj = np.zeros((n_p, n_s))
        e_row = np.empty(n_s)
        for k in range(dir_ptr[t], dir_ptr[t + 1]):
            xr = bxa[k] - cx
            yr = bya[k] - cy
            pb = (-st * xr + ct * yr - p0) / dp
            sb = (ct * xr + st * yr - s0) / h
            _scat2(u_adj, n_p, n_s, pb, sb, spread[k])
        if have_v:
            for i in range(nx):
                xr = x0 + i * dx - cx
                for j in range(ny):
                    yr = y0 + j * dy - cy
                    pn = (-st * xr + ct * yr - p0) / dp
                    sn = (ct * xr + st * yr - s0) / h
                    _scat2(u_adj, n_p, n_s, pn, sn, v[i, j, t])
        for r in range(n_p):
            p = p0 + r * dp
            bxr = cx - st * p
            byr = cy + ct * p
            depth = 0.0
            sig_prev = 0.0
            for c in range(n_s):
                s = s0 + c * h
                gx = (bxr + ct * s - x0) / dx
                gy = (byr + st * s - y0) / dy
                sg = _gat3(sigma, nx, ny, t, gx, gy)
                if c > 0:
                    depth += 0.5 * h * (sig_prev + sg)
                sig_prev = sg
                e_row[c] = math.exp(depth)
            racc = 0.0
            for c in range(n_s - 1, -1, -1):
                e = e_row[c]
                ub = u_adj[r, c]
                racc += ub / e
                gadj = h * e * racc - 0.5 * h * ub
                if gadj != 0.0:
                    s = s0 + c * h
                    gx = (bxr + ct * s - x0) / dx
                    gy = (byr + st * s - y0) / dy
                    _scat3(out_field, nx, ny, t, gx, gy, gadj)
