"""Per-direction rotated-grid transport sweeps and their exact transposes.

For each direction theta the advection+absorption inverse is discretized on a
grid rotated so theta runs along rows: sample the input and the absorption on
the rotated grid (bilinear, zero outside the field bbox), accumulate the
trapezoid optical depth A_c along each row, and evaluate

    u_c = h * sum_{j<=c} exp(A_j - A_c) g_j  -  (h/2) g_c,

the composite trapezoid rule for the attenuated line integral arriving at
column c (the j = c term keeps its half weight through the subtraction; all
effective weights stay nonnegative). Boundary samples and field nodes are
read straight off the rotated solution. Every step is a linear gather /
diagonal scale / cumulative sum, so the adjoint is the exact transpose:
scatter with the same stencils and run the attenuated cumulative sum in
reverse.

Two interchangeable backends implement the kernels: numba (default, the
sandbox-friendly fast path) and pure numpy (fallback, also used to cross-check
the numba path in tests). Select with RTINVERSE_DISABLE_NUMBA=1.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = ["SweepGeometry", "BoundaryCsr", "SweepWorkspace", "numba_enabled"]

_DISABLE = os.environ.get("RTINVERSE_DISABLE_NUMBA", "") not in ("", "0")
if not _DISABLE:
    try:
        from . import _sweep_numba as _nb
    except Exception:  # pragma: no cover - import failure falls back to numpy
        _nb = None
else:
    _nb = None


def numba_enabled() -> bool:
    return _nb is not None


@dataclass(frozen=True)
class SweepGeometry:
    """Field grid, direction set and the shared rotated-grid layout."""

    nx: int
    ny: int
    x0: float
    y0: float
    dx: float
    dy: float
    cx: float
    cy: float
    n_theta: int
    n_p: int
    n_s: int
    p0: float
    s0: float
    dp: float
    h: float

    @classmethod
    def create(cls, bbox, nx: int, ny: int, n_theta: int, ray_step: float) -> "SweepGeometry":
        xmin, xmax, ymin, ymax = bbox
        dx = (xmax - xmin) / (nx - 1)
        dy = (ymax - ymin) / (ny - 1)
        cx = 0.5 * (xmin + xmax)
        cy = 0.5 * (ymin + ymax)
        # The rotated grid must cover the bbox circumcircle for every
        # direction; two extra cells keep all stencils interior.
        half_diag = math.hypot(xmax - xmin, ymax - ymin) / 2.0
        dp = min(dx, dy)
        h = float(ray_step)
        need_p = half_diag + 2.0 * dp
        need_s = half_diag + 2.0 * h
        n_p = 2 * int(math.ceil(need_p / dp)) + 1
        n_s = 2 * int(math.ceil(need_s / h)) + 1
        return cls(nx=nx, ny=ny, x0=xmin, y0=ymin, dx=dx, dy=dy, cx=cx, cy=cy,
                   n_theta=n_theta, n_p=n_p, n_s=n_s,
                   p0=-dp * (n_p - 1) / 2.0, s0=-h * (n_s - 1) / 2.0, dp=dp, h=h)

    def angles(self) -> np.ndarray:
        return np.arange(self.n_theta) * (2.0 * np.pi / self.n_theta)

    def rotated_bytes(self) -> int:
        return 8 * self.n_theta * self.n_p * self.n_s


class BoundaryCsr:
    """Boundary sample reads grouped per direction slice.

    Each sample contributes through its two neighbouring direction slices
    with periodic-linear angle weights; entry k reads the rotated solution of
    direction t at the sample's world position with coefficient cw[k].
    """

    def __init__(self, geom: SweepGeometry, points: np.ndarray, alphas: np.ndarray):
        n = points.shape[0]
        d_theta = 2.0 * np.pi / geom.n_theta
        ga = (np.asarray(alphas) % (2.0 * np.pi)) / d_theta
        t0 = np.floor(ga).astype(np.int64) % geom.n_theta
        fr = ga - np.floor(ga)
        t1 = (t0 + 1) % geom.n_theta
        dirs = np.concatenate([t0, t1])
        cw = np.concatenate([1.0 - fr, fr])
        samp = np.concatenate([np.arange(n), np.arange(n)])
        bx = np.concatenate([points[:, 0], points[:, 0]])
        by = np.concatenate([points[:, 1], points[:, 1]])
        order = np.argsort(dirs, kind="stable")
        self.dir_ptr = np.zeros(geom.n_theta + 1, dtype=np.int64)
        np.add.at(self.dir_ptr, dirs + 1, 1)
        self.dir_ptr = np.cumsum(self.dir_ptr)
        self.samp_idx = samp[order].astype(np.int64)
        self.cw = cw[order]
        self.bx = bx[order]
        self.by = by[order]
        self.n_samples = n

    def assemble(self, contrib: np.ndarray) -> np.ndarray:
        return np.bincount(self.samp_idx, weights=contrib, minlength=self.n_samples)

    def spread(self, values: np.ndarray) -> np.ndarray:
        """Per-contribution values for the adjoint scatter."""
        return values[self.samp_idx] * self.cw


_EMPTY_F = np.zeros(0, dtype=np.float64)
_EMPTY_I = np.zeros(0, dtype=np.int64)


class SweepWorkspace:
    """Reusable transport sweep state for a fixed absorption field.

    Precomputes the rotated attenuation exp(A) for every direction when it
    fits the cache budget; otherwise the kernels re-derive the optical depth
    from the absorption on the fly (same arithmetic, same bits).
    """

    def __init__(self, sigma_values: np.ndarray, bbox, ray_step: float,
                 cache_budget_mb: float = 384.0):
        nx, ny, n_theta = sigma_values.shape
        self.geom = SweepGeometry.create(bbox, nx, ny, n_theta, ray_step)
        self.sigma = np.ascontiguousarray(sigma_values, dtype=np.float64)
        self.ea: np.ndarray | None = None
        if self.geom.rotated_bytes() <= cache_budget_mb * 1e6:
            self.ea = self._build_ea()

    # -- helpers ---------------------------------------------------------

    def _args(self):
        g = self.geom
        ang = g.angles()
        return (g.nx, g.ny, g.x0, g.y0, g.dx, g.dy, g.cx, g.cy,
                np.cos(ang), np.sin(ang), g.n_p, g.n_s, g.p0, g.s0, g.dp, g.h)

    def _build_ea(self) -> np.ndarray:
        g = self.geom
        ea = np.empty((g.n_theta, g.n_p, g.n_s))
        if _nb is not None:
            _nb.build_ea(self.sigma, *self._args(), ea)
        else:
            _np_build_ea(self.sigma, self.geom, ea)
        return ea

    # -- forward / adjoint single Neumann term ---------------------------

    def forward_term(self, a: np.ndarray, bnd: BoundaryCsr | None):
        """One application of the attenuated sweep to a phase-space field.

        Returns the swept field on the grid and, when boundary reads are
        requested, the per-contribution boundary values.
        """
        g = self.geom
        out_field = np.empty((g.nx, g.ny, g.n_theta))
        if bnd is None:
            dir_ptr = np.zeros(g.n_theta + 1, dtype=np.int64)
            samp_idx, cw, bx, by = _EMPTY_I, _EMPTY_F, _EMPTY_F, _EMPTY_F
            contrib = _EMPTY_F
        else:
            dir_ptr = bnd.dir_ptr
            samp_idx, cw, bx, by = bnd.samp_idx, bnd.cw, bnd.bx, bnd.by
            contrib = np.zeros(samp_idx.size)
        a = np.ascontiguousarray(a, dtype=np.float64)
        if _nb is not None:
            if self.ea is not None:
                _nb.forward_term_cached(a, self.ea, *self._args(),
                                        dir_ptr, cw, bx, by, out_field, contrib)
            else:
                _nb.forward_term_stream(a, self.sigma, *self._args(),
                                        dir_ptr, cw, bx, by, out_field, contrib)
        else:
            _np_forward_term(a, self, dir_ptr, cw, bx, by, out_field, contrib)
        if bnd is None:
            return out_field, None
        return out_field, contrib

    def adjoint_term(self, s_vals: np.ndarray | None, v: np.ndarray | None,
                     bnd: BoundaryCsr | None) -> np.ndarray:
        """Exact transpose of forward_term.

        s_vals enters through the transposed boundary reads, v through the
        transposed node gather; either may be None.
        """
        g = self.geom
        out_field = np.zeros((g.nx, g.ny, g.n_theta))
        if s_vals is not None:
            if bnd is None:
                raise ValueError("boundary values need a boundary layout")
            spread = np.ascontiguousarray(bnd.spread(s_vals))
            dir_ptr, bx, by = bnd.dir_ptr, bnd.bx, bnd.by
        else:
            spread = _EMPTY_F
            dir_ptr = np.zeros(g.n_theta + 1, dtype=np.int64)
            bx = by = _EMPTY_F
        have_v = v is not None
        vv = np.ascontiguousarray(v, dtype=np.float64) if have_v else \
            np.zeros((1, 1, g.n_theta))
        if _nb is not None:
            if self.ea is not None:
                _nb.adjoint_term_cached(spread, dir_ptr, bx, by, vv, have_v,
                                        self.ea, *self._args(), out_field)
            else:
                _nb.adjoint_term_stream(spread, dir_ptr, bx, by, vv, have_v,
                                        self.sigma, *self._args(), out_field)
        else:
            _np_adjoint_term(spread, dir_ptr, bx, by, vv, have_v, self, out_field)
        return out_field


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _np_rot_points(geom: SweepGeometry, t_cos: float, t_sin: float):
    p = geom.p0 + geom.dp * np.arange(geom.n_p)
    s = geom.s0 + geom.h * np.arange(geom.n_s)
    pg, sg = np.meshgrid(p, s, indexing="ij")
    wx = geom.cx - t_sin * pg + t_cos * sg
    wy = geom.cy + t_cos * pg + t_sin * sg
    return wx, wy


def _np_gather(values2d: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Bilinear gather at fractional grid coords, zero outside."""
    nx, ny = values2d.shape
    i0 = np.floor(gx).astype(np.int64)
    j0 = np.floor(gy).astype(np.int64)
    fx = gx - i0
    fy = gy - j0
    out = np.zeros(gx.shape)
    for di in (0, 1):
        for dj in (0, 1):
            ii = i0 + di
            jj = j0 + dj
            ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
            w = np.where(di, fx, 1.0 - fx) * np.where(dj, fy, 1.0 - fy)
            out += np.where(ok, w, 0.0) * values2d[np.clip(ii, 0, nx - 1),
                                                   np.clip(jj, 0, ny - 1)]
    return out


def _np_scatter(target2d: np.ndarray, gx: np.ndarray, gy: np.ndarray,
                vals: np.ndarray) -> None:
    """Transpose of _np_gather: bilinear scatter-add, drops outside."""
    nx, ny = target2d.shape
    i0 = np.floor(gx).astype(np.int64).ravel()
    j0 = np.floor(gy).astype(np.int64).ravel()
    fx = (gx - np.floor(gx)).ravel()
    fy = (gy - np.floor(gy)).ravel()
    v = vals.ravel()
    buf = np.zeros(nx * ny)
    for di in (0, 1):
        for dj in (0, 1):
            ii = i0 + di
            jj = j0 + dj
            ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
            w = np.where(di, fx, 1.0 - fx) * np.where(dj, fy, 1.0 - fy)
            w = np.where(ok, w, 0.0) * v
            flat = np.clip(ii, 0, nx - 1) * ny + np.clip(jj, 0, ny - 1)
            buf += np.bincount(flat, weights=w, minlength=nx * ny)
    target2d += buf.reshape(nx, ny)


def _np_depth(sig_rot: np.ndarray, h: float) -> np.ndarray:
    inc = 0.5 * h * (sig_rot[:, :-1] + sig_rot[:, 1:])
    depth = np.zeros_like(sig_rot)
    np.cumsum(inc, axis=1, out=depth[:, 1:])
    return depth


def _np_build_ea(sigma: np.ndarray, geom: SweepGeometry, ea: np.ndarray) -> None:
    ang = geom.angles()
    for t in range(geom.n_theta):
        ct, st = math.cos(ang[t]), math.sin(ang[t])
        wx, wy = _np_rot_points(geom, ct, st)
        gx = (wx - geom.x0) / geom.dx
        gy = (wy - geom.y0) / geom.dy
        sig_rot = _np_gather(sigma[:, :, t], gx, gy)
        ea[t] = np.exp(_np_depth(sig_rot, geom.h))


def _np_forward_term(a: np.ndarray, ws: SweepWorkspace, dir_ptr, cw, bx, by,
                     out_field: np.ndarray, contrib: np.ndarray) -> None:
    geom = ws.geom
    ang = geom.angles()
    # Field nodes in rotated coordinates are shared by every direction after
    # the per-direction rotation below.
    xs = geom.x0 + geom.dx * np.arange(geom.nx)
    ys = geom.y0 + geom.dy * np.arange(geom.ny)
    nmx, nmy = np.meshgrid(xs - geom.cx, ys - geom.cy, indexing="ij")
    for t in range(geom.n_theta):
        ct, st = math.cos(ang[t]), math.sin(ang[t])
        wx, wy = _np_rot_points(geom, ct, st)
        gx = (wx - geom.x0) / geom.dx
        gy = (wy - geom.y0) / geom.dy
        g_rot = _np_gather(a[:, :, t], gx, gy)
        if ws.ea is not None:
            e = ws.ea[t]
        else:
            e = np.exp(_np_depth(_np_gather(ws.sigma[:, :, t], gx, gy), geom.h))
        acc = np.cumsum(e * g_rot, axis=1)
        u_rot = geom.h * acc / e - 0.5 * geom.h * g_rot
        # Gather at field nodes.
        pn = (-st * nmx + ct * nmy - geom.p0) / geom.dp
        sn = (ct * nmx + st * nmy - geom.s0) / geom.h
        out_field[:, :, t] = _np_gather(u_rot, pn, sn)
        # Boundary reads.
        k0, k1 = dir_ptr[t], dir_ptr[t + 1]
        if k1 > k0:
            pb = (-st * (bx[k0:k1] - geom.cx) + ct * (by[k0:k1] - geom.cy) - geom.p0) / geom.dp
            sb = (ct * (bx[k0:k1] - geom.cx) + st * (by[k0:k1] - geom.cy) - geom.s0) / geom.h
            contrib[k0:k1] = cw[k0:k1] * _np_gather(u_rot, pb, sb)


def _np_adjoint_term(spread, dir_ptr, bx, by, v, have_v, ws: SweepWorkspace,
                     out_field: np.ndarray) -> None:
    geom = ws.geom
    ang = geom.angles()
    xs = geom.x0 + geom.dx * np.arange(geom.nx)
    ys = geom.y0 + geom.dy * np.arange(geom.ny)
    nmx, nmy = np.meshgrid(xs - geom.cx, ys - geom.cy, indexing="ij")
    for t in range(geom.n_theta):
        ct, st = math.cos(ang[t]), math.sin(ang[t])
        u_adj = np.zeros((geom.n_p, geom.n_s))
        k0, k1 = dir_ptr[t], dir_ptr[t + 1]
        if k1 > k0:
            pb = (-st * (bx[k0:k1] - geom.cx) + ct * (by[k0:k1] - geom.cy) - geom.p0) / geom.dp
            sb = (ct * (bx[k0:k1] - geom.cx) + st * (by[k0:k1] - geom.cy) - geom.s0) / geom.h
            _np_scatter(u_adj, pb, sb, spread[k0:k1])
        if have_v:
            pn = (-st * nmx + ct * nmy - geom.p0) / geom.dp
            sn = (ct * nmx + st * nmy - geom.s0) / geom.h
            _np_scatter(u_adj, pn, sn, v[:, :, t])
        wx, wy = _np_rot_points(geom, ct, st)
        gx = (wx - geom.x0) / geom.dx
        gy = (wy - geom.y0) / geom.dy
        if ws.ea is not None:
            e = ws.ea[t]
        else:
            e = np.exp(_np_depth(_np_gather(ws.sigma[:, :, t], gx, gy), geom.h))
        racc = np.cumsum((u_adj / e)[:, ::-1], axis=1)[:, ::-1]
        g_adj = geom.h * e * racc - 0.5 * geom.h * u_adj
        _np_scatter(out_field[:, :, t], gx, gy, g_adj)
