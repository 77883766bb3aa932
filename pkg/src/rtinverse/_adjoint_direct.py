"""Closed-form adjoint of the attenuated ray transform, evaluated directly.

For a node x inside the measuring surface and each data direction alpha, the
exit point x + tau_plus * theta(alpha) is found from the ellipse quadratic,
the attenuation along the segment is accumulated by the midpoint rule, and
the boundary data is interpolated in the boundary parameter at that exit.
The angular average of attenuation times pulled-back data is the adjoint.

Deliberately shares no code with the sweep-transpose route; the two are
compared in tests.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .fields import PhaseField, ScalarField

_DISABLE = os.environ.get("RTINVERSE_DISABLE_NUMBA", "") not in ("", "0")
_njit = None
if not _DISABLE:
    try:
        from numba import njit as _njit
    except Exception:  # pragma: no cover
        _njit = None


def _dense_sinogram(grid, values: np.ndarray):
    """Scatter retained samples onto the full (beta, alpha) product grid."""
    nb, na = grid.n_beta, grid.n_alpha
    d_beta = 2.0 * math.pi / nb
    d_alpha = 2.0 * math.pi / na
    dense = np.zeros((nb, na))
    valid = np.zeros((nb, na), dtype=np.bool_)
    ib = np.rint(grid.beta / d_beta - 0.5).astype(np.int64) % nb
    ja = np.rint(grid.alpha / d_alpha).astype(np.int64) % na
    dense[ib, ja] = values
    valid[ib, ja] = True
    return dense, valid


def _sig(sigma, wx, wy, x0, y0, dx, dy, nxg, nyg, t0, t1, ft):
    """Absorption at a world point, bilinear in space, linear in angle."""
    gx = (wx - x0) / dx
    gy = (wy - y0) / dy
    if gx <= -1.0 or gx >= nxg or gy <= -1.0 or gy >= nyg:
        return 0.0
    i0 = int(math.floor(gx))
    j0 = int(math.floor(gy))
    fx = gx - i0
    fy = gy - j0
    v = 0.0
    for di in range(2):
        ii = i0 + di
        if 0 <= ii < nxg:
            wxw = fx if di == 1 else 1.0 - fx
            for dj in range(2):
                jj = j0 + dj
                if 0 <= jj < nyg:
                    wyw = fy if dj == 1 else 1.0 - fy
                    v += wxw * wyw * ((1.0 - ft) * sigma[ii, jj, t0]
                                      + ft * sigma[ii, jj, t1])
    return v


def _run(sigma, x0, y0, dx, dy, nxg, nyg, n_theta, cx, cy, a1, b1,
         dense, valid, n_beta, n_alpha, h, out):
    d_alpha = 2.0 * math.pi / n_alpha
    d_beta = 2.0 * math.pi / n_beta
    d_t = 2.0 * math.pi / n_theta
    for i in range(nxg):
        x = x0 + i * dx
        for j in range(nyg):
            y = y0 + j * dy
            X = (x - cx) / a1
            Y = (y - cy) / b1
            if X * X + Y * Y > 1.0:
                continue
            acc = 0.0
            for ja in range(n_alpha):
                alpha = ja * d_alpha
                ct = math.cos(alpha)
                st = math.sin(alpha)
                dxs = ct / a1
                dys = st / b1
                dd = dxs * dxs + dys * dys
                xd = X * dxs + Y * dys
                disc = xd * xd + dd * (1.0 - X * X - Y * Y)
                if disc < 0.0:
                    disc = 0.0
                tau = (-xd + math.sqrt(disc)) / dd
                # angle interpolation weights on the absorption grid
                gt = alpha / d_t
                t0 = int(math.floor(gt)) % n_theta
                t1 = (t0 + 1) % n_theta
                ft = gt - math.floor(gt)
                # midpoint attenuation along [0, tau]; the last partial
                # step keeps its exact length
                n_full = int(math.floor(tau / h))
                depth = 0.0
                for k in range(n_full):
                    s = (k + 0.5) * h
                    depth += h * _sig(sigma, x + s * ct, y + s * st,
                                      x0, y0, dx, dy, nxg, nyg, t0, t1, ft)
                rem = tau - n_full * h
                if rem > 0.0:
                    s = n_full * h + 0.5 * rem
                    depth += rem * _sig(sigma, x + s * ct, y + s * st,
                                        x0, y0, dx, dy, nxg, nyg, t0, t1, ft)
                att = math.exp(-depth)
                # exit point, then boundary-parameter interpolation
                bhat = math.atan2(Y + tau * dys, X + tau * dxs)
                if bhat < 0.0:
                    bhat += 2.0 * math.pi
                gb = bhat / d_beta - 0.5
                b0 = int(math.floor(gb)) % n_beta
                b1i = (b0 + 1) % n_beta
                fb = gb - math.floor(gb)
                ok0 = valid[b0, ja]
                ok1 = valid[b1i, ja]
                if ok0 and ok1:
                    gval = (1.0 - fb) * dense[b0, ja] + fb * dense[b1i, ja]
                elif ok0:
                    gval = dense[b0, ja]
                elif ok1:
                    gval = dense[b1i, ja]
                else:
                    gval = 0.0
                acc += att * gval
            out[i, j] = acc * d_alpha


if _njit is not None:
    _sig = _njit(cache=True, nogil=True, inline="always")(_sig)
    _run = _njit(cache=True, nogil=True)(_run)


def i_sigma_star_direct(sigma: PhaseField, grid, values: np.ndarray,
                        ray_step: float) -> ScalarField:
    nxg, nyg, n_theta = sigma.values.shape
    a1, b1 = grid.domain.semi_axes(grid.on)
    cx, cy = grid.domain.center
    dense, valid = _dense_sinogram(grid, np.asarray(values, dtype=float))
    out = np.zeros((nxg, nyg))
    _run(np.ascontiguousarray(sigma.values), sigma.bbox[0], sigma.bbox[2],
         sigma.dx, sigma.dy, nxg, nyg, n_theta, cx, cy, a1, b1,
         dense, valid, grid.n_beta, grid.n_alpha, float(ray_step), out)
    return ScalarField(out, sigma.bbox)
