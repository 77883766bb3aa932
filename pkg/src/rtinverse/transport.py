"""Forward transport solves on phase space.

The unscattered solve inverts advection plus absorption along characteristics
with zero inflow; scattering is folded in by Neumann iteration,

    u_0 = Sweep[f],   u_{m+1} = u_m + Sweep[K u-term_m],

which converges while the scattering strength keeps the iteration a
contraction. The per-term relative magnitudes are reported so callers can
monitor contraction, and a persistent rise raises NonContractiveError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._sweep import SweepWorkspace
from .fields import PhaseField, ScalarField, ScatterKernel

__all__ = [
    "TransportConfig",
    "NonContractiveError",
    "ForwardSolution",
    "attenuation",
    "apply_T1_inv",
    "apply_K",
    "solve_forward",
]


@dataclass(frozen=True)
class TransportConfig:
    """Numerical knobs for the transport solver."""

    ray_step: float = 1.0 / 256.0
    neumann_tol: float = 1e-8
    neumann_max_iter: int = 200
    lambda_scale: float = 1.0
    cache_budget_mb: float = 384.0

    def __post_init__(self):
        if not (self.ray_step > 0.0 and math.isfinite(self.ray_step)):
            raise ValueError("ray_step must be positive and finite")
        if not (self.neumann_tol > 0.0):
            raise ValueError("neumann_tol must be positive")
        if self.neumann_max_iter < 1:
            raise ValueError("neumann_max_iter must be at least 1")
        if not (self.lambda_scale >= 0.0 and math.isfinite(self.lambda_scale)):
            raise ValueError("lambda_scale must be nonnegative and finite")
        if self.cache_budget_mb < 0.0:
            raise ValueError("cache_budget_mb must be nonnegative")


class NonContractiveError(RuntimeError):
    """Neumann iteration failed to contract.

    Carries the relative term magnitudes observed so far in
    ``residual_history``.
    """

    def __init__(self, message: str, residual_history):
        super().__init__(message)
        self.residual_history = list(residual_history)


@dataclass
class ForwardSolution:
    u: PhaseField
    iterations: int
    residual_history: list = field(default_factory=list)


def _check_same_grid(sigma: PhaseField, other, what: str) -> None:
    if other.values.shape[:2] != sigma.values.shape[:2]:
        raise ValueError(f"{what} grid {other.values.shape[:2]} does not match "
                         f"absorption grid {sigma.values.shape[:2]}")
    if not np.allclose(other.bbox, sigma.bbox, rtol=0.0, atol=1e-12):
        raise ValueError(f"{what} bbox {other.bbox} does not match absorption "
                         f"bbox {sigma.bbox}")


def attenuation(sigma: PhaseField, points: np.ndarray, angles, ray_step: float | None = None) -> np.ndarray:
    """exp(-integral of sigma from each point forward along its direction).

    Marches to the bbox edge with the midpoint rule; the step divides the
    traversed length exactly. Mostly a reference implementation for checks.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ang = np.broadcast_to(np.asarray(angles, dtype=float), (pts.shape[0],))
    xmin, xmax, ymin, ymax = sigma.bbox
    if ray_step is None:
        ray_step = 0.5 * min(sigma.dx, sigma.dy)
    out = np.empty(pts.shape[0])
    for i in range(pts.shape[0]):
        x, y = pts[i]
        ct, st = math.cos(ang[i]), math.sin(ang[i])
        t_exit = math.inf
        if ct > 0:
            t_exit = min(t_exit, (xmax - x) / ct)
        elif ct < 0:
            t_exit = min(t_exit, (xmin - x) / ct)
        if st > 0:
            t_exit = min(t_exit, (ymax - y) / st)
        elif st < 0:
            t_exit = min(t_exit, (ymin - y) / st)
        if not math.isfinite(t_exit) or t_exit <= 0.0:
            out[i] = 1.0
            continue
        n = max(1, int(math.ceil(t_exit / ray_step)))
        step = t_exit / n
        s_mid = (np.arange(n) + 0.5) * step
        xy = np.stack([x + s_mid * ct, y + s_mid * st], axis=1)
        depth = float(np.sum(sigma.eval_at(xy, ang[i]))) * step
        out[i] = math.exp(-depth)
    return out


def apply_T1_inv(sigma: PhaseField, g: PhaseField, config: TransportConfig = TransportConfig()) -> PhaseField:
    """Solve advection + absorption with source g and zero inflow."""
    _check_same_grid(sigma, g, "source")
    if g.values.shape[2] != sigma.values.shape[2]:
        raise ValueError("source and absorption direction counts differ")
    ws = SweepWorkspace(sigma.values, sigma.bbox, config.ray_step,
                        config.cache_budget_mb)
    out, _ = ws.forward_term(g.values, None)
    return PhaseField(out, sigma.bbox)


class _KernelTables:
    """Scattering kernel folded into small matrices for repeated applies.

    Spatially uniform modes collapse to a pair of (n_theta x n_modes)
    matrices applied by matmul; spatially varying modes keep their full
    kappa arrays and are applied per mode.
    """

    def __init__(self, kernel: ScatterKernel, xs, ys, angles, lambda_scale: float):
        n_theta = angles.shape[0]
        d_theta = 2.0 * np.pi / n_theta
        scale = lambda_scale * d_theta
        u_kv, u_tv = [], []
        self.general = []
        for mode in kernel.modes:
            tv = mode.theta_values(angles)
            if mode.uniform_x:
                u_kv.append(kernel.kappa_at(mode, angles) * scale)
                u_tv.append(tv)
            else:
                full = np.empty((xs.size, ys.size, n_theta))
                nodes = np.stack(np.meshgrid(xs, ys, indexing="ij"),
                                 axis=-1).reshape(-1, 2)
                for t in range(n_theta):
                    full[:, :, t] = mode.kappa.eval_at(nodes, angles[t]).reshape(
                        xs.size, ys.size)
                self.general.append((tv, full * scale))
        if u_kv:
            self.kmat = np.column_stack(u_kv)      # (n_theta', J)
            self.tmat = np.vstack(u_tv)            # (J, n_theta)
        else:
            self.kmat = None
            self.tmat = None

    def apply(self, u: np.ndarray) -> np.ndarray:
        nx, ny, nt = u.shape
        out = np.zeros_like(u)
        if self.kmat is not None:
            flat = u.reshape(nx * ny, nt)
            out += (flat @ self.kmat @ self.tmat).reshape(nx, ny, nt)
        for tv, full in self.general:
            w = np.einsum("xyt,xyt->xy", full, u)
            out += w[:, :, None] * tv[None, None, :]
        return out

    def apply_transpose(self, v: np.ndarray) -> np.ndarray:
        nx, ny, nt = v.shape
        out = np.zeros_like(v)
        if self.kmat is not None:
            flat = v.reshape(nx * ny, nt)
            out += (flat @ self.tmat.T @ self.kmat.T).reshape(nx, ny, nt)
        for tv, full in self.general:
            w = v @ tv
            out += full * w[:, :, None]
        return out


def apply_K(kernel: ScatterKernel, u: PhaseField, lambda_scale: float = 1.0) -> PhaseField:
    """Angular scattering integral against the mode-expanded kernel."""
    tables = _KernelTables(kernel, u.xs, u.ys, u.theta(), lambda_scale)
    return u.with_values(tables.apply(u.values))


def _l2(values: np.ndarray, cell: float) -> float:
    return math.sqrt(float(np.sum(values * values)) * cell)


def solve_forward(sigma: PhaseField, kernel: ScatterKernel | None, f: ScalarField,
                  config: TransportConfig = TransportConfig()) -> ForwardSolution:
    """Neumann-series transport solve for an isotropic source.

    Returns the phase-space solution, the number of series terms computed,
    and the history of relative term magnitudes. Raises NonContractiveError
    when the terms stop shrinking (five consecutive non-decreases) or the
    term budget runs out.
    """
    _check_same_grid(sigma, f, "source")
    nx, ny, n_theta = sigma.values.shape
    ws = SweepWorkspace(sigma.values, sigma.bbox, config.ray_step,
                        config.cache_budget_mb)
    src = np.ascontiguousarray(
        np.broadcast_to(f.values[:, :, None], (nx, ny, n_theta)))
    term, _ = ws.forward_term(src, None)
    u = term.copy()
    cell = f.dx * f.dy * (2.0 * np.pi / n_theta)
    norm0 = _l2(term, cell)
    history: list = []
    iterations = 1
    if kernel is None or norm0 == 0.0:
        history.append(0.0)
        return ForwardSolution(PhaseField(u, sigma.bbox), iterations, history)
    tables = _KernelTables(kernel, f.xs, f.ys,
                           np.arange(n_theta) * (2.0 * np.pi / n_theta),
                           config.lambda_scale)
    rises = 0
    while True:
        term, _ = ws.forward_term(tables.apply(term), None)
        iterations += 1
        r = _l2(term, cell) / norm0
        history.append(r)
        u += term
        if r <= config.neumann_tol:
            return ForwardSolution(PhaseField(u, sigma.bbox), iterations, history)
        if len(history) >= 2 and history[-1] >= history[-2]:
            rises += 1
            if rises >= 5:
                raise NonContractiveError(
                    "scattering iteration is not contracting "
                    f"(term ratio >= 1 for {rises} consecutive terms)", history)
        else:
            rises = 0
        if iterations >= config.neumann_max_iter:
            raise NonContractiveError(
                f"scattering iteration exceeded {config.neumann_max_iter} terms "
                f"(last relative term {history[-1]:.3e})", history)
