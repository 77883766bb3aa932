"""Convex domains, rays, boundary sampling and the Santalo identity.

The solver works on a convex domain Omega (disc or axis-aligned ellipse)
sitting inside a concentric enlarged copy Omega_1. Coefficients live on
Omega_1, sources on the closure of Omega, and measurements on the boundary
of either one. Boundary phase space is sampled on a product grid of boundary
positions and directions, weighted by |nu . theta| times the surface and
angular cell sizes.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "DiscDomain",
    "EllipseDomain",
    "Ray",
    "BoundarySample",
    "BoundaryGrid",
    "exit_times",
    "boundary_grid",
    "santalo_integral",
]

# Tolerance used when deciding whether a ray base point is inside a domain;
# relative to the domain scale.
_INSIDE_TOL = 1e-9


class DomainError(ValueError):
    """Raised when a geometric precondition is violated."""


@dataclass(frozen=True)
class DiscDomain:
    """Disc Omega of given radius inside the concentric disc Omega_1.

    Parameters
    ----------
    center : (float, float)
        Common center of Omega and Omega_1.
    radius : float
        Radius of Omega.
    enlarged_radius : float
        Radius of Omega_1; must exceed `radius`.
    """

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    enlarged_radius: float = 1.3

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DomainError(f"radius must be positive, got {self.radius}")
        if not self.enlarged_radius > self.radius:
            raise DomainError(
                "enlarged_radius must exceed radius, got "
                f"{self.enlarged_radius} <= {self.radius}"
            )

    # Semi-axes let disc and ellipse share every code path below.
    def semi_axes(self, on: str = "omega") -> tuple[float, float]:
        r = self.radius if on == "omega" else self.enlarged_radius
        return (r, r)

    def bbox(self) -> tuple[float, float, float, float]:
        """Bounding box of Omega_1, (xmin, xmax, ymin, ymax)."""
        cx, cy = self.center
        r = self.enlarged_radius
        return (cx - r, cx + r, cy - r, cy + r)

    def diameter(self, on: str = "omega") -> float:
        return 2.0 * (self.radius if on == "omega" else self.enlarged_radius)

    def contains(self, points: np.ndarray, on: str = "omega") -> np.ndarray:
        """Boolean mask for points (n, 2) inside the chosen boundary."""
        a, b = self.semi_axes(on)
        p = np.atleast_2d(points) - np.asarray(self.center)
        return (p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2 <= 1.0


@dataclass(frozen=True)
class EllipseDomain:
    """Axis-aligned ellipse with semi-axes (a, b), enlarged by a fixed factor."""

    center: tuple[float, float] = (0.0, 0.0)
    semi_a: float = 1.0
    semi_b: float = 1.0
    enlarged_factor: float = 1.3

    def __post_init__(self) -> None:
        if not (self.semi_a > 0 and self.semi_b > 0):
            raise DomainError("semi-axes must be positive")
        if not self.enlarged_factor > 1.0:
            raise DomainError("enlarged_factor must exceed 1")

    def semi_axes(self, on: str = "omega") -> tuple[float, float]:
        f = 1.0 if on == "omega" else self.enlarged_factor
        return (f * self.semi_a, f * self.semi_b)

    def bbox(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        a, b = self.semi_axes("omega1")
        return (cx - a, cx + a, cy - b, cy + b)

    def diameter(self, on: str = "omega") -> float:
        a, b = self.semi_axes(on)
        return 2.0 * max(a, b)

    def contains(self, points: np.ndarray, on: str = "omega") -> np.ndarray:
        a, b = self.semi_axes(on)
        p = np.atleast_2d(points) - np.asarray(self.center)
        return (p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2 <= 1.0


@dataclass(frozen=True)
class Ray:
    """Base point and unit direction."""

    origin: tuple[float, float]
    direction: tuple[float, float]

    def __post_init__(self) -> None:
        n = math.hypot(*self.direction)
        if abs(n - 1.0) > 1e-12:
            raise DomainError(f"direction must be unit length, |d| = {n!r}")


def _check_on(on: str) -> None:
    if on not in ("omega", "omega1"):
        raise ValueError(f"boundary selector must be 'omega' or 'omega1', got {on!r}")


def exit_times(domain, ray: Ray, on: str = "omega") -> tuple[float, float]:
    """Signed travel times to the boundary along the ray.

    Returns (tau_minus, tau_plus) with tau_minus <= 0 <= tau_plus and
    origin + tau * direction on the chosen boundary. The origin must lie in
    the closed domain; a tangent ray starting on the boundary returns (0, 0).
    """
    _check_on(on)
    a, b = domain.semi_axes(on)
    ox = ray.origin[0] - domain.center[0]
    oy = ray.origin[1] - domain.center[1]
    dx, dy = ray.direction
    # Scale to the unit disc; the scaled direction is no longer unit length.
    sox, soy = ox / a, oy / b
    sdx, sdy = dx / a, dy / b
    qa = sdx * sdx + sdy * sdy
    qb = sox * sdx + soy * sdy
    qc = sox * sox + soy * soy - 1.0
    if qc > _INSIDE_TOL * 4.0:
        raise DomainError(
            f"ray origin {ray.origin} lies outside the {on} boundary "
            f"(scaled radius excess {qc:.3e})"
        )
    disc = qb * qb - qa * qc
    if disc < 0.0:  # roundoff near tangency
        disc = 0.0
    root = math.sqrt(disc)
    tau_minus = (-qb - root) / qa
    tau_plus = (-qb + root) / qa
    # Base points within roundoff of the boundary can give tiny sign slips.
    return (min(tau_minus, 0.0), max(tau_plus, 0.0))


@dataclass(frozen=True)
class BoundarySample:
    """One outgoing boundary phase-space sample.

    beta is the boundary parameter angle, alpha the direction angle, and
    sigma_weight the quadrature weight |nu . theta| dS dtheta. The weight is
    zero exactly when the direction is tangent to the boundary.
    """

    beta: float
    alpha: float
    sigma_weight: float


class BoundaryGrid:
    """Outgoing samples of the product grid on a measuring boundary.

    Iterable and indexable like the list of BoundarySample it wraps; also
    carries vectorized arrays and the measuring surface for the solvers.
    """

    def __init__(self, domain, n_beta: int, n_alpha: int, on: str,
                 samples: list[BoundarySample]):
        self.domain = domain
        self.n_beta = n_beta
        self.n_alpha = n_alpha
        self.on = on
        self.samples = samples
        self.beta = np.array([s.beta for s in samples])
        self.alpha = np.array([s.alpha for s in samples])
        self.weight = np.array([s.sigma_weight for s in samples])

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def points(self) -> np.ndarray:
        """Boundary positions of the samples, (n, 2)."""
        a, b = self.domain.semi_axes(self.on)
        cx, cy = self.domain.center
        return np.stack(
            [cx + a * np.cos(self.beta), cy + b * np.sin(self.beta)], axis=1
        )

    def directions(self) -> np.ndarray:
        return np.stack([np.cos(self.alpha), np.sin(self.alpha)], axis=1)


def boundary_grid(domain, n_beta: int, n_alpha: int, on: str = "omega") -> BoundaryGrid:
    """Outgoing boundary phase-space grid with Sigma quadrature weights.

    Boundary angles sit at half-offset cell centers (i + 1/2) * 2pi/n_beta,
    direction angles at nodes j * 2pi/n_alpha; the offset keeps exact
    tangency pairs rare. A pair (beta, alpha) is retained when
    nu(beta) . theta(alpha) >= 0 and weighted by
    |nu . theta| * (arc length per beta cell) * (2pi / n_alpha).
    """
    _check_on(on)
    if n_beta < 4 or n_alpha < 4:
        raise ValueError("n_beta and n_alpha must be at least 4")
    a, b = domain.semi_axes(on)
    betas = (np.arange(n_beta) + 0.5) * (2.0 * np.pi / n_beta)
    alphas = np.arange(n_alpha) * (2.0 * np.pi / n_alpha)
    d_alpha = 2.0 * np.pi / n_alpha
    # Outward normal of the ellipse x = c + (a cos b, b sin b) and the local
    # arc length |x'(beta)| * dbeta.
    nx = b * np.cos(betas)
    ny = a * np.sin(betas)
    nnorm = np.hypot(nx, ny)
    arc = nnorm * (2.0 * np.pi / n_beta)
    samples: list[BoundarySample] = []
    for i in range(n_beta):
        nux, nuy = nx[i] / nnorm[i], ny[i] / nnorm[i]
        for j in range(n_alpha):
            dot = nux * np.cos(alphas[j]) + nuy * np.sin(alphas[j])
            if dot >= 0.0:
                samples.append(
                    BoundarySample(float(betas[i]), float(alphas[j]),
                                   float(dot * arc[i] * d_alpha))
                )
    return BoundaryGrid(domain, n_beta, n_alpha, on, samples)


def santalo_integral(domain, field, grid: BoundaryGrid, ray_step: float = 1e-3) -> float:
    """Discrete left side of the Santalo identity.

    Integrates the phase-space field along the inward chord of every outgoing
    boundary sample (midpoint rule with step ray_step, exact chord length) and
    sums with the Sigma weights. Equals the phase-space integral of the field
    over (domain x S^1) up to quadrature error.
    """
    if ray_step <= 0:
        raise ValueError("ray_step must be positive")
    pts = grid.points()
    dirs = grid.directions()
    n = len(grid)
    chord = np.empty(n)
    for s in range(n):
        ray = Ray((pts[s, 0], pts[s, 1]), (dirs[s, 0], dirs[s, 1]))
        tau_minus, _ = exit_times(domain, ray, on=grid.on)
        chord[s] = -tau_minus
    n_steps = max(1, int(math.ceil(chord.max() / ray_step)))
    # Midpoint rule with a per-sample step chord/n_steps, vectorized over
    # samples one quadrature node at a time.
    h_s = chord / n_steps
    total = np.zeros(n)
    for k in range(n_steps):
        t = (k + 0.5) * h_s
        xy = pts - t[:, None] * dirs
        total += field.eval_at(xy, grid.alpha) * h_s
    return float(np.dot(grid.weight, total))
