"""Grid-sampled scalar and phase-space fields, phantoms and scattering kernels.

Fields are sampled on uniform tensor grids over the bounding box of the
enlarged domain, node-inclusive at the box edges, with bilinear interpolation
between nodes and zero outside the box. Axis 0 is x, axis 1 is y; phase
fields carry a trailing direction axis with angles t * 2pi/n_theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainError

__all__ = [
    "ScalarField",
    "PhaseField",
    "KernelMode",
    "ScatterKernel",
    "make_phantom",
    "make_sigma",
    "make_hg_kernel",
    "eval_kernel",
    "random_bump_field",
]


def _check_bbox(bbox) -> tuple[float, float, float, float]:
    xmin, xmax, ymin, ymax = (float(v) for v in bbox)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"degenerate bbox {bbox}")
    return (xmin, xmax, ymin, ymax)


def _bilinear(values: np.ndarray, bbox, points: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of grid values at points (n, 2), zero outside."""
    xmin, xmax, ymin, ymax = bbox
    nx, ny = values.shape[:2]
    dx = (xmax - xmin) / (nx - 1)
    dy = (ymax - ymin) / (ny - 1)
    gx = (points[:, 0] - xmin) / dx
    gy = (points[:, 1] - ymin) / dy
    i0 = np.floor(gx).astype(np.int64)
    j0 = np.floor(gy).astype(np.int64)
    fx = gx - i0
    fy = gy - j0
    out_shape = (points.shape[0],) + values.shape[2:]
    out = np.zeros(out_shape)
    for di in (0, 1):
        for dj in (0, 1):
            ii = i0 + di
            jj = j0 + dj
            ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
            w = np.where(di, fx, 1.0 - fx) * np.where(dj, fy, 1.0 - fy)
            w = np.where(ok, w, 0.0)
            iic = np.clip(ii, 0, nx - 1)
            jjc = np.clip(jj, 0, ny - 1)
            vals = values[iic, jjc]
            out += (w.reshape((-1,) + (1,) * (vals.ndim - 1))) * vals
    return out


@dataclass
class ScalarField:
    """Scalar samples f(x_i, y_j) over a bbox, bilinear between nodes."""

    values: np.ndarray
    bbox: tuple[float, float, float, float]
    interpolation: str = field(default="bilinear", repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"scalar field values must be 2D, got {self.values.shape}")
        if self.values.shape[0] < 2 or self.values.shape[1] < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        self.bbox = _check_bbox(self.bbox)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return (self.bbox[1] - self.bbox[0]) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.bbox[3] - self.bbox[2]) / (self.ny - 1)

    def xs(self) -> np.ndarray:
        return np.linspace(self.bbox[0], self.bbox[1], self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.bbox[2], self.bbox[3], self.ny)

    def nodes(self) -> np.ndarray:
        """All grid nodes as an (nx*ny, 2) array, x-major."""
        gx, gy = np.meshgrid(self.xs(), self.ys(), indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def eval_at(self, points: np.ndarray, angles: np.ndarray | None = None) -> np.ndarray:
        return _bilinear(self.values, self.bbox, np.atleast_2d(points))

    def cell_area(self) -> float:
        return self.dx * self.dy

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area())

    def norm_l2(self) -> float:
        return float(math.sqrt((self.values ** 2).sum() * self.cell_area()))

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(values, self.bbox)


@dataclass
class PhaseField:
    """Samples u(x_i, y_j, theta_t) with theta_t = t * 2pi/n_theta."""

    values: np.ndarray
    bbox: tuple[float, float, float, float]
    interpolation: str = field(default="bilinear", repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError(f"phase field values must be 3D, got {self.values.shape}")
        n_theta = self.values.shape[2]
        if n_theta < 4 or n_theta % 2 != 0:
            raise ValueError(f"n_theta must be even and >= 4, got {n_theta}")
        self.bbox = _check_bbox(self.bbox)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def n_theta(self) -> int:
        return self.values.shape[2]

    @property
    def dx(self) -> float:
        return (self.bbox[1] - self.bbox[0]) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.bbox[3] - self.bbox[2]) / (self.ny - 1)

    def xs(self) -> np.ndarray:
        return np.linspace(self.bbox[0], self.bbox[1], self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.bbox[2], self.bbox[3], self.ny)

    def theta(self) -> np.ndarray:
        return np.arange(self.n_theta) * (2.0 * np.pi / self.n_theta)

    def eval_at(self, points: np.ndarray, angles: np.ndarray) -> np.ndarray:
        """Bilinear in space, periodic linear in the direction angle."""
        points = np.atleast_2d(points)
        planes = _bilinear(self.values, self.bbox, points)  # (n, n_theta)
        a = np.asarray(angles, dtype=np.float64) % (2.0 * np.pi)
        ga = a / (2.0 * np.pi / self.n_theta)
        t0 = np.floor(ga).astype(np.int64) % self.n_theta
        ft = ga - np.floor(ga)
        t1 = (t0 + 1) % self.n_theta
        idx = np.arange(points.shape[0])
        return (1.0 - ft) * planes[idx, t0] + ft * planes[idx, t1]

    def norm_l2(self) -> float:
        w = self.dx * self.dy * (2.0 * np.pi / self.n_theta)
        return float(math.sqrt((self.values ** 2).sum() * w))

    def with_values(self, values: np.ndarray) -> "PhaseField":
        return PhaseField(values, self.bbox)


def _grid_nodes(domain, nx: int, ny: int):
    bbox = domain.bbox()
    xs = np.linspace(bbox[0], bbox[1], nx)
    ys = np.linspace(bbox[2], bbox[3], ny)
    return bbox, xs, ys


def _indicator_supersampled(xs, ys, center, r, subdiv: int = 5) -> np.ndarray:
    """Cell-averaged disc indicator; transition band centered on the circle."""
    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    off = (np.arange(subdiv) + 0.5) / subdiv - 0.5
    out = np.zeros((xs.size, ys.size))
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    for ox in off:
        for oy in off:
            d2 = (gx + ox * dx - center[0]) ** 2 + (gy + oy * dy - center[1]) ** 2
            out += d2 <= r * r
    return out / (subdiv * subdiv)


def make_phantom(domain, nx: int, kind: str, params: dict, ny: int | None = None) -> ScalarField:
    """Source phantom supported in the closure of Omega.

    Kinds: "gaussian" (center, width, amp; truncated at the Omega boundary),
    "disc_indicator" (center, r; must fit inside Omega; antialiased),
    "multi_bump" (bumps: list of gaussian parameter dicts).
    """
    ny = nx if ny is None else ny
    bbox, xs, ys = _grid_nodes(domain, nx, ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    cx, cy = domain.center

    def gaussian(p: dict) -> np.ndarray:
        center = tuple(p["center"])
        width = float(p["width"])
        amp = float(p.get("amp", 1.0))
        if width <= 0:
            raise ValueError("gaussian width must be positive")
        if not domain.contains(np.array([center]))[0]:
            raise DomainError(f"gaussian center {center} escapes the domain")
        d2 = (gx - center[0]) ** 2 + (gy - center[1]) ** 2
        return amp * np.exp(-d2 / (2.0 * width * width))

    if kind == "gaussian":
        vals = gaussian(params)
    elif kind == "multi_bump":
        bumps = params["bumps"]
        if not bumps:
            raise ValueError("multi_bump needs at least one bump")
        vals = np.zeros_like(gx)
        for p in bumps:
            vals += gaussian(p)
    elif kind == "disc_indicator":
        center = tuple(params["center"])
        r = float(params["r"])
        if r <= 0:
            raise ValueError("disc_indicator radius must be positive")
        a, b = domain.semi_axes("omega")
        # Strict fit: the support disc must not cross the Omega boundary.
        ex = math.hypot((center[0] - cx) / a, (center[1] - cy) / b)
        if ex + r / min(a, b) > 1.0 + 1e-12:
            raise DomainError("disc_indicator support escapes the domain")
        vals = params.get("amp", 1.0) * _indicator_supersampled(xs, ys, center, r)
    else:
        raise ValueError(f"unknown phantom kind {kind!r}")

    # Sources are supported in the closure of Omega by contract.
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = domain.contains(pts, on="omega").reshape(gx.shape)
    return ScalarField(vals * inside, bbox)


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C^2 quintic ramp, 0 at t<=0 and 1 at t>=1."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def make_sigma(domain, nx: int, n_theta: int, kind: str = "constant",
               params: dict | None = None, extension: str = "smooth",
               ny: int | None = None) -> PhaseField:
    """Absorption coefficient on Omega_1, stored as a phase field.

    The coefficient is prescribed on Omega and extended to Omega_1 either by
    the fixed C^2 radial cutoff (extension="smooth", the default used by the
    solver) or cut off sharply at the Omega boundary (extension="sharp",
    cell-averaged; useful when an exactly known optical depth is wanted).
    Values vanish on nodes outside Omega_1 in both cases.
    """
    params = params or {}
    ny = nx if ny is None else ny
    bbox, xs, ys = _grid_nodes(domain, nx, ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    if kind == "constant":
        base = np.full_like(gx, float(params.get("value", 0.5)))
    elif kind == "gaussian":
        center = tuple(params.get("center", domain.center))
        width = float(params.get("width", 0.4))
        amp = float(params.get("amp", 0.5))
        d2 = (gx - center[0]) ** 2 + (gy - center[1]) ** 2
        base = amp * np.exp(-d2 / (2.0 * width * width))
    elif kind == "zero":
        base = np.zeros_like(gx)
    else:
        raise ValueError(f"unknown sigma kind {kind!r}")
    if np.any(base < 0):
        raise ValueError("absorption must be nonnegative")

    a, b = domain.semi_axes("omega")
    a1, b1 = domain.semi_axes("omega1")
    cx, cy = domain.center
    # Elliptical radius: 1 on the Omega boundary, ratio a1/a on Omega_1's.
    rho = np.sqrt(((gx - cx) / a) ** 2 + ((gy - cy) / b) ** 2)
    rho1 = a1 / a
    if extension == "smooth":
        cutoff = _smoothstep((rho1 - rho) / (rho1 - 1.0))
        cutoff[rho <= 1.0] = 1.0
        vals = base * cutoff
    elif extension == "sharp":
        sub = 5
        off = (np.arange(sub) + 0.5) / sub - 0.5
        dx = xs[1] - xs[0]
        dy = ys[1] - ys[0]
        frac = np.zeros_like(gx)
        for ox in off:
            for oy in off:
                r2 = (((gx + ox * dx) - cx) / a) ** 2 + (((gy + oy * dy) - cy) / b) ** 2
                frac += r2 <= 1.0
        vals = base * frac / (sub * sub)
    else:
        raise ValueError(f"unknown extension {extension!r}")
    return PhaseField(np.repeat(vals[:, :, None], n_theta, axis=2), bbox)


@dataclass(frozen=True)
class KernelMode:
    """One term Theta_j(theta) kappa_j(x, theta') of the mode decomposition.

    theta_kind is "const", "cos" or "sin"; m is the Fourier index of
    Theta_j on the direction circle. kappa holds the paired factor; when
    uniform_x is set it does not vary with x and only its direction profile
    is used.
    """

    theta_kind: str
    m: int
    kappa: PhaseField
    uniform_x: bool = False

    def theta_values(self, angles: np.ndarray) -> np.ndarray:
        if self.theta_kind == "const":
            return np.ones_like(angles)
        if self.theta_kind == "cos":
            return np.cos(self.m * angles)
        if self.theta_kind == "sin":
            return np.sin(self.m * angles)
        raise ValueError(f"unknown theta_kind {self.theta_kind!r}")


@dataclass(frozen=True)
class ScatterKernel:
    """Scattering kernel as a finite sum of separated direction modes."""

    modes: tuple[KernelMode, ...]

    def __post_init__(self) -> None:
        if len(self.modes) == 0:
            raise ValueError("kernel needs at least one mode")

    def kappa_at(self, mode: KernelMode, angles: np.ndarray) -> np.ndarray:
        """kappa_j direction profile at given angles (uniform-in-x modes)."""
        n_t = mode.kappa.n_theta
        a = np.asarray(angles) % (2.0 * np.pi)
        ga = a / (2.0 * np.pi / n_t)
        t0 = np.floor(ga).astype(np.int64) % n_t
        ft = ga - np.floor(ga)
        t1 = (t0 + 1) % n_t
        prof = mode.kappa.values[0, 0]
        return (1.0 - ft) * prof[t0] + ft * prof[t1]


def make_hg_kernel(g: float, albedo_scale: float, n_modes: int,
                   n_theta: int = 256,
                   bbox: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
                   ) -> ScatterKernel:
    """2D Henyey-Greenstein kernel truncated to |m| <= n_modes.

    k(theta . theta') = albedo_scale/(2pi) * [1 + 2 sum_m g^m cos(m (phi - phi'))],
    the Poisson-kernel expansion of (1 - g^2)/(1 + g^2 - 2 g cos psi).
    albedo_scale equals the total scattering mass integral of k over theta'.
    The kappa profiles are sampled at n_theta angles; keep the solver's
    direction count a divisor of n_theta so mode products stay exact.
    """
    if not (0.0 <= g < 1.0):
        raise ValueError(f"anisotropy must lie in [0, 1), got {g}")
    if albedo_scale < 0:
        raise ValueError("albedo_scale must be nonnegative")
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    angles = np.arange(n_theta) * (2.0 * np.pi / n_theta)

    def uniform_phase(profile: np.ndarray) -> PhaseField:
        vals = np.broadcast_to(profile, (2, 2, n_theta)).copy()
        return PhaseField(vals, bbox)

    modes = [KernelMode("const", 0,
                        uniform_phase(np.full(n_theta, albedo_scale / (2.0 * np.pi))),
                        uniform_x=True)]
    for m in range(1, n_modes + 1):
        c = albedo_scale * (g ** m) / np.pi
        if c == 0.0:
            break  # isotropic case: higher modes carry no mass
        modes.append(KernelMode("cos", m, uniform_phase(c * np.cos(m * angles)),
                                uniform_x=True))
        modes.append(KernelMode("sin", m, uniform_phase(c * np.sin(m * angles)),
                                uniform_x=True))
    return ScatterKernel(tuple(modes))


def eval_kernel(kernel: ScatterKernel, x: tuple[float, float], theta: float,
                theta_prime: float) -> float:
    """Pointwise kernel value sum_j Theta_j(theta) kappa_j(x, theta')."""
    pt = np.array([[x[0], x[1]]])
    ang = np.array([theta_prime])
    total = 0.0
    for mode in kernel.modes:
        th = mode.theta_values(np.array([theta]))[0]
        if mode.uniform_x:
            kap = kernel.kappa_at(mode, ang)[0]
        else:
            kap = mode.kappa.eval_at(pt, ang)[0]
        total += th * kap
    return float(total)


def random_bump_field(domain, nx: int, seed: int, n_bumps: int = 12,
                      ny: int | None = None) -> ScalarField:
    """Seeded smooth random field supported in Omega.

    A fixed ensemble of Gaussian bumps with centers, widths and signs drawn
    from the seed; the same seed gives the same continuum field on every
    grid, which keeps probes comparable across resolutions.
    """
    rng = np.random.default_rng(seed)
    a, b = domain.semi_axes("omega")
    scale = min(a, b)
    bumps = []
    for _ in range(n_bumps):
        ang = rng.uniform(0, 2 * np.pi)
        rad = 0.75 * scale * math.sqrt(rng.uniform())
        center = (domain.center[0] + rad * math.cos(ang),
                  domain.center[1] + rad * math.sin(ang))
        width = scale * rng.uniform(0.08, 0.22)
        amp = rng.standard_normal()
        bumps.append({"center": center, "width": width, "amp": amp})
    f = make_phantom(domain, nx, "multi_bump", {"bumps": bumps}, ny=ny)
    n = f.norm_l2()
    if n == 0:
        raise RuntimeError("degenerate random field")
    return f.with_values(f.values / n)
