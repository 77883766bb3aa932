"""Experiment configuration: JSON schema, strict validation, canonical hash.

A config fully determines a run. Unknown keys are rejected with the JSON
path of the offender so typos fail fast instead of silently falling back
to defaults. The resolved config (defaults filled in) has a canonical
serialization whose sha256 goes into the run manifest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import DiscDomain, EllipseDomain, boundary_grid
from .fields import make_phantom, make_sigma, make_hg_kernel
from .transport import TransportConfig
from .inversion import ReconConfig

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "example_config"]


class ConfigError(ValueError):
    """Invalid configuration; `path` holds the JSON path of the offender."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _reject_unknown(d: dict, allowed, path: str) -> None:
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(path, f"unknown key(s) {sorted(extra)}; "
                          f"allowed: {sorted(allowed)}")


def _get(d: dict, key: str, default, path: str, typ=None):
    v = d.get(key, default)
    if typ is not None and v is not None and not isinstance(v, typ):
        raise ConfigError(f"{path}.{key}", f"expected {typ}, got {type(v).__name__}")
    return v


_SIGMA_KINDS = ("constant", "gaussian", "zero")
_PHANTOM_KINDS = ("gaussian", "disc_indicator", "multi_bump", "zero")
_NOISE_KINDS = ("none", "gaussian")
_KERNEL_KINDS = ("none", "isotropic", "hg")


@dataclass(frozen=True)
class ExperimentConfig:
    domain: dict = field(default_factory=lambda: {
        "kind": "disc", "radius": 1.0, "enlarged_radius": 1.3})
    recon_grid: dict = field(default_factory=lambda: {"nx": 129, "n_theta": 64})
    data_grid: dict = field(default_factory=lambda: {"nx": 257, "n_theta": 128})
    boundary: dict = field(default_factory=lambda: {
        "n_beta": 512, "n_alpha": 64, "measure_on": "omega1"})
    phantom: dict = field(default_factory=lambda: {
        "kind": "gaussian",
        "params": {"center": [0.2, -0.1], "width": 0.3, "amp": 1.0}})
    sigma: dict = field(default_factory=lambda: {
        "kind": "constant", "params": {"value": 0.5}, "extension": "smooth"})
    kernel: dict = field(default_factory=lambda: {"kind": "none"})
    transport: TransportConfig = TransportConfig()
    recon: ReconConfig = ReconConfig()
    noise: dict = field(default_factory=lambda: {"kind": "none"})
    seed: int = 1234
    output_dir: str = "out"
    avoid_inverse_crime: bool = True

    # -- construction -----------------------------------------------------

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        _reject_unknown(raw, (
            "domain", "recon_grid", "data_grid", "boundary", "phantom",
            "sigma", "kernel", "transport", "recon", "noise", "seed",
            "output_dir", "avoid_inverse_crime"), "$")
        dom = dict(_get(raw, "domain", {"kind": "disc"}, "$", dict))
        kind = dom.pop("kind", "disc")
        if kind == "disc":
            _reject_unknown(dom, ("radius", "enlarged_radius"), "$.domain")
        elif kind == "ellipse":
            _reject_unknown(dom, ("center", "semi_a", "semi_b",
                                  "enlarged_factor"), "$.domain")
        else:
            raise ConfigError("$.domain.kind", f"unknown domain kind {kind!r}")
        dom["kind"] = kind

        def grid(name, default):
            g = dict(_get(raw, name, default, "$", dict))
            _reject_unknown(g, ("nx", "n_theta"), f"$.{name}")
            nx = _get(g, "nx", default["nx"], f"$.{name}", int)
            nt = _get(g, "n_theta", default["n_theta"], f"$.{name}", int)
            if nx < 8:
                raise ConfigError(f"$.{name}.nx", "grid too small (min 8)")
            if nt < 4:
                raise ConfigError(f"$.{name}.n_theta", "need at least 4 directions")
            return {"nx": nx, "n_theta": nt}

        recon_grid = grid("recon_grid", {"nx": 129, "n_theta": 64})
        data_grid = grid("data_grid", {"nx": 2 * recon_grid["nx"] - 1,
                                       "n_theta": 2 * recon_grid["n_theta"]})

        bnd = dict(_get(raw, "boundary", {}, "$", dict))
        _reject_unknown(bnd, ("n_beta", "n_alpha", "measure_on"), "$.boundary")
        bnd = {"n_beta": _get(bnd, "n_beta", 512, "$.boundary", int),
               "n_alpha": _get(bnd, "n_alpha", 64, "$.boundary", int),
               "measure_on": _get(bnd, "measure_on", "omega1", "$.boundary", str)}
        if bnd["measure_on"] not in ("omega", "omega1"):
            raise ConfigError("$.boundary.measure_on", "must be omega or omega1")
        if bnd["n_beta"] < 8 or bnd["n_alpha"] < 4:
            raise ConfigError("$.boundary", "boundary sampling too coarse")

        ph = dict(_get(raw, "phantom", {}, "$", dict))
        _reject_unknown(ph, ("kind", "params"), "$.phantom")
        ph = {"kind": _get(ph, "kind", "gaussian", "$.phantom", str),
              "params": dict(_get(ph, "params", {
                  "center": [0.2, -0.1], "width": 0.3, "amp": 1.0},
                  "$.phantom", dict))}
        if ph["kind"] not in _PHANTOM_KINDS:
            raise ConfigError("$.phantom.kind",
                              f"unknown kind {ph['kind']!r}; allowed {_PHANTOM_KINDS}")

        sg = dict(_get(raw, "sigma", {}, "$", dict))
        _reject_unknown(sg, ("kind", "params", "extension"), "$.sigma")
        sg = {"kind": _get(sg, "kind", "constant", "$.sigma", str),
              "params": dict(_get(sg, "params", {"value": 0.5}, "$.sigma", dict)),
              "extension": _get(sg, "extension", "smooth", "$.sigma", str)}
        if sg["kind"] not in _SIGMA_KINDS:
            raise ConfigError("$.sigma.kind",
                              f"unknown kind {sg['kind']!r}; allowed {_SIGMA_KINDS}")
        if sg["extension"] not in ("smooth", "sharp"):
            raise ConfigError("$.sigma.extension", "must be smooth or sharp")

        kr = dict(_get(raw, "kernel", {"kind": "none"}, "$", dict))
        kkind = _get(kr, "kind", "none", "$.kernel", str)
        if kkind == "none":
            _reject_unknown(kr, ("kind",), "$.kernel")
            kr = {"kind": "none"}
        elif kkind == "isotropic":
            _reject_unknown(kr, ("kind", "albedo_scale"), "$.kernel")
            kr = {"kind": "isotropic",
                  "albedo_scale": float(_get(kr, "albedo_scale", 0.3,
                                             "$.kernel", (int, float)))}
        elif kkind == "hg":
            _reject_unknown(kr, ("kind", "g", "albedo_scale", "n_modes"), "$.kernel")
            kr = {"kind": "hg",
                  "g": float(_get(kr, "g", 0.5, "$.kernel", (int, float))),
                  "albedo_scale": float(_get(kr, "albedo_scale", 0.3,
                                             "$.kernel", (int, float))),
                  "n_modes": _get(kr, "n_modes", 8, "$.kernel", int)}
        else:
            raise ConfigError("$.kernel.kind",
                              f"unknown kind {kkind!r}; allowed {_KERNEL_KINDS}")

        tr = dict(_get(raw, "transport", {}, "$", dict))
        _reject_unknown(tr, ("ray_step", "neumann_tol", "neumann_max_iter",
                             "lambda_scale", "cache_budget_mb"), "$.transport")
        try:
            transport = TransportConfig(**tr)
        except (TypeError, ValueError) as e:
            raise ConfigError("$.transport", str(e)) from e

        rc = dict(_get(raw, "recon", {}, "$", dict))
        _reject_unknown(rc, ("max_krylov_iter", "krylov_tol", "tikhonov_alpha",
                             "preconditioner", "riesz_taper"), "$.recon")
        try:
            recon = ReconConfig(**rc)
        except (TypeError, ValueError) as e:
            raise ConfigError("$.recon", str(e)) from e

        nz = dict(_get(raw, "noise", {"kind": "none"}, "$", dict))
        nkind = _get(nz, "kind", "none", "$.noise", str)
        if nkind == "none":
            _reject_unknown(nz, ("kind",), "$.noise")
            nz = {"kind": "none"}
        elif nkind == "gaussian":
            _reject_unknown(nz, ("kind", "rel_level"), "$.noise")
            lvl = float(_get(nz, "rel_level", 0.01, "$.noise", (int, float)))
            if lvl < 0:
                raise ConfigError("$.noise.rel_level", "must be nonnegative")
            nz = {"kind": "gaussian", "rel_level": lvl}
        else:
            raise ConfigError("$.noise.kind",
                              f"unknown kind {nkind!r}; allowed {_NOISE_KINDS}")

        seed = _get(raw, "seed", 1234, "$", int)
        out = _get(raw, "output_dir", "out", "$", str)
        avoid = _get(raw, "avoid_inverse_crime", True, "$", bool)
        cfg = ExperimentConfig(dom, recon_grid, data_grid, bnd, ph, sg, kr,
                               transport, recon, nz, seed, out, avoid)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.avoid_inverse_crime:
            if not (self.data_grid["nx"] > self.recon_grid["nx"]
                    and self.data_grid["n_theta"] > self.recon_grid["n_theta"]):
                raise ConfigError(
                    "$.data_grid", "must be strictly finer than recon_grid "
                    "while avoid_inverse_crime is on")

    # -- object builders ---------------------------------------------------

    def build_domain(self):
        d = dict(self.domain)
        kind = d.pop("kind")
        try:
            if kind == "disc":
                return DiscDomain(**d)
            ec = d.pop("center", (0.0, 0.0))
            return EllipseDomain(center=tuple(ec), **d)
        except Exception as e:
            raise ConfigError("$.domain", str(e)) from e

    def build_boundary_grid(self, domain):
        return boundary_grid(domain, n_beta=self.boundary["n_beta"],
                             n_alpha=self.boundary["n_alpha"],
                             on=self.boundary["measure_on"])

    def build_sigma(self, domain, which: str = "recon"):
        g = self.recon_grid if which == "recon" else self.data_grid
        try:
            return make_sigma(domain, g["nx"], g["n_theta"],
                              kind=self.sigma["kind"],
                              params=self.sigma["params"],
                              extension=self.sigma["extension"])
        except Exception as e:
            raise ConfigError("$.sigma", str(e)) from e

    def build_kernel(self):
        k = self.kernel
        if k["kind"] == "none":
            return None
        try:
            if k["kind"] == "isotropic":
                return make_hg_kernel(g=0.0, albedo_scale=k["albedo_scale"],
                                      n_modes=1)
            return make_hg_kernel(g=k["g"], albedo_scale=k["albedo_scale"],
                                  n_modes=k["n_modes"])
        except Exception as e:
            raise ConfigError("$.kernel", str(e)) from e

    def build_phantom(self, domain, which: str = "data"):
        g = self.data_grid if which == "data" else self.recon_grid
        kind, params = self.phantom["kind"], self.phantom["params"]
        if kind == "zero":
            f = make_phantom(domain, g["nx"], "gaussian",
                             {"center": domain.center, "width": 1.0, "amp": 1.0})
            return f.with_values(f.values * 0.0)
        try:
            return make_phantom(domain, g["nx"], kind, params)
        except Exception as e:
            raise ConfigError("$.phantom", str(e)) from e

    # -- canonical form ----------------------------------------------------

    def to_dict(self) -> dict:
        tr = self.transport
        rc = self.recon
        return {
            "domain": self.domain,
            "recon_grid": self.recon_grid,
            "data_grid": self.data_grid,
            "boundary": self.boundary,
            "phantom": self.phantom,
            "sigma": self.sigma,
            "kernel": self.kernel,
            "transport": {
                "ray_step": tr.ray_step, "neumann_tol": tr.neumann_tol,
                "neumann_max_iter": tr.neumann_max_iter,
                "lambda_scale": tr.lambda_scale,
                "cache_budget_mb": tr.cache_budget_mb},
            "recon": {
                "max_krylov_iter": rc.max_krylov_iter,
                "krylov_tol": rc.krylov_tol,
                "tikhonov_alpha": rc.tikhonov_alpha,
                "preconditioner": rc.preconditioner,
                "riesz_taper": rc.riesz_taper},
            "noise": self.noise,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "avoid_inverse_crime": self.avoid_inverse_crime,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError("$", f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("$", f"{path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("$", "top-level JSON value must be an object")
    return ExperimentConfig.from_dict(raw)


def example_config() -> dict:
    """The bundled example: small enough to run in seconds."""
    return {
        "domain": {"kind": "disc", "radius": 1.0, "enlarged_radius": 1.3},
        "recon_grid": {"nx": 65, "n_theta": 32},
        "data_grid": {"nx": 129, "n_theta": 64},
        "boundary": {"n_beta": 256, "n_alpha": 32, "measure_on": "omega1"},
        "phantom": {"kind": "gaussian",
                    "params": {"center": [0.2, -0.1], "width": 0.3, "amp": 1.0}},
        "sigma": {"kind": "constant", "params": {"value": 0.5},
                  "extension": "smooth"},
        "kernel": {"kind": "isotropic", "albedo_scale": 0.3},
        "transport": {"ray_step": 1.0 / 128},
        "recon": {"max_krylov_iter": 60, "krylov_tol": 1e-6},
        "noise": {"kind": "none"},
        "seed": 1234,
        "output_dir": "out",
    }
