"""File formats for fields, sinograms, residual logs, and run manifests.

Fields go to a flat little-endian float64 blob with a JSON sidecar; the
pair round-trips bit-exactly. Sinograms additionally get a CSV rendering
with one sample per row, which is what the plotting tools consume.
"""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from .fields import ScalarField, PhaseField

__all__ = [
    "write_field",
    "read_field",
    "write_sinogram",
    "read_sinogram_csv",
    "write_residuals",
    "read_residuals",
    "write_manifest",
    "file_sha256",
]

_SIDECAR_KEYS = {"nx", "ny", "n_theta", "bbox", "kind"}


def _dump_json(path: Path, payload: dict) -> None:
    # sorted keys and fixed separators keep byte output reproducible
    path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def write_field(base, field, kind: str = "field") -> list:
    """Write <base>.f64 plus <base>.json and return the paths written."""
    base = Path(base)
    values = np.ascontiguousarray(field.values, dtype="<f8")
    meta = {
        "nx": int(field.nx),
        "ny": int(field.ny),
        "bbox": [float(b) for b in field.bbox],
        "kind": kind,
    }
    if values.ndim == 3:
        meta["n_theta"] = int(values.shape[2])
    elif values.ndim != 2:
        raise ValueError("field values must be 2d or 3d")
    blob = base.with_suffix(".f64")
    blob.write_bytes(values.tobytes())
    side = base.with_suffix(".json")
    _dump_json(side, meta)
    return [blob, side]


def read_field(base):
    """Read a field pair written by write_field.

    Returns a PhaseField when the sidecar carries n_theta, else a
    ScalarField. Unknown sidecar keys are rejected so format drift is
    caught at the reader, not downstream.
    """
    base = Path(base)
    meta = json.loads(base.with_suffix(".json").read_text())
    extra = set(meta) - _SIDECAR_KEYS
    if extra:
        raise ValueError(f"unknown sidecar keys: {sorted(extra)}")
    nx, ny = int(meta["nx"]), int(meta["ny"])
    bbox = tuple(float(b) for b in meta["bbox"])
    raw = np.frombuffer(base.with_suffix(".f64").read_bytes(), dtype="<f8")
    if "n_theta" in meta:
        nt = int(meta["n_theta"])
        if raw.size != nx * ny * nt:
            raise ValueError("payload size does not match sidecar")
        return PhaseField(raw.reshape(nx, ny, nt).copy(), bbox)
    if raw.size != nx * ny:
        raise ValueError("payload size does not match sidecar")
    return ScalarField(raw.reshape(nx, ny).copy(), bbox)


def write_sinogram(base, sino) -> list:
    """Write a sinogram as CSV and as the binary field pair.

    CSV header is beta,alpha,weight,value with %.17g floats, one retained
    outgoing sample per row. The binary pair stores the dense
    (n_beta, n_alpha) array, zero at discarded incoming pairs, with the
    angular ranges as its bbox.
    """
    base = Path(base)
    grid = sino.grid
    values = np.asarray(sino.values, dtype=float)
    csv_path = base.with_suffix(".csv")
    with csv_path.open("w") as fh:
        fh.write("beta,alpha,weight,value\n")
        for s in range(len(grid)):
            fh.write("%.17g,%.17g,%.17g,%.17g\n" % (
                grid.beta[s], grid.alpha[s], grid.weight[s], values[s]))
    # dense layout recovers the (i, j) lattice the sample angles came from
    d_beta = 2.0 * np.pi / grid.n_beta
    d_alpha = 2.0 * np.pi / grid.n_alpha
    bi = np.rint(grid.beta / d_beta - 0.5).astype(int) % grid.n_beta
    aj = np.rint(grid.alpha / d_alpha).astype(int) % grid.n_alpha
    dense = np.zeros((grid.n_beta, grid.n_alpha))
    dense[bi, aj] = values
    two_pi = 2.0 * np.pi
    carrier = ScalarField(dense, (0.0, two_pi, 0.0, two_pi))
    return [csv_path] + write_field(base, carrier, kind="sinogram")


def read_sinogram_csv(path):
    """Return (beta, alpha, weight, values) arrays from a sinogram CSV.

    beta and alpha come back as the sorted unique sample coordinates and
    values as the (n_beta, n_alpha) grid; rows may appear in any order.
    """
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if raw.shape[1] != 4:
        raise ValueError(f"{path}: expected 4 columns, got {raw.shape[1]}")
    betas = np.unique(raw[:, 0])
    alphas = np.unique(raw[:, 1])
    weight = np.zeros((betas.size, alphas.size))
    values = np.zeros_like(weight)
    bi = np.searchsorted(betas, raw[:, 0])
    aj = np.searchsorted(alphas, raw[:, 1])
    weight[bi, aj] = raw[:, 2]
    values[bi, aj] = raw[:, 3]
    return betas, alphas, weight, values


def write_residuals(path, residuals) -> Path:
    """CSV of (iteration, normal_residual, data_residual), 1-based."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("iteration,normal_residual,data_residual\n")
        for i, (rn, rd) in enumerate(residuals, start=1):
            fh.write("%d,%.17g,%.17g\n" % (i, rn, rd))
    return path


def read_residuals(path):
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return raw


def file_sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(path, config_hash: str, files, timings: dict,
                   extra: dict | None = None) -> Path:
    """Run manifest: config hash, versions, timings, per-file hashes.

    Timings vary between runs by nature; the determinism contract covers
    the data artifacts, which is why their hashes live here where a test
    can compare everything except the timings block.
    """
    from . import __version__
    import numpy
    files = [Path(f) for f in files]
    payload = {
        "config_sha256": config_hash,
        "versions": {
            "rtinverse": __version__,
            "numpy": numpy.__version__,
            "python": platform.python_version(),
        },
        "timings_sec": {k: round(float(v), 3) for k, v in timings.items()},
        "artifacts": {f.name: file_sha256(f) for f in sorted(files)},
    }
    try:
        import numba
        payload["versions"]["numba"] = numba.__version__
    except ImportError:
        pass
    if extra:
        payload["run"] = extra
    path = Path(path)
    _dump_json(path, payload)
    return path
