"""Parsers for the rtinverse file formats.

Independent of the solver package on purpose: these read the documented
formats (flat little-endian float64 blob + JSON sidecar; CSV with a header
row) and nothing else. All failures raise VizError with file and, for CSV,
line context.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

SIDECAR_KEYS = {"nx", "ny", "n_theta", "bbox", "kind"}


class VizError(Exception):
    """Input file missing or not parseable as a documented format."""


def _base_of(path: Path) -> Path:
    # accept the base path or either half of the pair
    if path.suffix in (".f64", ".json"):
        return path.with_suffix("")
    return path


def read_field_pair(path):
    """Read a <base>.f64/<base>.json pair.

    Returns (values, bbox, kind): values is (nx, ny) or (nx, ny, n_theta),
    bbox is (xmin, xmax, ymin, ymax).
    """
    base = _base_of(Path(path))
    side = base.with_suffix(".json")
    blob = base.with_suffix(".f64")
    for p in (side, blob):
        if not p.exists():
            raise VizError(f"{p}: no such file")
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError as e:
        raise VizError(f"{side}:{e.lineno}: not valid JSON ({e.msg})") from e
    if not isinstance(meta, dict):
        raise VizError(f"{side}: sidecar must be a JSON object")
    extra = set(meta) - SIDECAR_KEYS
    if extra:
        raise VizError(f"{side}: unknown sidecar keys {sorted(extra)}")
    missing = {"nx", "ny", "bbox", "kind"} - set(meta)
    if missing:
        raise VizError(f"{side}: missing sidecar keys {sorted(missing)}")
    nx, ny = int(meta["nx"]), int(meta["ny"])
    bbox = tuple(float(b) for b in meta["bbox"])
    if len(bbox) != 4:
        raise VizError(f"{side}: bbox must have 4 entries")
    raw = np.frombuffer(blob.read_bytes(), dtype="<f8")
    shape = (nx, ny, int(meta["n_theta"])) if "n_theta" in meta else (nx, ny)
    if raw.size != int(np.prod(shape)):
        raise VizError(f"{blob}: payload has {raw.size} values, sidecar "
                       f"promises {'x'.join(str(s) for s in shape)}")
    return raw.reshape(shape).copy(), bbox, str(meta["kind"])


def read_csv_columns(path):
    """Read a headered CSV into (column_names, float matrix).

    Non-numeric trailing columns (like a status string) come back in the
    matrix as NaN with the raw strings in a separate list per row.
    """
    path = Path(path)
    if not path.exists():
        raise VizError(f"{path}: no such file")
    lines = path.read_text().splitlines()
    if not lines:
        raise VizError(f"{path}:1: empty file")
    names = [c.strip() for c in lines[0].split(",")]
    if len(names) < 2 or any(not n for n in names):
        raise VizError(f"{path}:1: expected a comma-separated header row")
    rows, raw_rows = [], []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(names):
            raise VizError(f"{path}:{no}: {len(cells)} cells, header has "
                           f"{len(names)}")
        row = []
        for cell in cells:
            try:
                row.append(float(cell))
            except ValueError:
                row.append(float("nan"))
        rows.append(row)
        raw_rows.append([c.strip() for c in cells])
    if not rows:
        raise VizError(f"{path}: no data rows")
    return names, np.asarray(rows, dtype=float), raw_rows


def read_sinogram_csv(path):
    """Pivot a beta,alpha,weight,value CSV to dense (n_beta, n_alpha) grids.

    Returns (betas, alphas, values, mask) with mask True at retained
    samples; cells absent from the file (discarded pairs) are masked.
    """
    names, data, _ = read_csv_columns(path)
    if names != ["beta", "alpha", "weight", "value"]:
        raise VizError(f"{path}:1: expected header beta,alpha,weight,value, "
                       f"got {','.join(names)}")
    betas = np.unique(data[:, 0])
    alphas = np.unique(data[:, 1])
    values = np.zeros((betas.size, alphas.size))
    mask = np.zeros_like(values, dtype=bool)
    bi = np.searchsorted(betas, data[:, 0])
    aj = np.searchsorted(alphas, data[:, 1])
    values[bi, aj] = data[:, 3]
    mask[bi, aj] = True
    return betas, alphas, values, mask
