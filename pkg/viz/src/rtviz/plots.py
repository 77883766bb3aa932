"""Figure rendering. Deterministic: fixed size, dpi, colormap, no timestamps."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .readers import VizError, read_field_pair, read_csv_columns, read_sinogram_csv

FIGSIZE = (6.4, 4.8)
DPI = 110
CMAP = "viridis"
# pinned metadata so identical inputs give identical bytes
_META = {"Software": "rtviz"}

KINDS = ("field", "sinogram", "sweep", "residuals")


@dataclass
class FigureSpec:
    """One figure: what to read, how to plot it, where the PNG goes."""

    kind: str
    inputs: list = field(default_factory=list)
    out: Path = Path("figure.png")
    vmin: float | None = None
    vmax: float | None = None
    colorbar: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise VizError(f"unknown plot kind {self.kind!r}; "
                           f"valid: {', '.join(KINDS)}")
        if not self.inputs:
            raise VizError("a figure needs at least one input file")
        self.inputs = [Path(p) for p in self.inputs]
        self.out = Path(self.out)


def _new_axes(n: int = 1):
    fig, axes = plt.subplots(1, n, figsize=(FIGSIZE[0] * n, FIGSIZE[1]),
                             dpi=DPI)
    return fig, (axes if n > 1 else [axes])


def _save(fig, out: Path) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=_META)
    plt.close(fig)
    return out


def _field_panel(ax, values, bbox, title, vmin, vmax, cbar):
    if values.ndim == 3:
        # phase-space field: show the angular mean
        shown = values.mean(axis=2)
        title = f"{title} (mean over {values.shape[2]} directions)"
    else:
        shown = values
    im = ax.imshow(shown.T, origin="lower",
                   extent=(bbox[0], bbox[1], bbox[2], bbox[3]),
                   cmap=CMAP, vmin=vmin, vmax=vmax, interpolation="nearest")
    ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if cbar:
        ax.figure.colorbar(im, ax=ax, shrink=0.85)


def plot_field(path, out, against=None, vmin=None, vmax=None,
               colorbar: bool = True) -> Path:
    """Heatmap of a field pair; optional second field side by side on a
    shared color range."""
    values, bbox, kind = read_field_pair(path)
    panels = [(values, bbox, kind)]
    if against is not None:
        panels.append(read_field_pair(against))
    if vmin is None and vmax is None and len(panels) > 1:
        flat = [p[0].mean(axis=2) if p[0].ndim == 3 else p[0] for p in panels]
        vmin = min(float(f.min()) for f in flat)
        vmax = max(float(f.max()) for f in flat)
    fig, axes = _new_axes(len(panels))
    for ax, (v, bb, k) in zip(axes, panels):
        _field_panel(ax, v, bb, k, vmin, vmax, colorbar)
    return _save(fig, out)


def plot_sinogram(path, out, vmin=None, vmax=None, colorbar: bool = True) -> Path:
    """Heatmap over (beta, alpha); discarded sample pairs are blanked.

    Accepts the per-sample CSV or the dense .f64/.json rendering.
    """
    path = Path(path)
    if path.suffix == ".csv":
        betas, alphas, values, mask = read_sinogram_csv(path)
        shown = np.ma.masked_where(~mask, values)
        extent = (float(alphas[0]), float(alphas[-1]),
                  float(betas[0]), float(betas[-1]))
    else:
        values, bbox, kind = read_field_pair(path)
        if values.ndim != 2:
            raise VizError(f"{path}: dense sinograms are 2d, got 3d payload")
        shown = np.ma.masked_where(values == 0.0, values)
        extent = (bbox[2], bbox[3], bbox[0], bbox[1])
    fig, (ax,) = _new_axes()
    im = ax.imshow(shown, origin="lower", extent=extent, aspect="auto",
                   cmap=CMAP, vmin=vmin, vmax=vmax, interpolation="nearest")
    ax.set_xlabel("direction alpha")
    ax.set_ylabel("boundary beta")
    ax.set_title("outgoing boundary data")
    if colorbar:
        fig.colorbar(im, ax=ax, shrink=0.85)
    return _save(fig, out)


def plot_sweep(path, out) -> Path:
    """Lambda-sweep chart: error and contraction ratio against lambda,
    non-contractive rows flagged."""
    names, data, raw = read_csv_columns(path)
    need = {"lambda", "ratio", "rel_l2", "iterations", "status"}
    if not need.issubset(names):
        raise VizError(f"{path}:1: sweep CSV must carry columns "
                       f"{sorted(need)}, got {names}")
    col = {n: i for i, n in enumerate(names)}
    lam = data[:, col["lambda"]]
    ok = np.array([r[col["status"]] == "ok" for r in raw])
    fig, (ax,) = _new_axes()
    ax.plot(lam[ok], data[ok, col["rel_l2"]], "o-", label="rel L2 error")
    ax.plot(lam[ok], data[ok, col["ratio"]], "s--", label="contraction ratio")
    for x in lam[~ok]:
        ax.axvline(x, color="crimson", alpha=0.6, linestyle=":")
    if np.any(~ok):
        ax.plot([], [], color="crimson", linestyle=":",
                label="non-contractive")
    ax.set_xlabel("kernel scale lambda")
    ax.set_title("scattering-scale sweep")
    ax.legend()
    return _save(fig, out)


def plot_residuals(path, out) -> Path:
    """Semilog decay curves from any iteration-indexed CSV log
    (reconstruction residuals, forward series history)."""
    names, data, _ = read_csv_columns(path)
    fig, (ax,) = _new_axes()
    x = data[:, 0]
    for j in range(1, len(names)):
        if np.all(np.isnan(data[:, j])):
            continue
        ax.semilogy(x, np.maximum(data[:, j], 1e-300), "o-", ms=3,
                    label=names[j])
    ax.set_xlabel(names[0])
    ax.set_title(Path(path).stem.replace("_", " "))
    ax.legend()
    return _save(fig, out)


def render(spec: FigureSpec) -> Path:
    """Dispatch a FigureSpec to its plotter; returns the PNG path."""
    if spec.kind == "field":
        against = spec.inputs[1] if len(spec.inputs) > 1 else None
        return plot_field(spec.inputs[0], spec.out, against=against,
                          vmin=spec.vmin, vmax=spec.vmax,
                          colorbar=spec.colorbar)
    if spec.kind == "sinogram":
        return plot_sinogram(spec.inputs[0], spec.out, vmin=spec.vmin,
                             vmax=spec.vmax, colorbar=spec.colorbar)
    if spec.kind == "sweep":
        return plot_sweep(spec.inputs[0], spec.out)
    return plot_residuals(spec.inputs[0], spec.out)
