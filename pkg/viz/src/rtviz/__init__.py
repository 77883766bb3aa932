"""Plotting for rtinverse artifacts.

Post-processing only: everything here reads the documented file formats
(.f64/.json field pairs and the CSV logs) and writes PNG figures. No
numerics from the solver are duplicated or imported.
"""

__version__ = "0.1.0"

from .readers import VizError, read_field_pair, read_csv_columns, read_sinogram_csv
from .plots import FigureSpec, render, plot_field, plot_sinogram, plot_sweep, plot_residuals

__all__ = [
    "VizError",
    "FigureSpec",
    "render",
    "plot_field",
    "plot_sinogram",
    "plot_sweep",
    "plot_residuals",
    "read_field_pair",
    "read_csv_columns",
    "read_sinogram_csv",
]
