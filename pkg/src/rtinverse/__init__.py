"""Forward transport solver and inverse-source reconstruction on convex domains.

The forward model propagates an isotropic source through an absorbing,
scattering medium and records the outgoing flux on the boundary of an
enlarged domain; the inverse side recovers the source from those
measurements by conjugate gradients on the normal equations, with an
optional first-order Fourier preconditioner, plus diagnostics for the
stability of the reconstruction.
"""

from .geometry import (DiscDomain, EllipseDomain, Ray, BoundaryGrid,
                       boundary_grid, exit_times, santalo_integral)
from .fields import (ScalarField, PhaseField, ScatterKernel, KernelMode,
                     make_phantom, make_sigma, make_hg_kernel, eval_kernel,
                     random_bump_field)
from .transport import (TransportConfig, NonContractiveError, ForwardSolution,
                        solve_forward, apply_T1_inv, apply_K, attenuation)
from .measurement import (BoundarySinogram, MeasurementOperator, apply_X,
                          apply_X_star, apply_I_sigma, apply_I_sigma_star,
                          boundary_trace_T1_inv)
from .inversion import (ReconConfig, ReconResult, MaxIterReached, reconstruct,
                        riesz_preconditioner, choose_alpha_discrepancy,
                        stability_probe, StabilityResult, h1_norm)
from .config import ExperimentConfig, ConfigError, load_config, example_config

__version__ = "0.1.0"

__all__ = [
    "DiscDomain", "EllipseDomain", "Ray", "BoundaryGrid", "boundary_grid",
    "exit_times", "santalo_integral",
    "ScalarField", "PhaseField", "ScatterKernel", "KernelMode",
    "make_phantom", "make_sigma", "make_hg_kernel", "eval_kernel",
    "random_bump_field",
    "TransportConfig", "NonContractiveError", "ForwardSolution",
    "solve_forward", "apply_T1_inv", "apply_K", "attenuation",
    "BoundarySinogram", "MeasurementOperator", "apply_X", "apply_X_star",
    "apply_I_sigma", "apply_I_sigma_star", "boundary_trace_T1_inv",
    "ReconConfig", "ReconResult", "MaxIterReached", "reconstruct",
    "riesz_preconditioner", "choose_alpha_discrepancy", "stability_probe",
    "StabilityResult", "h1_norm",
    "ExperimentConfig", "ConfigError", "load_config", "example_config",
    "__version__",
]
