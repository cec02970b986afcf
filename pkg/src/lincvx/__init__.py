"""Numerical toolkit for anisotropic geometry and integral kernels on lineally convex model domains."""

from .domains import DomainSpec, catalog, get_domain, eval_rho, boundary_distance, check_lineal_convexity
from .geometry import tau, extremal_basis, pseudodistance, verify_geometry_properties
from .norms import FormField, CurrentField, form_knorm, current_norms
from .support import SupportParams, Support, hefer_divide, verify_local_estimate
from .kernels import KernelAssembly, calibrate_K0
from .solvers import SolveReport, dbar_solve, koppelman_check, poincare_d_solve

__all__ = [
    "DomainSpec", "catalog", "get_domain", "eval_rho", "boundary_distance",
    "check_lineal_convexity", "tau", "extremal_basis", "pseudodistance",
    "verify_geometry_properties", "FormField", "CurrentField", "form_knorm", "current_norms",
    "SupportParams", "Support", "hefer_divide", "verify_local_estimate", "KernelAssembly",
    "calibrate_K0", "SolveReport", "dbar_solve", "koppelman_check", "poincare_d_solve",
]
