"""Complex extension of lifted orbits by the lambda-perturbed contraction scheme."""

from sdde_analytic.complexext.contraction import (
    NON_CONTRACTIVE_NOTE,
    ContinuationResult,
    ContractionConfig,
    ConvergenceRecord,
    DiskRadiusReport,
    default_lambdas,
    disk_radius_report,
    estimate_disk_radius,
    estimate_lipschitz,
    lambda_continuation,
    picard_apply,
    solve_fixed_point,
)
from sdde_analytic.complexext.orbit import (
    ComplexOrbit,
    RayQuadrature,
    ray_angles,
    real_slice_error,
    restrict_to_ray,
)
from sdde_analytic.complexext.taylor import TaylorReport, circle_coefficients, fit_radius, taylor_coefficients

__all__ = [
    "NON_CONTRACTIVE_NOTE",
    "ComplexOrbit",
    "ContinuationResult",
    "ContractionConfig",
    "ConvergenceRecord",
    "DiskRadiusReport",
    "RayQuadrature",
    "TaylorReport",
    "circle_coefficients",
    "default_lambdas",
    "disk_radius_report",
    "estimate_disk_radius",
    "estimate_lipschitz",
    "fit_radius",
    "lambda_continuation",
    "picard_apply",
    "ray_angles",
    "real_slice_error",
    "restrict_to_ray",
    "solve_fixed_point",
    "taylor_coefficients",
]
