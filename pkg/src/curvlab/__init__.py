"""curvlab: numerical laboratory for curvature equations of star-shaped
hypersurfaces in warped product spaces."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    POS_INF,
    AdmissibilityError,
    ConfigError,
    CurvlabError,
    DegenerateDenominatorError,
    DiscretizationError,
    DomainError,
    GeometryError,
    PreconditionError,
    SamplerStarvation,
    StallError,
)
from .geometry import RadialGraph, Warp, eval_warp, fundamental_forms, surface_fields
from .solver import ContinuationPath, Problem, PsiField, continuation, newton_step, residual, solve
from .symfunc import PrincipalCurvatures, classify_cone, sample_cone, sigma, sigma_grad, sigma_hess

__all__ = [
    "POS_INF",
    "AdmissibilityError",
    "ConfigError",
    "ContinuationPath",
    "CurvlabError",
    "DegenerateDenominatorError",
    "DiscretizationError",
    "DomainError",
    "GeometryError",
    "PreconditionError",
    "PrincipalCurvatures",
    "Problem",
    "PsiField",
    "RadialGraph",
    "SamplerStarvation",
    "StallError",
    "Warp",
    "classify_cone",
    "continuation",
    "eval_warp",
    "fundamental_forms",
    "newton_step",
    "residual",
    "sample_cone",
    "sigma",
    "sigma_grad",
    "sigma_hess",
    "solve",
    "surface_fields",
]
