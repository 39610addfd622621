"""Function extension from manifold samples via normalized Gaussian kernels."""

from .dimred import ProjectionBasis, build_a1, project, svd_basis
from .extender import ExtenderModel, extend, extend_batch, fit
from .online import EvaluationCache, evaluate_cached, update

__version__ = "0.1.0"

__all__ = [
    "EvaluationCache",
    "ExtenderModel",
    "ProjectionBasis",
    "build_a1",
    "evaluate_cached",
    "extend",
    "extend_batch",
    "fit",
    "project",
    "svd_basis",
    "update",
]
