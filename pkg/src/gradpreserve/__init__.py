"""Gradient-preserving visually protected images and magnitude-free HOG features."""
from .exceptions import ImageIOError, InsufficientData, InvalidImage, InvalidLatent, ShapeMismatch
from .gdm import BorderPolicy, GdmConfig, central_differences, gdm, gdm_residual, mean_abs_angle_error
from .generator import (
    ConvergenceReport,
    GradientPreservingProtector,
    OptimizerConfig,
    generate_protected,
    init_latent,
    objective,
    objective_gradient,
    sigmoid_map,
)
from .hog import HogConfig, HogTransformer, Weighting, extract_hog
from .svm import LinearSVM

__version__ = "0.1.0"

__all__ = [
    "BorderPolicy",
    "ConvergenceReport",
    "GdmConfig",
    "GradientPreservingProtector",
    "HogConfig",
    "HogTransformer",
    "ImageIOError",
    "InsufficientData",
    "InvalidImage",
    "InvalidLatent",
    "LinearSVM",
    "OptimizerConfig",
    "ShapeMismatch",
    "Weighting",
    "central_differences",
    "extract_hog",
    "gdm",
    "gdm_residual",
    "generate_protected",
    "init_latent",
    "mean_abs_angle_error",
    "objective",
    "objective_gradient",
    "sigmoid_map",
]
