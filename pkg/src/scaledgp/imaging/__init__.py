from .operators import BlurOperator, DenseBlurOperator, gaussian_psf
from .phantoms import ellipse_phantom, simulate_problem
from .poisson import (
    CompositeObjective,
    DomainError,
    HSRegularizer,
    PoissonModel,
    SplitGradientScaling,
    build_scaling,
    hs_gradient,
    hs_value,
    kl_gradient,
    kl_value,
    split_gradient,
)

__all__ = [
    "BlurOperator",
    "CompositeObjective",
    "DenseBlurOperator",
    "DomainError",
    "HSRegularizer",
    "PoissonModel",
    "SplitGradientScaling",
    "build_scaling",
    "ellipse_phantom",
    "gaussian_psf",
    "hs_gradient",
    "hs_value",
    "kl_gradient",
    "kl_value",
    "simulate_problem",
    "split_gradient",
]
