"""Exact finite-alphabet perception-distortion analysis."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Alphabet,
    ConditionalKernel,
    DegradationModel,
    DiscreteDistribution,
    DistortionMeasure,
    Estimator,
    Grid,
    JointDistribution,
    conditional_cost,
    feature_map_distortion,
    gaussian_noise_channel,
    induced_joint,
    mean_distortion,
    output_distribution,
    posterior,
    square_error_measure,
    validate_distribution,
    zero_one_measure,
)
from .divergence import DivergenceKind, divergence, success_probability  # noqa: F401
