"""Reproducible experiments and the command-line front end."""

from .circulant import exp_circulant
from .config import ExperimentConfig
from .denoise import exp_temperature, exp_timevarying

__all__ = ["ExperimentConfig", "exp_circulant", "exp_temperature", "exp_timevarying"]
