"""Exact simulation of max-stable fields by record breaking."""

from .fields import (
    FieldVector,
    GaussianFieldModel,
    build_bm_sampler,
    build_brownian_sheet_sampler,
    build_dense_sampler,
    build_fbm_sampler,
)
from .rng import RandomStream

__version__ = "0.1.0"

__all__ = [
    "FieldVector",
    "GaussianFieldModel",
    "RandomStream",
    "build_bm_sampler",
    "build_brownian_sheet_sampler",
    "build_dense_sampler",
    "build_fbm_sampler",
]
