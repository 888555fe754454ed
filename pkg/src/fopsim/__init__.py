"""Simulation toolkit for fiber-optic-plate + interference-filter frontends of
lensless fluorescence image sensors."""

__version__ = "0.1.0"

from .filter_model import FilterSpec, calibrate_n_eff, filter_transmittance, triple_band_filter
from .fop_tracer import (FopDesign, acceptance_angle, angular_transmittance, default_design,
                         fill_factor_hex, high_na_design, low_na_design, trace_ray)
from .frontend import FrontendConfig, Order, frontend_transmittance
from .imaging import OpticalGeometry, collection_efficiency, ctf, psf_angular, resolution_at
from .kernels import BACKEND
from .response import AngularResponse

__all__ = [
    "AngularResponse", "BACKEND", "FilterSpec", "FopDesign", "FrontendConfig",
    "OpticalGeometry", "Order", "acceptance_angle", "angular_transmittance",
    "calibrate_n_eff", "collection_efficiency", "ctf", "default_design", "fill_factor_hex",
    "filter_transmittance", "frontend_transmittance", "high_na_design", "low_na_design",
    "triple_band_filter", "psf_angular", "resolution_at", "trace_ray",
]
