"""Needlet random fields on the sphere: excursion lengths, chaos variances and CLT checks."""
from __future__ import annotations

from .chaos import (
    alpha_coeff,
    beta_coeff,
    chaos2_variance,
    chaos2_variance_limit,
    chaosq_variance,
    coeff_tail_bound,
    diagram_constants,
    hermite_eval,
)
from .covariance import CovarianceProfile, localization_fit, needlet_kernel, rho_profile
from .excursion import boundary_length, expected_length
from .harness import ExperimentConfig, load_config, run_clt, run_variance_study
from .legendre import assoc_legendre, hilb_approx, legendre_eval, product_integral
from .reports import emit_reports
from .simulate import SphereGrid, default_grid, field_covariance_selftest, sample_field
from .spectral import PowerSpectrum, asymptotic_constants, band_constants, build_window

__version__ = "0.1.0"
