"""Finite boson-bath dissipation workbench: closed-form dynamics checked against exact oracles."""

from .model import (BathMode, DerivedRates, InvalidSpecError, ModelParams, NonExponentialDecayWarning,
                    OutOfBandWarning, SpectralModel, build_bath, golden_rule_rates, rate_fit_from_exact,
                    recurrence_time)
from .analytic import CoefficientSet, coefficient_set_analytic, langevin_residual
from .exact import build_matrix, compare_engines, exact_coefficients, propagator
from .coherent import CoherentAmplitudes, evolve_amplitudes, factorization_metrics
from .heff import BogoliubovPath, CKMapping, HeffCoeffs, ck_path, heff_coefficients, make_path

__version__ = "0.1.0"
