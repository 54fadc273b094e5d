"""Spectral analysis, simulation and likelihood inference for linear stochastic
delay equations near instability."""
from .errors import *  # noqa: F401,F403
from .measure import SignedMeasure, exp_moment, total_mass
from .spectral import (CharacteristicModel, Regime, Region, RootRecord, SpectralSummary, classify,
                       find_roots, residue_coeff, residue_coeffs)
from .sdde_sim import InitialSegment, SamplePath, delayed_functional, ito_integral, simulate_sdde
from .inference import (SufficientStats, delta_J, loglik_ratio, mle_alpha, mle_theta, scaling_r,
                        sufficient_stats)
from .limit_process import (ComplexWienerPath, LimitSystemPath, iterated_wiener, limit_delta_J,
                            limit_loglik_ratio, limit_mle_alpha, simulate_complex_wiener,
                            simulate_limit_system)
from .mc_harness import (EmpiricalSample, ExperimentConfig, ar1_baseline, ks_two_sample,
                         martingale_mean_check, mc_alpha_hat, mc_limit_alpha_hat)

__version__ = "0.1.0"
