"""Equilibrium fluctuations of one-dimensional hard rods.

Poisson rod ensembles, exact tagged-rod dynamics through the crossing flux,
fluctuation fields under Euler and diffusive scaling, and the statistical
machinery used to compare them with their Gaussian limits.
"""
from .dynamics import (BufferError, FluxQuery, Trajectories, evolve_tagged, flux_batch, flux_mean_exact,
                       flux_naive, flux_variance_exact)
from .ensemble import (Configuration, DilatedConfiguration, FieldSample, SupportError, dilate,
                       field_estimate, mass, sample, with_points)
from .fields import (diffusive_field, diffusive_variance_oracle, euler_field, rigid_translation_stats,
                     transport_generator, transported)
from .measures import (Atom, Component, DomainError, Exponential, Gaussian, MacroParams, QuadratureError,
                       Uniform, VelocityLengthMeasure, diffusivity, gram_matrix, macro_params, mean_functional,
                       moment, project_P, theoretical_covariance, transported_covariance, v_eff, v_eff_integral)
from .stats import ConvergenceFit, ReplicaStats, Verdict, fit_rate, run_replicas, test_against
from .testfunctions import LinearCombination, TestFunction, cosine_packet, gaussian_bump, poly_bump

__version__ = "0.1.0"

__all__ = [
    "Atom", "BufferError", "Component", "Configuration", "ConvergenceFit", "DilatedConfiguration",
    "DomainError", "Exponential", "FieldSample", "FluxQuery", "Gaussian", "LinearCombination", "MacroParams",
    "QuadratureError", "ReplicaStats", "SupportError", "TestFunction", "Trajectories", "Uniform",
    "VelocityLengthMeasure", "Verdict", "cosine_packet", "diffusive_field", "diffusive_variance_oracle",
    "diffusivity", "dilate", "euler_field", "evolve_tagged", "field_estimate", "fit_rate", "flux_batch",
    "flux_mean_exact", "flux_naive", "flux_variance_exact", "gaussian_bump", "gram_matrix", "macro_params",
    "mass", "mean_functional", "moment", "poly_bump", "project_P", "rigid_translation_stats", "run_replicas",
    "sample", "test_against", "theoretical_covariance", "transport_generator", "transported",
    "transported_covariance", "v_eff", "v_eff_integral", "with_points",
]
