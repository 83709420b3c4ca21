"""Dissipative surface quasi-geostrophic equation on the torus.

Pseudo-spectral fields, Littlewood-Paley analysis, an ETD solver with
successive approximations, and diagnostics for the critical-space
regularity criterion.
"""

from .errors import (
    BlowupDetected,
    CheckpointError,
    ConfigurationError,
    DomainError,
    InsufficientDataError,
    PreconditionError,
    SQGError,
    SymmetryError,
)
from .spectral import GridSpec, SpectralField, fractional_laplacian, lp_norm, nonlinear_term, riesz_velocity
from .trajectory import Trajectory
from .littlewood_paley import (
    BesovParams,
    DyadicDecomposition,
    MixedNormParams,
    Mollifier,
    besov_norm,
    chemin_norm,
    dyadic_block,
)
from .diagnostics import CriterionParams, blowup_proxy_fit, critical_alpha, lambda_functional, regularity_monitor
from .solver import (
    SolverConfig,
    existence_time_estimate,
    make_initial_data,
    picard_iterate,
    run_simulation,
    step_etd,
)
from .lemmas import (
    LemmaReport,
    scaling_transform,
    verify_bernstein,
    verify_commutator_estimate,
    verify_generalized_bernstein,
    verify_partition,
    verify_product_estimate,
)

__version__ = "0.1.0"
