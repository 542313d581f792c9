"""Spectra of weighted Newton operators on self-shrinkers and universal eigenvalue bounds."""
from .discretization import DiscreteSpace, TrialFunction, build_space, coordinate_functions
from .errors import (
    ConfigError,
    DegenerateMetric,
    DimensionMismatch,
    EmptyBoundary,
    InsufficientSpectrum,
    MassNotSPD,
    NotPositiveDefinite,
    OddOrderRequested,
    OracleSpectrum,
    RankCollapse,
    SingularMass,
    SpectralLabError,
    UnsupportedDimension,
)
from .geometry import (
    ParametricGeometry,
    ambient_stats,
    analytic_sphere_stats,
    circle,
    curvature_package,
    cylinder_segment,
    evaluate_chart,
    flat_disk,
    flat_interval,
    flat_rectangle,
    shrinker_residual,
    sphere,
    spherical_cap,
)
from .inequalities import (
    InequalityReport,
    audit_identities,
    build_orthogonalized_trials,
    check_gap_bounds,
    check_general,
    check_shrinker_theorems,
    trial_moments,
)
from .operator import WeightedOperatorPair, apply_operator, assemble_pair
from .spectrum import Spectrum, analytic_sphere_spectrum, group_multiplicities, solve_spectrum

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
