"""Sobolev-type norms on model manifolds via localized trivializations.

The package builds separated nets and cutoff systems (geodesic ball covers
and collar covers around an embedded curve) on a handful of preset model
manifolds, pulls functions back to flat charts, and evaluates Bessel,
Triebel, and Besov scales there.  Norm equivalence across trivialization
choices and trace/extension round trips are the main experiments; see the
``manisob`` console script for the packaged runs.
"""

from ._errors import (
    ManisobError,
    ConfigError,
    DomainError,
    IntegrationError,
    CoverageError,
    SpectralError,
    SymmetryError,
)
from ._bump import BumpProfile, DEFAULT_PROFILE, smoothstep
from .geometry import (
    Manifold,
    Submanifold,
    Chart,
    TransitionMap,
    make_manifold,
    make_submanifold,
    make_pair,
    presets,
    metric_at,
    christoffel,
    check_transition_consistency,
    mean_curvature_tensor,
)
from .flows import (
    GeodesicResult,
    integrate_geodesic,
    exp_map,
    parallel_transport,
    normal_frame,
)
from .atlas import (
    Net,
    TrivChart,
    Trivialization,
    build_separated_net,
    build_geodesic_trivialization,
    build_fermi_trivialization,
    load_trivialization,
    coverage_check,
    admissibility_report,
    bounded_geometry_report,
    make_corrupted_trivialization,
)
from .euclid import (
    GridFunction,
    lp_norm,
    bessel_norm,
    dyadic_decompose,
    triebel_norm,
    besov_norm,
    euclid_trace,
    euclid_extend,
    fourier_eval,
)
from .spaces import (
    ManifoldFunction,
    function_family,
    localized_norm,
    covariant_norm,
    trace,
    extend,
    equivalence_experiment,
    NormReport,
)
from .symmetry import (
    GroupAction,
    make_group_action,
    lift_trivialization,
    build_weight,
    weighted_periodic_norm,
)

__version__ = "0.1.0"

__all__ = [
    "ManisobError", "ConfigError", "DomainError", "IntegrationError",
    "CoverageError", "SpectralError", "SymmetryError",
    "BumpProfile", "DEFAULT_PROFILE", "smoothstep",
    "Manifold", "Submanifold", "Chart", "TransitionMap",
    "make_manifold", "make_submanifold", "make_pair", "presets",
    "metric_at", "christoffel", "check_transition_consistency",
    "mean_curvature_tensor",
    "GeodesicResult", "integrate_geodesic", "exp_map",
    "parallel_transport", "normal_frame",
    "Net", "TrivChart", "Trivialization", "build_separated_net",
    "build_geodesic_trivialization", "build_fermi_trivialization",
    "load_trivialization", "coverage_check", "admissibility_report",
    "bounded_geometry_report", "make_corrupted_trivialization",
    "GridFunction", "lp_norm", "bessel_norm", "dyadic_decompose",
    "triebel_norm", "besov_norm", "euclid_trace", "euclid_extend",
    "fourier_eval",
    "ManifoldFunction", "function_family", "localized_norm",
    "covariant_norm", "trace", "extend", "equivalence_experiment",
    "NormReport",
    "GroupAction", "make_group_action", "lift_trivialization",
    "build_weight", "weighted_periodic_norm",
    "__version__",
]
