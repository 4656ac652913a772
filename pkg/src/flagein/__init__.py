"""Numerical search and isometry classification of invariant Einstein
metrics on the full flag manifolds SU(n+1)/T^n."""

from ._backend import available_backends, get_kernel
from .classify import (
    ClassificationError,
    IsometryClass,
    apply_permutation,
    canonical_form,
    group_classes,
    kaehler_einstein_metrics,
    match_kaehler,
)
from .curvature import (
    CurvatureSummary,
    DomainError,
    Metric,
    curvature_summary,
    residual_jacobian,
    residual_system,
    ricci_component,
)
from .flag_model import FlagManifold, positive_roots, structure_constant
from .io_persist import SolutionRecord, read_solutions, render_table, write_solutions
from .solver import RawSolution, SolverConfig, filter_round_dedup, multistart, sample_initial, solve_one

BACKEND = get_kernel().BACKEND

__version__ = "0.1.0"
