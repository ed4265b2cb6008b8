"""Mann-type iterative regularization for elliptic Cauchy problems.

The unknown Neumann trace on the inaccessible boundary is the fixed point of
an affine non-expansive operator built from two well-posed mixed problems.
The package provides the finite-difference machinery to evaluate that
operator, the segmenting Mann iteration with its stopping rules, an exact
diagonal model for rate studies, noise and smoothing tools and a CLI.
"""

from .bvp import (
    CoefficientField,
    Dirichlet,
    DiscreteSolution,
    MixedBvpSpec,
    MixedSolver,
    Neumann,
    assemble_stiffness,
    conormal_flux,
    dirichlet_trace,
    energy_inner_product,
    solve_mixed,
)
from .errors import (
    BoundViolated,
    CauchyMannError,
    ConfigError,
    GridMismatch,
    InequalityViolated,
    InvalidDomain,
    ModeMismatch,
    NoConvergence,
    SingularSystem,
    SolverDivergence,
    TooCoarse,
    UnknownSegment,
)
from .fixed_point import (
    CauchyData,
    FixedPointOperator,
    StarMetric,
    affine_term,
    apply_Ld,
    apply_Ln,
    apply_T,
    dominant_eigenvalue,
    linear_part,
    star_inner,
    star_norm,
)
from .geometry import (
    Annulus,
    BoundaryFunction,
    Grid,
    Rectangle,
    Segment,
    boundary_l2_norm,
    boundary_modes,
    boundary_sobolev_norm,
    build_grid,
    from_boundary_modes,
    sample_boundary,
)
from .iteration import (
    Discrepancy,
    IterationConfig,
    IterationRecord,
    MaxIterOnly,
    SegmentingSchedule,
    SuccessiveDiff,
    discrepancy_index,
    discrepancy_stop,
    mann_mazya_run,
    regularized_reconstruct,
    restart_run,
    segmenting_matrix,
)
from .noise import (
    NoiseSpec,
    SmoothingOperator,
    perturb_cauchy_data,
    perturbed_affine_term,
    smooth,
    smooth_cauchy_data,
)
from .spectral import (
    FourierTrace,
    SpectralOperator,
    appendix_bounds_check,
    closed_form_iterate,
    run_rate_experiment,
    semi_convergence,
    sobolev_interpretation_check,
    source_element,
    spectral_apply_T,
    stopping_index,
    stopping_law,
)

__all__ = [
    "CoefficientField",
    "Dirichlet",
    "DiscreteSolution",
    "MixedBvpSpec",
    "MixedSolver",
    "Neumann",
    "assemble_stiffness",
    "conormal_flux",
    "dirichlet_trace",
    "energy_inner_product",
    "solve_mixed",
    "BoundViolated",
    "CauchyMannError",
    "ConfigError",
    "GridMismatch",
    "InequalityViolated",
    "InvalidDomain",
    "ModeMismatch",
    "NoConvergence",
    "SingularSystem",
    "SolverDivergence",
    "TooCoarse",
    "UnknownSegment",
    "CauchyData",
    "FixedPointOperator",
    "StarMetric",
    "affine_term",
    "apply_Ld",
    "apply_Ln",
    "apply_T",
    "dominant_eigenvalue",
    "linear_part",
    "star_inner",
    "star_norm",
    "Annulus",
    "BoundaryFunction",
    "Grid",
    "Rectangle",
    "Segment",
    "boundary_l2_norm",
    "boundary_modes",
    "boundary_sobolev_norm",
    "build_grid",
    "from_boundary_modes",
    "sample_boundary",
    "Discrepancy",
    "IterationConfig",
    "IterationRecord",
    "MaxIterOnly",
    "SegmentingSchedule",
    "SuccessiveDiff",
    "discrepancy_index",
    "discrepancy_stop",
    "mann_mazya_run",
    "regularized_reconstruct",
    "restart_run",
    "segmenting_matrix",
    "NoiseSpec",
    "SmoothingOperator",
    "perturb_cauchy_data",
    "perturbed_affine_term",
    "smooth",
    "smooth_cauchy_data",
    "FourierTrace",
    "SpectralOperator",
    "appendix_bounds_check",
    "closed_form_iterate",
    "run_rate_experiment",
    "semi_convergence",
    "sobolev_interpretation_check",
    "source_element",
    "spectral_apply_T",
    "stopping_index",
    "stopping_law",
]

__version__ = "0.1.0"
