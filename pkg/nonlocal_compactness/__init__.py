"""
Nonlocal compactness lab - numerical experiments on projected-difference
seminorms of vector fields.

This package discretizes the seminorm

    |u|^p_S = int int rho(y - x) |(u(y) - u(x)) . (y - x) / |y - x||^p
              / |y - x|^p dy dx

on boxes, balls and graph patches, and measures the quantities behind its
compact embedding into L^p:
- Kernel admissibility conditions (radial, cone and mass-ratio limits)
- Cone mollifiers and their smoothing gaps
- Near-boundary mass and Poincare-Korn constants
- Compactness probes of field and kernel sequences

Example:
    >>> from nonlocal_compactness import (
    ...     build_grid, box_domain, make_field, make_kernel, sample_field,
    ...     seminorm,
    ... )
    >>> grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=16)
    >>> u = sample_field(make_field({"name": "rotation"}, 2), grid)
    >>> kernel = make_kernel({"kind": "indicator", "d": 2, "p": 2})
    >>> seminorm(u, kernel).value_p < 1e-12
    True
"""

from .analysis import (
    VERDICTS,
    BoundaryMassReport,
    CompactnessReport,
    PoincareEstimate,
    PonceReport,
    boundary_mass_check,
    boundary_mass_curve,
    classify,
    collar_fraction_curve,
    collar_limit,
    compactness_probe,
    kernel_sequence_experiment,
    poincare_constant,
    ponce_1d_check,
    ponce_randomized_audit,
)
from .config import ExperimentConfig, load_config, parse_config
from .errors import (
    CapabilityError,
    ConfigError,
    DegenerateKernelError,
    DomainError,
    HypothesisViolatedError,
    KernelSingularityError,
    RankError,
    ResolutionError,
)
from .fields import (
    RigidMotion,
    SubspaceSpec,
    VectorField,
    make_field,
    make_sequence,
    project_out_rigid,
    read_field_csv,
    sample_field,
    write_field_csv,
)
from .geometry import (
    Cone,
    Domain,
    Grid,
    ball_domain,
    box_domain,
    build_grid,
    distance_to_boundary,
    graph_patch_domain,
    verify_graph_inclusion,
    verify_sector_lift,
)
from .kernels import (
    Kernel,
    KernelConditionReport,
    check_cone_condition,
    check_dirac_sequence,
    check_mass_ratio_limit,
    check_radial_monotone,
    eval_kernel,
    kernel_family,
    make_cone,
    make_kernel,
    rho_theta0,
)
from .operators import (
    MollifierMatrix,
    SeminormResult,
    cone_matrix,
    direction_functional_F,
    est_for_f_ratio,
    gap_chain_bound,
    mollify,
    projected_quotient,
    seminorm,
    smoothing_gap,
    symgrad_upper_bound_check,
    translation_modulus,
)

__version__ = "0.1.0"

__all__ = [
    "Kernel",
    "KernelConditionReport",
    "make_kernel",
    "make_cone",
    "kernel_family",
    "eval_kernel",
    "rho_theta0",
    "check_radial_monotone",
    "check_mass_ratio_limit",
    "check_cone_condition",
    "check_dirac_sequence",
    "Cone",
    "Domain",
    "Grid",
    "box_domain",
    "ball_domain",
    "graph_patch_domain",
    "build_grid",
    "distance_to_boundary",
    "verify_graph_inclusion",
    "verify_sector_lift",
    "VectorField",
    "RigidMotion",
    "SubspaceSpec",
    "make_field",
    "make_sequence",
    "sample_field",
    "read_field_csv",
    "write_field_csv",
    "project_out_rigid",
    "SeminormResult",
    "MollifierMatrix",
    "projected_quotient",
    "seminorm",
    "symgrad_upper_bound_check",
    "direction_functional_F",
    "translation_modulus",
    "cone_matrix",
    "mollify",
    "smoothing_gap",
    "gap_chain_bound",
    "est_for_f_ratio",
    "PonceReport",
    "BoundaryMassReport",
    "PoincareEstimate",
    "CompactnessReport",
    "VERDICTS",
    "ponce_1d_check",
    "ponce_randomized_audit",
    "boundary_mass_check",
    "boundary_mass_curve",
    "poincare_constant",
    "classify",
    "collar_fraction_curve",
    "collar_limit",
    "compactness_probe",
    "kernel_sequence_experiment",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "ConfigError",
    "CapabilityError",
    "KernelSingularityError",
    "DegenerateKernelError",
    "DomainError",
    "ResolutionError",
    "RankError",
    "HypothesisViolatedError",
]
