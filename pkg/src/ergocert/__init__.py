"""Finite-dimensional laboratory for maximal ergodic projection certificates."""

from .algebra import (
    Algebra,
    LOneElement,
    State,
    Weight,
    embed_l1,
    kosaki_norm,
    make_state,
    modular_flow,
    random_positive_l1,
    random_state,
    spatial_derivative,
)
from .dynamics import (
    ConditionReport,
    ExtendedMap,
    Pedigree,
    PositiveMapModel,
    adjoint_map,
    cesaro,
    cesaro_reps,
    cesaro_sequence,
    check_conditions,
    example_cond_expectation,
    example_tensor_markov,
    extend_l1,
    random_certified_map,
)
from .errors import (
    AmbiguousSpectralCut,
    ConditionsNotMet,
    DimensionMismatch,
    DomainError,
    ErgocertError,
    GenerationFailure,
    IllConditioned,
    InputError,
    InvalidExponent,
    NoStableLimit,
    NonConvergence,
    NotFaithful,
    NotNormalized,
    NotStochastic,
    NotSubInvariant,
    NotSubalgebra,
    NotTracial,
    NumericalBreakdown,
    ScenarioError,
)
from .linalg import (
    BlockMatrix,
    HermitianOperator,
    SpectralData,
    apply_spectral,
    compress,
    conjugate,
    eigh,
    is_psd,
    max_eigenvalue,
    min_eigenvalue,
    negative_part,
    op_norm,
    positive_part,
    schatten_norm,
    spectral_projection,
)
from .maximal import (
    Certificate,
    CommutativeReference,
    DEFAULT_OPTIONS,
    KPoint,
    LimitDiagnostics,
    MaximizerSolution,
    SolveOptions,
    commutative_oracle,
    diagonal_instance,
    dual_upper_bound,
    extract_projection,
    objective_g,
    pointwise_certificate,
    pre_weak_type_predicate,
    solve_maximizer,
    type_infinity_check,
    uniform_projection,
    weak_type_predicate,
    yeadon_tracial,
)
from .scenario import (
    Problem,
    Scenario,
    build_problem,
    dumps,
    export_csv,
    load_report,
    load_scenario,
    loads,
    run_scenario,
)
from .suite import SuiteInstance, dims_pool, run_suite, suite_instance

__version__ = "0.1.0"

__all__ = [
    "Algebra",
    "AmbiguousSpectralCut",
    "BlockMatrix",
    "Certificate",
    "CommutativeReference",
    "ConditionReport",
    "ConditionsNotMet",
    "DEFAULT_OPTIONS",
    "DimensionMismatch",
    "DomainError",
    "ErgocertError",
    "ExtendedMap",
    "GenerationFailure",
    "HermitianOperator",
    "IllConditioned",
    "InputError",
    "InvalidExponent",
    "KPoint",
    "LOneElement",
    "LimitDiagnostics",
    "MaximizerSolution",
    "NoStableLimit",
    "NonConvergence",
    "NotFaithful",
    "NotNormalized",
    "NotStochastic",
    "NotSubInvariant",
    "NotSubalgebra",
    "NotTracial",
    "NumericalBreakdown",
    "Pedigree",
    "PositiveMapModel",
    "Problem",
    "Scenario",
    "ScenarioError",
    "SolveOptions",
    "State",
    "SuiteInstance",
    "Weight",
    "adjoint_map",
    "apply_spectral",
    "build_problem",
    "cesaro",
    "cesaro_reps",
    "cesaro_sequence",
    "check_conditions",
    "commutative_oracle",
    "compress",
    "diagonal_instance",
    "dims_pool",
    "dual_upper_bound",
    "dumps",
    "embed_l1",
    "example_cond_expectation",
    "example_tensor_markov",
    "export_csv",
    "extend_l1",
    "extract_projection",
    "kosaki_norm",
    "load_report",
    "load_scenario",
    "loads",
    "make_state",
    "max_eigenvalue",
    "min_eigenvalue",
    "modular_flow",
    "objective_g",
    "op_norm",
    "pointwise_certificate",
    "positive_part",
    "pre_weak_type_predicate",
    "random_certified_map",
    "random_positive_l1",
    "random_state",
    "run_scenario",
    "run_suite",
    "solve_maximizer",
    "spatial_derivative",
    "spectral_projection",
    "SpectralData",
    "conjugate",
    "eigh",
    "is_psd",
    "negative_part",
    "suite_instance",
    "schatten_norm",
    "type_infinity_check",
    "uniform_projection",
    "weak_type_predicate",
    "yeadon_tracial",
]
