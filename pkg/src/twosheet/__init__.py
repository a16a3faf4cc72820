"""Causal structure of two-sheeted space-times.

Library + CLI for deciding causal relations between localized mixed states on a
two-sheeted geometry: cone membership certification for candidate causal elements,
weighted proper-time maximization over causal curves, explicit separating witnesses,
and an independent Monte-Carlo cross-check of every decision.
"""

from .causality import (
    CausalDecision,
    ConeSurface,
    decide,
    diagonal_mass_decide,
    fluctuate,
    future_cone,
    internal_gap,
    required_proper_time,
)
from .clifford import SpinRepresentation, make_representation, verify_representation
from .cone import (
    CausalElementPair,
    CertificateResult,
    ConeMembership,
    ExpressionField,
    FunctionField,
    ObstructionMatrix,
    PsdResult,
    SaturationResult,
    SpinorSolution,
    WitnessPair,
    certification_grid,
    charpoly_certificate,
    is_causal_element,
    is_psd,
    obstruction_matrices,
    obstruction_matrix,
    ordering_gap,
    pointwise_min_eigenvalues,
    saturation_vector,
    solve_spinor_system,
    verify_vector_noop,
    witness_certificate_2d,
    witness_certificate_4d,
    witness_element,
    witness_matrix_at,
    witness_tube_grid,
)
from .expressions import Expression, ExpressionError, parse_expression
from .geometry import (
    CausalCurve,
    DomainError,
    InvalidCurveError,
    MixedState,
    NotRelatedError,
    SpacetimeModel,
    cumulative_weighted_length,
    is_causally_related,
    max_weighted_length,
    straight_curve,
    validate_curve,
    weighted_length,
)
from .modelfile import ModelFileError, dump, dumps, load, loads
from .oracle import OracleVerdict, SampledElement, mc_check, sample_causal_elements

__version__ = "0.1.0"

__all__ = [
    "SpinRepresentation",
    "make_representation",
    "verify_representation",
    "Expression",
    "ExpressionError",
    "parse_expression",
    "SpacetimeModel",
    "CausalCurve",
    "MixedState",
    "DomainError",
    "InvalidCurveError",
    "NotRelatedError",
    "weighted_length",
    "cumulative_weighted_length",
    "is_causally_related",
    "max_weighted_length",
    "straight_curve",
    "validate_curve",
    "CausalElementPair",
    "ExpressionField",
    "FunctionField",
    "ObstructionMatrix",
    "PsdResult",
    "CertificateResult",
    "ConeMembership",
    "SpinorSolution",
    "SaturationResult",
    "WitnessPair",
    "certification_grid",
    "charpoly_certificate",
    "is_causal_element",
    "is_psd",
    "obstruction_matrix",
    "obstruction_matrices",
    "ordering_gap",
    "pointwise_min_eigenvalues",
    "saturation_vector",
    "solve_spinor_system",
    "verify_vector_noop",
    "witness_certificate_2d",
    "witness_certificate_4d",
    "witness_element",
    "witness_matrix_at",
    "witness_tube_grid",
    "CausalDecision",
    "ConeSurface",
    "decide",
    "diagonal_mass_decide",
    "fluctuate",
    "future_cone",
    "internal_gap",
    "required_proper_time",
    "OracleVerdict",
    "SampledElement",
    "mc_check",
    "sample_causal_elements",
    "ModelFileError",
    "load",
    "loads",
    "dump",
    "dumps",
    "__version__",
]
