"""gavg: recursive Haar averaging on finite groupoids and circle-action connections.

The library turns pseudo-representations of finite groupoids into genuine
representations by iterated fiber averaging, certifies the near-representation
condition that guarantees doubly exponential convergence, and carries the same
machinery to connections on the circle-action groupoid over the plane.
"""

from .averaging import (
    EPS_LIMIT,
    NEAR_REP_COEFF,
    ConvergenceTrace,
    EstimateReport,
    NearRepCertificate,
    average,
    certify_near_representation,
    iterate,
    monitor_estimates,
    recursion_envelope,
    segment_scan,
)
from .circle import (
    CircleActionGroupoid,
    ConnectionTrace,
    FieldTerm,
    FourierPolyField,
    SampledField,
    average_connection,
    certify_near_effectiveness,
    division_cocycle,
    effect,
    effect_commutation_check,
    iterate_connection,
)
from .circle import multiplicativity_defect as connection_defect
from .errors import GavgError, HypothesisViolation, InvalidInput
from .groupoid import (
    DivisiblePair,
    FiniteGroupoid,
    InvariantSubset,
    ValidationReport,
    action_groupoid,
    disjoint_union,
    divide,
    full_restriction,
    group_bundle,
    invariant_subsets,
    one_object_group,
    orbits,
    pair_groupoid,
    validate,
)
from .haar import HaarSystem, integrate_fiber, random_haar, uniform_haar, validate_haar
from .pseudorep import (
    FiberBundle,
    FiberMetric,
    PseudoRep,
    identity_metric,
    is_invertible,
    is_representation,
    is_unital,
    mult_defect,
    perturbed_representation,
    restrict_rep,
    sup_norm,
    unital_deviation,
)

__version__ = "0.1.0"

__all__ = [
    "EPS_LIMIT", "NEAR_REP_COEFF", "ConvergenceTrace", "EstimateReport",
    "NearRepCertificate", "average", "certify_near_representation", "iterate",
    "monitor_estimates", "recursion_envelope", "segment_scan",
    "CircleActionGroupoid", "ConnectionTrace", "FieldTerm", "FourierPolyField",
    "SampledField", "average_connection", "certify_near_effectiveness",
    "division_cocycle", "effect", "effect_commutation_check", "iterate_connection",
    "connection_defect",
    "GavgError", "HypothesisViolation", "InvalidInput",
    "DivisiblePair", "FiniteGroupoid", "InvariantSubset", "ValidationReport",
    "action_groupoid", "disjoint_union", "divide", "full_restriction", "group_bundle",
    "invariant_subsets", "one_object_group", "orbits", "pair_groupoid", "validate",
    "HaarSystem", "integrate_fiber", "random_haar", "uniform_haar", "validate_haar",
    "FiberBundle", "FiberMetric", "PseudoRep", "identity_metric", "is_invertible",
    "is_representation", "is_unital", "mult_defect", "perturbed_representation",
    "restrict_rep", "sup_norm", "unital_deviation",
]
