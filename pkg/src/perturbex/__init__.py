"""Certified perturbation expansions for smooth strongly convex minimizers.

Given a function with a known minimizer and a smoothness certificate, the
expansion operators predict how the minimizer and minimal value move under
a linear tilt, a ridge penalty, or a smooth penalty, and attach closed-form
radii and value brackets that a Newton solve can be checked against.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .diagnostics import CheckResult, DiagnosticsRecord
from .errors import (
    BadLabels,
    DimensionMismatch,
    HessianNotPd,
    LineSearchFailed,
    MaxIterExceeded,
    MissingFourthDerivative,
    MissingThirdDerivative,
    NotAtMinimum,
    NotPositiveDefinite,
    NotPsd,
    NotSymmetric,
    PerturbexError,
    PreconditionViolated,
)
from .expand import (
    BoundSet,
    ComparisonReport,
    ExpansionReport,
    Gate,
    RadiusBound,
    ValueBound,
    compare_with_solution,
    concentration_certificate,
    cubic_bound_check,
    distance_to_optimum,
    exact_quadratic_expansion,
    expansion_for_order,
    fourth_order_expansion,
    second_order_bounds,
    skewness_correction,
    third_order_bounds,
    verify_expansion,
)
from .harness import ExperimentConfig
from .linalg import (
    SpdOperator,
    apply_power,
    as_vector,
    kappa_between,
    spd_from_dense,
    spd_power_operator,
    weighted_norm,
)
from .oracle import (
    CustomOracle,
    LinearPerturbation,
    LogisticOracle,
    LogSumExpOracle,
    Oracle,
    PerturbationSpec,
    PsdQuadraticOracle,
    QuadraticOracle,
    QuadraticPerturbation,
    ScaledOracle,
    SmoothPerturbation,
    SumOracle,
    apply_perturbation,
    fd_probe,
    linearly_perturb,
    make_logistic,
    make_logsumexp,
    make_quadratic,
    quadratically_penalize,
    smoothly_penalize,
)
from .penalty import (
    PenaltyBiasReport,
    ridge_bias_bounds,
    ridge_bias_exact_quadratic,
    ridge_bias_fourth_order,
    smooth_penalty_bias,
    verify_penalty_bias,
)
from .smoothness import (
    SmoothnessCertificate,
    declared_certificate,
    estimate_certificate,
    estimate_omega,
    estimate_tau3,
    estimate_tau4,
    taylor_diagnostics,
)
from .solver import SolveResult, newton_minimize
from .zoo import ZooProblem, oracle_from_descriptor, random_spd

__all__ = [
    "__version__",
    # errors
    "PerturbexError",
    "DimensionMismatch",
    "NotSymmetric",
    "NotPositiveDefinite",
    "NotPsd",
    "BadLabels",
    "MissingThirdDerivative",
    "MissingFourthDerivative",
    "NotAtMinimum",
    "HessianNotPd",
    "MaxIterExceeded",
    "LineSearchFailed",
    "PreconditionViolated",
    # linear algebra
    "SpdOperator",
    "as_vector",
    "spd_from_dense",
    "spd_power_operator",
    "apply_power",
    "weighted_norm",
    "kappa_between",
    # oracles and perturbations
    "Oracle",
    "QuadraticOracle",
    "PsdQuadraticOracle",
    "LogisticOracle",
    "LogSumExpOracle",
    "CustomOracle",
    "SumOracle",
    "ScaledOracle",
    "LinearPerturbation",
    "QuadraticPerturbation",
    "SmoothPerturbation",
    "PerturbationSpec",
    "linearly_perturb",
    "quadratically_penalize",
    "smoothly_penalize",
    "apply_perturbation",
    "make_quadratic",
    "make_logistic",
    "make_logsumexp",
    "fd_probe",
    # problem zoo
    "ZooProblem",
    "oracle_from_descriptor",
    "random_spd",
    # solver
    "SolveResult",
    "newton_minimize",
    # smoothness certificates
    "SmoothnessCertificate",
    "estimate_omega",
    "estimate_tau3",
    "estimate_tau4",
    "estimate_certificate",
    "declared_certificate",
    "taylor_diagnostics",
    # diagnostics containers
    "CheckResult",
    "DiagnosticsRecord",
    # expansions
    "Gate",
    "RadiusBound",
    "ValueBound",
    "BoundSet",
    "ExpansionReport",
    "ComparisonReport",
    "exact_quadratic_expansion",
    "concentration_certificate",
    "second_order_bounds",
    "third_order_bounds",
    "skewness_correction",
    "fourth_order_expansion",
    "expansion_for_order",
    "distance_to_optimum",
    "cubic_bound_check",
    "compare_with_solution",
    "verify_expansion",
    # penalty bias
    "PenaltyBiasReport",
    "ridge_bias_exact_quadratic",
    "ridge_bias_bounds",
    "ridge_bias_fourth_order",
    "smooth_penalty_bias",
    "verify_penalty_bias",
    # harness
    "ExperimentConfig",
]
