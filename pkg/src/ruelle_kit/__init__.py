"""Transfer operators, critical-orbit series and instability certificates for rational maps."""

__version__ = "0.1.0"

from .errors import (
    ConditioningError,
    ConditioningWarning,
    CriticalOrbitError,
    DegenerateKernelError,
    DivergenceError,
    InvalidMapError,
    NonSimpleCriticalPointError,
    NotNormalizedError,
    PoleError,
    PreconditionError,
    RootFindingError,
    RuelleKitError,
)
from .kernels import GAMMA, TAU, Kernel, KernelCombination, l1_norm_estimate, kernel_eval
from .rational_map import (
    ComplexPolynomial,
    CriticalData,
    MobiusTransform,
    RationalMap,
    critical_data,
    normalize_to_standard,
    orbit_cocycle,
    preimages,
)
from .ruelle import (
    apply_pointwise,
    apply_to_combination,
    apply_to_kernel,
    beltrami_apply,
    iterate_combination,
    pushforward,
)
from .series import (
    SeriesQuery,
    A_at_critical,
    ab_constants,
    cauchy_product,
    forward_series,
    mobius_transform_identity,
    modified_series_eval,
    rs_truncated,
    summability_report,
    verify_cor9,
    verify_prop6,
)
from .stability import (
    build_linear_system,
    fixed_point_identity_residual,
    instability_certificate,
    line_field_residual,
    relation_coefficients,
    stability_report,
    triviality_test,
)

__all__ = [
    "ConditioningError",
    "ConditioningWarning",
    "CriticalOrbitError",
    "DegenerateKernelError",
    "DivergenceError",
    "InvalidMapError",
    "NonSimpleCriticalPointError",
    "NotNormalizedError",
    "PoleError",
    "PreconditionError",
    "RootFindingError",
    "RuelleKitError",
    "GAMMA",
    "TAU",
    "Kernel",
    "KernelCombination",
    "l1_norm_estimate",
    "kernel_eval",
    "ComplexPolynomial",
    "CriticalData",
    "MobiusTransform",
    "RationalMap",
    "critical_data",
    "normalize_to_standard",
    "orbit_cocycle",
    "preimages",
    "apply_pointwise",
    "apply_to_combination",
    "apply_to_kernel",
    "beltrami_apply",
    "iterate_combination",
    "pushforward",
    "SeriesQuery",
    "A_at_critical",
    "ab_constants",
    "cauchy_product",
    "forward_series",
    "mobius_transform_identity",
    "modified_series_eval",
    "rs_truncated",
    "summability_report",
    "verify_cor9",
    "verify_prop6",
    "build_linear_system",
    "fixed_point_identity_residual",
    "instability_certificate",
    "line_field_residual",
    "relation_coefficients",
    "stability_report",
    "triviality_test",
]
