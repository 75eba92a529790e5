"""Generic local identifiability of matrix/tensor completion and CPD via characteristic rank."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BackendDisagreementError,
    CharRankError,
    ConfigError,
    InvalidSpecError,
    MaskParseError,
    NumericInputError,
    UnsupportedVariantError,
)
from .model import (  # noqa: E402
    DimensionSummary,
    ObservationPattern,
    ProblemSpec,
    Variant,
    cpd_tangent_dim,
    dimension_summary,
    manifold_dim,
    necessary_sample_bound,
)
from .jacobian import ParameterPoint, JacobianMatrix, apply_map, assemble  # noqa: E402
from .rank import RankResult, TolerancePolicy, finite_field_rank, jacobian_rank_mod_p, numeric_rank  # noqa: E402
from .analysis import (  # noqa: E402
    AnalysisOptions,
    CharRankEstimate,
    IdentifiabilityReport,
    characteristic_rank,
    check_solvability,
    check_wellposed,
)
