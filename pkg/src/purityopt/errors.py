"""Exception types shared across the package.

Everything raised on purpose derives from PurityOptError so callers can
catch package failures without also swallowing numpy's.
"""


class PurityOptError(Exception):
    """Base class for all purityopt errors."""


class DimensionError(PurityOptError, ValueError):
    """Invalid or mismatched dimensions (zero-dim spaces, ragged shapes)."""


class ParameterError(PurityOptError, ValueError):
    """Parameter outside its admissible range, or a size guard tripped."""


class SchemaError(PurityOptError, ValueError):
    """Serialized channel/encoder file violates the JSON schema."""


class ValidationError(PurityOptError, ValueError):
    """An object fails its defining invariant (non-TP Kraus set, non-isometry,
    non-Hermitian input where Hermitian is required)."""


class NotRankOneError(PurityOptError):
    """A Choi matrix expected to be rank one has numerical rank > 1."""


class MalformedChoiError(PurityOptError):
    """Rank-one Choi matrix whose leading eigenvalue is inconsistent with a
    trace-preserving map."""


class PreconditionError(PurityOptError):
    """A numerical precondition does not hold (shift not positive definite,
    regularized matrix singular, degenerate spectrum where a gap is needed)."""


class InconsistencyError(PurityOptError):
    """Two supposedly equivalent computations disagree beyond tolerance."""


class InternalConsistencyError(InconsistencyError):
    """A certified optimization result contradicts the independent oracle."""
