"""Encoder design for decohering channels.

Given a noisy channel on an n-dimensional space, the package searches for an
n x r isometry (the encoder) maximizing the worst-case output purity over all
pure inputs of the r-dimensional codespace. The search compiles the purity
constraint into a linear matrix inequality through a sum-of-squares argument
and drives a log-det rank heuristic, one semidefinite program per iteration.
An independent grid oracle checks every produced encoder.
"""

from .channels import (
    ChoiMatrix,
    KrausChannel,
    PurePreservingReport,
    SuperopMatrix,
    apply_channel,
    compute_omega,
    extract_kraus_rank_one,
    hermitian_real_embed,
    identity_vector,
    is_pure_preserving,
    kraus_to_superop,
    purity,
    rearrange,
    rearrange_inv,
    superop_compose,
    unvectorize_state,
    vectorize_state,
)
from .errors import (
    DimensionError,
    InconsistencyError,
    InternalConsistencyError,
    MalformedChoiError,
    NotRankOneError,
    ParameterError,
    PreconditionError,
    PurityOptError,
    SchemaError,
    ValidationError,
)
from .zoo import (
    EncoderSpec,
    builtin_channel,
    builtin_encoder,
    load_channel,
    load_encoder,
    make_amplitude_damping,
    make_bit_flip,
    save_channel,
    save_encoder,
    tensor_power,
)

__version__ = "0.1.0"

from .logdet import (  # noqa: E402  (needs __version__ for the CLI)
    GAMMA_DEFAULT,
    GAMMA_PRESETS,
    HeuristicConfig,
    IterationRecord,
    OptimizationResult,
    run,
    run_restarts,
)
from .oracle import (  # noqa: E402
    INPUT_MODELS,
    OracleConfig,
    OracleResult,
    codespace_omega,
    worst_case_purity,
)
from .sdp import (  # noqa: E402
    SdpProblem,
    SdpSolution,
    fix_variables,
    read_sdpa,
    solve_sdp,
    write_sdpa,
)
from .soslmi import (  # noqa: E402
    MODES,
    DecisionLayout,
    LinearMatrixExpr,
    SosContext,
    assemble_problem,
    build_purity_lmi,
    choose_k,
    gram_kernel_basis,
    make_sos_context,
    monomial_map,
)
