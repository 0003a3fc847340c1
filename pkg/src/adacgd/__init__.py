"""Communication-efficient distributed gradient descent with adaptive compression."""

from .core import SeededRng, ThreePCConstants, combine_constants, squared_distance
from .compressors import (
    Ada3PC,
    AdaCGD,
    CLAG,
    CandidateErrorTrigger,
    CompressionOutcome,
    ContractorSpec,
    EF21,
    IdentityMaster,
    LAG,
    Payload,
    SkipTrigger,
    ThreePCSpec,
    adacgd_as_chain,
    adacgd_compress,
    ada3pc_compress,
    apply_contractor,
    certified_constants,
    clag_compress,
    compress,
    ef21_compress,
    estimate_constants,
    lag_compress,
    reconstruct,
)
from .problems import (
    Problem,
    Shard,
    SmoothnessConstants,
    check_gradient,
    client_gradient,
    client_loss,
    full_gradient,
    loss,
    smoothness,
)
from .datasets import (
    Example,
    LibsvmParseError,
    Partition,
    SyntheticSpec,
    build_problem,
    format_example,
    make_synthetic,
    parse_libsvm,
    partition,
)
from .engine import (
    DivergenceError,
    EngineState,
    IterationRecord,
    RunSpec,
    StepsizeRule,
    StopRule,
    init,
    lyapunov,
    payload_bits,
    run,
    step,
    theoretical_stepsize,
)
from .experiments import (
    RunConfig,
    load_config,
    load_or_solve_reference,
    read_trace,
    run_experiment,
    solve_reference,
    write_trace,
)

__version__ = "0.1.0"
