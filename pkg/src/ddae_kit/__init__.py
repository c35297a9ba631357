"""Toolkit for linear delay differential-algebraic equations.

Decomposes the pencil (E, A), classifies discontinuity propagation,
checks history admissibility and splicing, solves by the method of steps
with a derivative-jump ledger, reformulates hidden delays, and assesses
exponential stability via the spectral abscissa.
"""

from .errors import (
    CollocationSingular,
    DdaeKitError,
    DecompositionFailure,
    DimensionMismatch,
    InconsistentRestart,
    MalformedProblem,
    NotAdmissible,
    NotSmoothingType,
    OutOfDomain,
    SingularPencil,
)
from .pencil import (
    MatrixPencil,
    QuasiWeierstrassForm,
    RankPolicy,
    RegularityVerdict,
    check_regularity,
    compute_qwf,
    nilpotency_index,
    wong_sequences,
)
from .piecewise import PiecewisePolynomial
from .model import (
    DdaeSystem,
    SplitCoefficients,
    build_split,
    fast_subsystem_solution,
    split_matrices,
    underlying_dde_coeffs,
    underlying_ode_rhs,
)
from .classify import (
    BackwardSystem,
    ClassificationReport,
    LegacyClass,
    LegacyKind,
    PropagationClass,
    PropagationKind,
    build_backward_system,
    classify,
    classify_legacy,
    classify_matrices,
    classify_propagation,
    cross_check,
)
from .history import (
    Index3Report,
    SplicingReport,
    check_admissible,
    check_index3_uniqueness,
    check_second_splicing,
    check_smoothness_condition,
    construct_probe_history,
    splicing_report,
)
from .solver import (
    JumpLedger,
    LedgerEntry,
    SegmentSolution,
    SolverConfig,
    Trajectory,
    detect_jumps,
    method_of_steps,
    solve_hidden_delay_dde,
    solve_segment,
)
from .reform import (
    HiddenDelayExpansion,
    embed_neutral_dde,
    embed_pure_delay,
    expand_hidden_delays,
)
from .stability import (
    SearchBox,
    StabilityReport,
    StabilityVerdict,
    assess_exponential_stability,
    char_function,
    spectral_abscissa,
)
from .problemfile import (
    dump_problem,
    load_problem,
    problem_from_dict,
    problem_to_dict,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
