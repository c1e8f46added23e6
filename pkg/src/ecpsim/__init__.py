"""Entanglement concentration of GHZ-class spin registers.

Three layers: a dense state-vector substrate (:mod:`ecpsim.qstate`), the
closed-form success-probability engine (:mod:`ecpsim.analytic`), and the
protocol executor with exhaustive enumeration and seeded Monte Carlo
(:mod:`ecpsim.protocol`).  The :mod:`ecpsim.cli` module fronts them.
"""

from .analytic import (
    ConcentrationCurve,
    CurveRow,
    GhzClassState,
    IterationLimitError,
    RoundPlan,
    Sign,
    asymptotic_limit,
    cumulative_success,
    curve,
    entanglement,
    residual_coeffs,
    round_plan,
)
from .protocol import (
    EnumerationResult,
    Mode,
    ProtocolConfig,
    ProtocolPreconditionError,
    ProtocolTrace,
    RoundRecord,
    SampleStats,
    Status,
    Variant,
    build_initial,
    enumerate_outcomes,
    ghz_target,
    run_round_cnot,
    run_round_pcg,
    sample,
    variant_equivalence,
)
from .qstate import (
    ChargeReading,
    Parity,
    ParityOutcome,
    ProjectionBranch,
    ProjectionOutcome,
    PureState,
    ZeroProbabilityBranchError,
    apply_cnot,
    apply_rotation,
    apply_x,
    apply_z,
    basis_state,
    factor_last_qubit,
    fidelity,
    make_state,
    measure_parity,
    measure_rotated,
    plus_state,
    tensor,
)

__version__ = "0.1.0"
