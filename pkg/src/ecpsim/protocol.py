"""Protocol executor on the dense register.

Runs the full concentration round -- ancilla attach, parity check or CNOT,
bit-flip correction, rotated projection, sign restoration -- on the
state-vector substrate, either as an exhaustive expansion of every outcome
branch (the brute-force probability tree) or as seeded Monte Carlo trials.

Alice's protocol qubit is register qubit 0; the ancilla occupies one extra
slot at the end of the register, so an N-party run never needs more than
N+1 qubits.  Projection angles are always taken from
:func:`ecpsim.analytic.round_plan`, never re-derived here, so the two
engines cannot drift apart on conventions.

Determinism contract for sampling: trial ``i`` owns a fixed block of
counter values of the Philox stream keyed by the seed and reads its
uniforms from there, in round order (two draws per round for the
parity-check variant: parity then projection; one for the CNOT variant).
Outcomes are therefore a pure function of (seed, trial index), independent
of execution order or batching.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .analytic import GhzClassState, round_plan
from .qstate import (
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

GHZ_SUPPORT_TOL = 1e-10


class ProtocolPreconditionError(ValueError):
    """The input register is not a GHZ-class state on its support."""


class Variant(enum.Enum):
    PCG = "pcg"
    CNOT = "cnot"


class Mode(enum.Enum):
    ENUMERATE = "enumerate"
    SAMPLE = "sample"


class Status(enum.Enum):
    SUCCESS = "success"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class ProtocolConfig:
    alpha: float
    num_parties: int = 2
    max_rounds: int = 1
    variant: Variant = Variant.PCG
    mode: Mode = Mode.ENUMERATE
    trials: int = 0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.num_parties < 2:
            raise ValueError("the protocol needs at least two parties")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.mode is Mode.SAMPLE and self.trials < 1:
            raise ValueError("sample mode needs trials >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def beta(self) -> float:
        return math.sqrt(1.0 - self.alpha**2)

    def ghz_state(self) -> GhzClassState:
        return GhzClassState(self.alpha, self.beta, num_parties=self.num_parties)


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    parity: ParityOutcome | None
    correction_x: bool
    correction_z: bool
    projection: ProjectionOutcome
    branch_probability: float


@dataclass(frozen=True)
class ProtocolTrace:
    rounds: tuple[RoundRecord, ...]
    status: Status
    success_round: int | None
    path_probability: float
    final_state: PureState
    final_fidelity: float


@dataclass(frozen=True)
class EnumerationResult:
    per_round_success: tuple[float, ...]
    cumulative_success: float
    residual_probability: float
    pruned_probability: float
    traces: tuple[ProtocolTrace, ...]


@dataclass(frozen=True)
class SampleStats:
    trials: int
    successes_by_round: tuple[int, ...]
    empirical_p: float
    stderr: float


def build_initial(cfg: ProtocolConfig) -> PureState:
    """N-qubit register with amplitude alpha on all-up and beta on all-down."""
    dim = 1 << cfg.num_parties
    return make_state(cfg.num_parties, [(0, cfg.alpha), (dim - 1, cfg.beta)])


def ghz_target(num_parties: int) -> PureState:
    """Maximally entangled target (|up...up> + |down...down>)/sqrt(2)."""
    dim = 1 << num_parties
    s = 1.0 / math.sqrt(2.0)
    return make_state(num_parties, [(0, s), (dim - 1, s)])


def _require_ghz_class(state: PureState):
    amps = state.amplitudes
    interior = amps[1:-1]
    if float(np.linalg.norm(interior)) > GHZ_SUPPORT_TOL:
        raise ProtocolPreconditionError("register has amplitude outside the GHZ-class support")
    if max(abs(amps[0].imag), abs(amps[-1].imag)) > GHZ_SUPPORT_TOL:
        raise ProtocolPreconditionError("GHZ-class coefficients must be real")


def run_round_pcg(state: PureState, theta: float, pick, ancilla: PureState | None = None,
                  round_index: int = 1) -> tuple[RoundRecord, PureState]:
    """One parity-check round on an N-qubit GHZ-class register.

    The ancilla (default: the plus state) joins the register, a parity
    check on Alice's qubit and the ancilla entangles it, an odd outcome is
    corrected with a bit flip, and a rotated projection with angle
    ``theta`` sorts the register: the phi_perp branch leaves the maximally
    entangled target, the phi branch leaves the residual state, which is
    sign-restored to the canonical "+" form with a phase flip on Alice's
    qubit.  The ancilla leaves the register disentangled in both branches.

    ``pick`` is either a (parity, projection) outcome pair or a sampler
    shared by both measurements.
    """
    _require_ghz_class(state)
    anc = ancilla if ancilla is not None else plus_state()
    joint = tensor(state, anc)
    anc_q = joint.num_qubits - 1
    if isinstance(pick, tuple):
        parity_pick, proj_pick = pick
    else:
        parity_pick = proj_pick = pick

    parity_out, joint = measure_parity(joint, 0, anc_q, parity_pick)
    flip = parity_out.parity is Parity.ODD
    if flip:
        joint = apply_x(joint, anc_q)
    try:
        proj_out, joint = measure_rotated(joint, anc_q, theta, proj_pick)
    except ZeroProbabilityBranchError as err:
        raise ZeroProbabilityBranchError(
            str(err), probability=parity_out.probability * err.probability
        ) from None

    reduced, corrected_z = _detach_and_restore(joint, proj_out.branch, theta)
    record = RoundRecord(
        round_index=round_index,
        parity=parity_out,
        correction_x=flip,
        correction_z=corrected_z,
        projection=proj_out,
        branch_probability=parity_out.probability * proj_out.probability,
    )
    return record, reduced


def run_round_cnot(state: PureState, theta: float, pick, ancilla: PureState | None = None,
                   round_index: int = 1) -> tuple[RoundRecord, PureState]:
    """One CNOT-circuit round; same branch statistics as the parity-check round.

    The entangling step is deterministic (CNOT from Alice's qubit onto a
    spin-up ancilla), so the round has no parity branch.  On the phi branch
    the ancilla is rotated back to spin-up before it is detached, ready for
    reuse in the next round.
    """
    _require_ghz_class(state)
    anc = ancilla if ancilla is not None else basis_state(1, 0)
    joint = tensor(state, anc)
    anc_q = joint.num_qubits - 1
    joint = apply_cnot(joint, 0, anc_q)
    proj_out, joint = measure_rotated(joint, anc_q, theta, pick)
    if proj_out.branch is ProjectionBranch.PHI:
        joint = apply_rotation(joint, anc_q, -theta)
        reduced = factor_last_qubit(joint, 1.0, 0.0)
        reduced = apply_z(reduced, 0)
        corrected_z = True
    else:
        reduced, corrected_z = _detach_and_restore(joint, proj_out.branch, theta)
    record = RoundRecord(
        round_index=round_index,
        parity=None,
        correction_x=False,
        correction_z=corrected_z,
        projection=proj_out,
        branch_probability=proj_out.probability,
    )
    return record, reduced


def _detach_and_restore(joint: PureState, branch: ProjectionBranch, theta: float) -> tuple[PureState, bool]:
    c, s = math.cos(theta), math.sin(theta)
    if branch is ProjectionBranch.PHI_PERP:
        return factor_last_qubit(joint, -s, c), False
    reduced = factor_last_qubit(joint, c, s)
    return apply_z(reduced, 0), True


def _round_runner(variant: Variant):
    return run_round_pcg if variant is Variant.PCG else run_round_cnot


def _branch_picks(variant: Variant):
    if variant is Variant.PCG:
        return (
            (Parity.EVEN, ProjectionBranch.PHI_PERP),
            (Parity.ODD, ProjectionBranch.PHI_PERP),
            (Parity.EVEN, ProjectionBranch.PHI),
            (Parity.ODD, ProjectionBranch.PHI),
        )
    return (ProjectionBranch.PHI_PERP, ProjectionBranch.PHI)


def _is_success(pick) -> bool:
    branch = pick[1] if isinstance(pick, tuple) else pick
    return branch is ProjectionBranch.PHI_PERP


def enumerate_outcomes(cfg: ProtocolConfig) -> EnumerationResult:
    """Exhaustive depth-first expansion of every outcome branch.

    Leaves are success paths (phi_perp at some round) and exhausted paths
    (phi at every round up to max_rounds).  Branches whose forced
    probability falls below 1e-15 are dropped and their mass reported in
    ``pruned_probability``, which keeps the expansion well defined at
    alpha = 0 or 1.
    """
    if cfg.mode is not Mode.ENUMERATE:
        raise ValueError("enumerate_outcomes needs a config in enumerate mode")
    plans = round_plan(cfg.ghz_state(), cfg.max_rounds)
    runner = _round_runner(cfg.variant)
    picks = _branch_picks(cfg.variant)
    target = ghz_target(cfg.num_parties)

    per_round = [0.0] * cfg.max_rounds
    traces: list[ProtocolTrace] = []
    residual = 0.0
    pruned = 0.0

    def expand(state, k, prob, records):
        nonlocal residual, pruned
        if k > cfg.max_rounds:
            residual += prob
            traces.append(ProtocolTrace(records, Status.EXHAUSTED, None, prob,
                                        state, fidelity(state, target)))
            return
        for pick in picks:
            try:
                record, nxt = runner(state, plans[k - 1].theta_k, pick, round_index=k)
            except ZeroProbabilityBranchError as err:
                pruned += prob * err.probability
                continue
            path = prob * record.branch_probability
            if _is_success(pick):
                per_round[k - 1] += path
                traces.append(ProtocolTrace(records + (record,), Status.SUCCESS, k, path,
                                            nxt, fidelity(nxt, target)))
            else:
                expand(nxt, k + 1, path, records + (record,))

    expand(build_initial(cfg), 1, 1.0, ())
    return EnumerationResult(
        per_round_success=tuple(per_round),
        cumulative_success=math.fsum(per_round),
        residual_probability=residual,
        pruned_probability=pruned,
        traces=tuple(traces),
    )


def _draws_per_round(variant: Variant) -> int:
    return 2 if variant is Variant.PCG else 1


def _trial_uniforms(seed: int, first_trial: int, num_trials: int, draws_per_trial: int) -> np.ndarray:
    """Uniform draws for trials [first_trial, first_trial + num_trials).

    Row ``i`` holds the draws of trial ``first_trial + i``.  Each Philox
    counter value yields four doubles, so every trial owns a fixed block of
    ``ceil(draws_per_trial / 4)`` counter values of the stream keyed by
    ``seed``; the same trial always sees the same draws no matter how the
    work is batched.
    """
    blocks_per_trial = -(-draws_per_trial // 4)
    bits = np.random.Philox(key=seed)
    if first_trial:
        bits.advance(first_trial * blocks_per_trial)
    draws = np.random.Generator(bits).random((num_trials, 4 * blocks_per_trial))
    return draws[:, :draws_per_trial]


def _failure_path_projection_probs(cfg: ProtocolConfig, plans) -> list[float]:
    """Exact phi-branch probability of each round along the all-failure path.

    Measured on the state-vector executor; this is what each trial's
    projection draw is compared against.  Both parity outcomes lead to the
    same pre-projection state, so one forced path covers every trial.
    """
    runner = _round_runner(cfg.variant)
    fail_pick = (Parity.EVEN, ProjectionBranch.PHI) if cfg.variant is Variant.PCG else ProjectionBranch.PHI
    state = build_initial(cfg)
    probs = []
    for plan in plans:
        record, state = runner(state, plan.theta_k, fail_pick, round_index=plan.round_index)
        probs.append(record.projection.probability)
    return probs


def sample(cfg: ProtocolConfig) -> SampleStats:
    """Seeded Monte Carlo estimate of the cumulative success probability.

    Each trial walks the protocol's outcome tree by comparing its uniform
    draws against the exact Born branch probabilities of the executor;
    a round succeeds when the projection draw selects the phi_perp branch.
    Results are bit-identical for a fixed (config, seed).
    """
    if cfg.mode is not Mode.SAMPLE:
        raise ValueError("sample needs a config in sample mode")
    plans = round_plan(cfg.ghz_state(), cfg.max_rounds)
    p_phi = _failure_path_projection_probs(cfg, plans)
    width = _draws_per_round(cfg.variant)
    draws = _trial_uniforms(cfg.seed, 0, cfg.trials, width * cfg.max_rounds)
    # The projection draw is the last draw of each round.
    projection_draws = draws[:, width - 1 :: width]

    alive = np.ones(cfg.trials, dtype=bool)
    successes = []
    for k in range(cfg.max_rounds):
        succeeded = alive & (projection_draws[:, k] >= p_phi[k])
        successes.append(int(succeeded.sum()))
        alive &= ~succeeded
    total = cfg.trials - int(alive.sum())
    p_hat = total / cfg.trials
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / cfg.trials)
    return SampleStats(cfg.trials, tuple(successes), p_hat, stderr)


def variant_equivalence(cfg: ProtocolConfig) -> float:
    """Largest per-round probability gap between the two hardware variants."""
    results = {
        variant: enumerate_outcomes(replace(cfg, variant=variant, mode=Mode.ENUMERATE))
        for variant in Variant
    }
    pcg = results[Variant.PCG].per_round_success
    cnot = results[Variant.CNOT].per_round_success
    return max((abs(a - b) for a, b in zip(pcg, cnot)), default=0.0)
