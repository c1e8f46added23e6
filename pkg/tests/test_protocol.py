"""Tests for the protocol executor: rounds, enumeration, sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecpsim.analytic import residual_coeffs, round_plan
from ecpsim.protocol import (
    Mode,
    ProtocolConfig,
    ProtocolPreconditionError,
    SampleStats,
    Status,
    Variant,
    _failure_path_projection_probs,
    _trial_uniforms,
    build_initial,
    enumerate_outcomes,
    ghz_target,
    run_round_cnot,
    run_round_pcg,
    sample,
    variant_equivalence,
)
from ecpsim.qstate import (
    Parity,
    ProjectionBranch,
    ZeroProbabilityBranchError,
    apply_rotation,
    basis_state,
    fidelity,
    make_state,
    measure_rotated,
    tensor,
)

ALPHA_SQ = 0.2


def cfg_for(alpha_sq=ALPHA_SQ, **kwargs):
    return ProtocolConfig(alpha=math.sqrt(alpha_sq), **kwargs)


def first_theta(cfg):
    return round_plan(cfg.ghz_state(), 1)[0].theta_k


# ---------------------------------------------------------------------------
# config and initial state
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(alpha=1.5)
    with pytest.raises(ValueError):
        ProtocolConfig(alpha=0.5, num_parties=1)
    with pytest.raises(ValueError):
        ProtocolConfig(alpha=0.5, max_rounds=0)
    with pytest.raises(ValueError):
        ProtocolConfig(alpha=0.5, mode=Mode.SAMPLE, trials=0)
    with pytest.raises(ValueError):
        ProtocolConfig(alpha=0.5, seed=-1)


def test_build_initial_bell_pair():
    state = build_initial(cfg_for(0.5))
    assert fidelity(state, ghz_target(2)) == pytest.approx(1.0, abs=1e-12)


def test_build_initial_three_parties():
    state = build_initial(cfg_for(0.2, num_parties=3))
    expected = make_state(3, [(0, math.sqrt(0.2)), (7, math.sqrt(0.8))])
    assert fidelity(state, expected) == pytest.approx(1.0, abs=1e-12)


def test_build_initial_product_state():
    state = build_initial(ProtocolConfig(alpha=1.0))
    assert np.allclose(state.amplitudes, [1, 0, 0, 0])


# ---------------------------------------------------------------------------
# single rounds
# ---------------------------------------------------------------------------

def test_pcg_success_mass_over_parity_branches():
    """Summed over the two parity outcomes, round-1 success carries 2 a^2 b^2."""
    cfg = cfg_for()
    state, theta = build_initial(cfg), first_theta(cfg)
    total = 0.0
    for parity in Parity:
        record, final = run_round_pcg(state, theta, (parity, ProjectionBranch.PHI_PERP))
        total += record.branch_probability
        assert fidelity(final, ghz_target(2)) == pytest.approx(1.0, abs=1e-12)
        assert record.correction_x is (parity is Parity.ODD)
    assert total == pytest.approx(0.32, abs=1e-12)


def test_pcg_parity_branches_agree_after_bit_flip():
    """Both parity outcomes lead to the same residual once corrected."""
    cfg = cfg_for()
    state, theta = build_initial(cfg), first_theta(cfg)
    _, via_even = run_round_pcg(state, theta, (Parity.EVEN, ProjectionBranch.PHI))
    _, via_odd = run_round_pcg(state, theta, (Parity.ODD, ProjectionBranch.PHI))
    assert fidelity(via_even, via_odd) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("runner", [run_round_pcg, run_round_cnot])
def test_failed_round_applies_replacement_rule(runner):
    """The phi-branch residual carries (a^2, b^2)/sqrt(a^4+b^4), plus form."""
    cfg = cfg_for()
    state, theta = build_initial(cfg), first_theta(cfg)
    pick = (Parity.EVEN, ProjectionBranch.PHI) if runner is run_round_pcg else ProjectionBranch.PHI
    record, residual = runner(state, theta, pick)
    assert record.correction_z is True
    a2, b2 = residual_coeffs(cfg.alpha, cfg.beta)
    expected = make_state(2, [(0, a2), (3, b2)])
    assert fidelity(residual, expected) == pytest.approx(1.0, abs=1e-12)


def test_cnot_round_matches_pcg_probabilities():
    cfg = cfg_for()
    state, theta = build_initial(cfg), first_theta(cfg)
    record, final = run_round_cnot(state, theta, ProjectionBranch.PHI_PERP)
    assert record.parity is None
    assert record.branch_probability == pytest.approx(0.32, abs=1e-12)
    assert fidelity(final, ghz_target(2)) == pytest.approx(1.0, abs=1e-12)


def test_cnot_failed_round_recovers_ancilla():
    """After the recovery rotation the ancilla is spin-up again, ready for reuse."""
    cfg = cfg_for()
    theta = first_theta(cfg)
    joint = make_state(3, [(0, cfg.alpha), (7, cfg.beta)])
    _, collapsed = measure_rotated(joint, 2, theta, ProjectionBranch.PHI)
    recovered = apply_rotation(collapsed, 2, -theta)
    h = math.hypot(cfg.alpha**2, cfg.beta**2)
    residual = make_state(2, [(0, cfg.alpha**2 / h), (3, -(cfg.beta**2) / h)])
    assert fidelity(recovered, tensor(residual, basis_state(1, 0))) == pytest.approx(1.0, abs=1e-12)


def test_round_on_product_state_cannot_succeed():
    cfg = ProtocolConfig(alpha=1.0)
    state, theta = build_initial(cfg), first_theta(cfg)
    with pytest.raises(ZeroProbabilityBranchError):
        run_round_pcg(state, theta, (Parity.EVEN, ProjectionBranch.PHI_PERP))


def test_round_rejects_non_ghz_input():
    lopsided = make_state(2, [(0, 0.6), (1, 0.8)])
    with pytest.raises(ProtocolPreconditionError):
        run_round_pcg(lopsided, -0.5, (Parity.EVEN, ProjectionBranch.PHI))
    with pytest.raises(ProtocolPreconditionError):
        run_round_cnot(lopsided, -0.5, ProjectionBranch.PHI)


def test_round_with_sampled_pick():
    cfg = cfg_for()
    record, _ = run_round_pcg(build_initial(cfg), first_theta(cfg), np.random.default_rng(5))
    assert 0.0 < record.branch_probability <= 1.0


def test_rounds_iterate_through_plans():
    """Driving rounds by hand reproduces the closed-form conditional chain."""
    cfg = cfg_for(0.3, max_rounds=3)
    plans = round_plan(cfg.ghz_state(), 3)
    state = build_initial(cfg)
    for plan in plans:
        record, state = run_round_pcg(state, plan.theta_k,
                                      (Parity.EVEN, ProjectionBranch.PHI),
                                      round_index=plan.round_index)
        assert 1.0 - record.projection.probability == pytest.approx(plan.p_success_cond, abs=1e-12)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def test_enumeration_matches_series_terms():
    result = enumerate_outcomes(cfg_for(0.2, max_rounds=2))
    assert result.per_round_success[0] == pytest.approx(0.32, abs=1e-10)
    assert result.per_round_success[1] == pytest.approx(0.0512 / 0.68, abs=1e-10)
    assert result.cumulative_success == pytest.approx(0.3952941176470588, abs=1e-10)
    assert result.cumulative_success + result.residual_probability == pytest.approx(1.0, abs=1e-10)


def test_enumeration_symmetric_case():
    result = enumerate_outcomes(cfg_for(0.5, max_rounds=3))
    assert result.cumulative_success == pytest.approx(0.875, abs=1e-10)


def test_enumeration_round_mass_independent_of_parties():
    result = enumerate_outcomes(cfg_for(0.3, num_parties=4, max_rounds=1))
    assert result.per_round_success[0] == pytest.approx(0.42, abs=1e-12)


@pytest.mark.parametrize("variant", list(Variant))
@pytest.mark.parametrize("parties,rounds", [(2, 6), (3, 3), (6, 6)])
def test_enumeration_success_traces_reach_target(variant, parties, rounds):
    result = enumerate_outcomes(
        cfg_for(0.2, num_parties=parties, max_rounds=rounds, variant=variant)
    )
    successes = [t for t in result.traces if t.status is Status.SUCCESS]
    assert successes
    for trace in successes:
        assert trace.final_fidelity == pytest.approx(1.0, abs=1e-12)
        assert trace.success_round == trace.rounds[-1].round_index


def test_enumeration_exhausted_traces_hold_iterated_residual():
    rounds = 3
    cfg = cfg_for(0.2, max_rounds=rounds)
    a, b = cfg.alpha, cfg.beta
    for _ in range(rounds):
        a, b = residual_coeffs(a, b)
    expected = make_state(2, [(0, a), (3, b)])
    result = enumerate_outcomes(cfg)
    exhausted = [t for t in result.traces if t.status is Status.EXHAUSTED]
    assert exhausted
    for trace in exhausted:
        assert fidelity(trace.final_state, expected) == pytest.approx(1.0, abs=1e-12)


def test_enumeration_trace_path_probability_is_branch_product():
    result = enumerate_outcomes(cfg_for(0.3, max_rounds=3))
    for trace in result.traces:
        product = math.prod(r.branch_probability for r in trace.rounds)
        assert trace.path_probability == pytest.approx(product, abs=1e-12)


def test_enumeration_requires_enumerate_mode():
    with pytest.raises(ValueError):
        enumerate_outcomes(cfg_for(0.3, mode=Mode.SAMPLE, trials=10))


def test_enumeration_handles_product_states():
    for alpha in (0.0, 1.0):
        result = enumerate_outcomes(ProtocolConfig(alpha=alpha, max_rounds=3))
        assert result.cumulative_success == 0.0
        assert result.residual_probability == pytest.approx(1.0, abs=1e-12)


@given(
    st.floats(0.0, 1.0, allow_nan=False),
    st.integers(2, 4),
    st.integers(1, 4),
    st.sampled_from(list(Variant)),
)
@settings(max_examples=40, deadline=None)
def test_enumeration_conserves_probability(alpha_sq, parties, rounds, variant):
    cfg = cfg_for(alpha_sq, num_parties=parties, max_rounds=rounds, variant=variant)
    result = enumerate_outcomes(cfg)
    mass = result.cumulative_success + result.residual_probability + result.pruned_probability
    assert mass == pytest.approx(1.0, abs=1e-10)


@given(st.floats(0.01, 0.99), st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_enumeration_agrees_with_analytic_terms(alpha_sq, rounds):
    cfg = cfg_for(alpha_sq, max_rounds=rounds)
    result = enumerate_outcomes(cfg)
    plans = round_plan(cfg.ghz_state(), rounds)
    for plan, simulated in zip(plans, result.per_round_success):
        assert simulated == pytest.approx(plan.p_success_uncond, abs=1e-10)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_product_state_never_succeeds():
    stats = sample(ProtocolConfig(alpha=1.0, max_rounds=2, mode=Mode.SAMPLE, trials=2000, seed=4))
    assert stats.empirical_p == 0.0
    assert stats.stderr == 0.0


def test_sample_matches_exact_probability():
    cfg = cfg_for(0.5, max_rounds=1, mode=Mode.SAMPLE, trials=100000, seed=17)
    stats = sample(cfg)
    assert abs(stats.empirical_p - 0.5) <= 4 * stats.stderr


def test_sample_is_deterministic():
    cfg = cfg_for(0.3, max_rounds=3, mode=Mode.SAMPLE, trials=5000, seed=99)
    assert sample(cfg) == sample(cfg)


def test_sample_requires_sample_mode():
    with pytest.raises(ValueError):
        sample(cfg_for(0.3))


def test_sample_stats_shape():
    cfg = cfg_for(0.3, max_rounds=3, mode=Mode.SAMPLE, trials=1000, seed=2)
    stats = sample(cfg)
    assert isinstance(stats, SampleStats)
    assert len(stats.successes_by_round) == 3
    assert sum(stats.successes_by_round) <= stats.trials
    p = sum(stats.successes_by_round) / stats.trials
    assert stats.empirical_p == pytest.approx(p, abs=1e-15)
    assert stats.stderr == pytest.approx(math.sqrt(p * (1 - p) / stats.trials), abs=1e-15)


class _ScriptedDraws:
    """Feeds one trial's pre-laid-out uniforms to the measurement ops."""

    def __init__(self, row):
        self._values = iter(row)

    def random(self):
        return float(next(self._values))


def _sample_one_round_at_a_time(cfg):
    """Reference sampler: run every trial through the round executor."""
    plans = round_plan(cfg.ghz_state(), cfg.max_rounds)
    width = 2 if cfg.variant is Variant.PCG else 1
    draws = _trial_uniforms(cfg.seed, 0, cfg.trials, width * cfg.max_rounds)
    runner = run_round_pcg if cfg.variant is Variant.PCG else run_round_cnot
    initial = build_initial(cfg)
    successes = [0] * cfg.max_rounds
    for i in range(cfg.trials):
        picker = _ScriptedDraws(draws[i])
        state = initial
        for plan in plans:
            record, state = runner(state, plan.theta_k, picker, round_index=plan.round_index)
            if record.projection.branch is ProjectionBranch.PHI_PERP:
                successes[plan.round_index - 1] += 1
                break
    return tuple(successes)


@pytest.mark.parametrize("variant", list(Variant))
def test_sample_equals_per_trial_simulation(variant):
    """The vectorized sampler reproduces trial-by-trial executor runs exactly."""
    cfg = cfg_for(0.3, max_rounds=3, mode=Mode.SAMPLE, trials=400, seed=21, variant=variant)
    assert sample(cfg).successes_by_round == _sample_one_round_at_a_time(cfg)


def test_trial_substreams_are_independent_of_batching():
    """Trial draws are a pure function of (seed, trial index)."""
    full = _trial_uniforms(123, 0, 100, 6)
    head = _trial_uniforms(123, 0, 37, 6)
    tail = _trial_uniforms(123, 37, 63, 6)
    assert np.array_equal(np.vstack([head, tail]), full)


def test_sample_chunked_workers_agree():
    """Splitting the trial range across workers changes nothing."""
    cfg = cfg_for(0.3, max_rounds=2, mode=Mode.SAMPLE, trials=10000, seed=8)
    whole = sample(cfg)
    p_phi = _failure_path_projection_probs(cfg, round_plan(cfg.ghz_state(), 2))
    merged = [0, 0]
    for start, count in ((0, 4000), (4000, 6000)):
        projection_draws = _trial_uniforms(cfg.seed, start, count, 4)[:, 1::2]
        alive = np.ones(count, dtype=bool)
        for k in range(2):
            succeeded = alive & (projection_draws[:, k] >= p_phi[k])
            merged[k] += int(succeeded.sum())
            alive &= ~succeeded
    assert tuple(merged) == whole.successes_by_round


# ---------------------------------------------------------------------------
# variant equivalence
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("alpha_sq,rounds", [(0.2, 3), (0.5, 5)])
def test_variants_agree(alpha_sq, rounds):
    assert variant_equivalence(cfg_for(alpha_sq, max_rounds=rounds)) < 1e-12


def test_variants_agree_trivially_on_product_state():
    assert variant_equivalence(ProtocolConfig(alpha=0.0, max_rounds=3)) == 0.0
