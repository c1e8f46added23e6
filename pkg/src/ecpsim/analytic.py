"""Closed-form engine for the iterative concentration protocol.

Everything here works on the compact (alpha, beta) description of a
GHZ-class register alpha|up...up> + beta|down...down>.  One round succeeds
with conditional probability 2*alpha_k^2*beta_k^2; a failed round re-enters
with coefficients (alpha_k^2, beta_k^2)/sqrt(alpha_k^4 + beta_k^4).

The cumulative success probability is accumulated through that recursion
by carrying the unconditional failure probability forward.  Expanding the
recursion reproduces the k-th unconditional term

    2 alpha^(2^k) beta^(2^k) / prod_{j=2..k} (alpha^(2^j) + beta^(2^j)),

but forming the giant exponents directly would underflow long before the
series converges, so the iterated form is the one implemented.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

COEFF_NORM_TOL = 1e-12
MAX_ITERATIONS = 64


class IterationLimitError(RuntimeError):
    """The success series failed to converge within the iteration cap."""


class Sign(enum.Enum):
    """Relative phase between the all-up and all-down branches."""

    PLUS = "+"
    MINUS = "-"


@dataclass(frozen=True)
class GhzClassState:
    """Compact description of alpha|up...up> + sign * beta|down...down>.

    Coefficients are stored as nonnegative magnitudes; any relative sign
    lives in ``sign``.  Every probability below depends only on squared
    magnitudes, so ``sign`` never enters the arithmetic.
    """

    alpha: float
    beta: float
    sign: Sign = Sign.PLUS
    num_parties: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("coefficients must be finite")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("coefficients are magnitudes; move signs into `sign`")
        if abs(self.alpha**2 + self.beta**2 - 1.0) > COEFF_NORM_TOL:
            raise ValueError("alpha^2 + beta^2 must equal 1")
        if self.num_parties < 2:
            raise ValueError("a GHZ-class state needs at least two parties")

    @classmethod
    def from_alpha_sq(cls, alpha_sq: float, sign: Sign = Sign.PLUS, num_parties: int = 2) -> "GhzClassState":
        if not 0.0 <= alpha_sq <= 1.0:
            raise ValueError(f"alpha_sq must lie in [0, 1], got {alpha_sq}")
        return cls(math.sqrt(alpha_sq), math.sqrt(1.0 - alpha_sq), sign, num_parties)

    @classmethod
    def from_coefficients(cls, a: float, b: float, num_parties: int = 2) -> "GhzClassState":
        """Canonicalize signed real coefficients into magnitudes plus a phase flag."""
        sign = Sign.MINUS if a * b < 0 else Sign.PLUS
        return cls(abs(a), abs(b), sign, num_parties)


@dataclass(frozen=True)
class RoundPlan:
    """Coefficients, projection angle and success probabilities of one round."""

    round_index: int
    alpha_k: float
    beta_k: float
    theta_k: float
    p_success_cond: float
    p_success_uncond: float


class CurveRow(NamedTuple):
    entanglement: float
    rounds: int
    p_success: float


@dataclass(frozen=True)
class ConcentrationCurve:
    rows: tuple[CurveRow, ...]


def _clamp01(p: float) -> float:
    return min(max(p, 0.0), 1.0)


def entanglement(state: GhzClassState) -> float:
    """Entanglement measure E = 2 * min(alpha^2, beta^2).

    E is the ceiling on the success probability of any concentration
    scheme acting on a single copy of the state.
    """
    return _clamp01(2.0 * min(state.alpha**2, state.beta**2))


def residual_coeffs(alpha: float, beta: float) -> tuple[float, float]:
    """Coefficients after a failed round: (a^2, b^2) / sqrt(a^4 + b^4)."""
    h = math.hypot(alpha * alpha, beta * beta)
    if h == 0.0:
        raise ValueError("alpha and beta cannot both be zero")
    return (alpha * alpha / h, beta * beta / h)


def round_plan(state: GhzClassState, max_rounds: int) -> list[RoundPlan]:
    """Per-round coefficients, angles and success probabilities.

    ``p_success_cond`` is the success probability conditioned on reaching
    the round; ``p_success_uncond`` multiplies in the probability of having
    failed every earlier round, so the unconditional terms sum to the
    cumulative success probability.
    """
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")
    a, b = state.alpha, state.beta
    fail_mass = 1.0
    plans = []
    for k in range(1, max_rounds + 1):
        p_cond = _clamp01(2.0 * a * a * b * b)
        theta = math.atan2(-b, a)
        plans.append(RoundPlan(k, a, b, theta, p_cond, _clamp01(fail_mass * p_cond)))
        fail_mass *= a**4 + b**4
        a, b = residual_coeffs(a, b)
    return plans


def cumulative_success(state: GhzClassState, n: int) -> float:
    """Probability of succeeding within the first ``n`` rounds."""
    return _clamp01(math.fsum(p.p_success_uncond for p in round_plan(state, n)))


def asymptotic_limit(state: GhzClassState, tol: float) -> tuple[float, int]:
    """Run the success series until its increment drops below ``tol``.

    Returns (P_n, n) for the first round whose unconditional term is below
    the threshold.  The coefficients polarize doubly exponentially, so for
    any tolerance above ~1e-18 this happens well before the cap of
    64 iterations; exceeding the cap raises :class:`IterationLimitError`.
    """
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    a, b = state.alpha, state.beta
    fail_mass = 1.0
    total = 0.0
    for k in range(1, MAX_ITERATIONS + 1):
        term = fail_mass * 2.0 * a * a * b * b
        total += term
        if term < tol:
            return _clamp01(total), k
        fail_mass *= a**4 + b**4
        a, b = residual_coeffs(a, b)
    raise IterationLimitError(f"series increment not below {tol} after {MAX_ITERATIONS} rounds")


def curve(e_grid, n_values) -> ConcentrationCurve:
    """Success-probability table over an entanglement grid.

    Each entanglement value E in (0, 1] is mapped onto the state with
    alpha^2 = E/2 (the branch with alpha <= beta; swapping the coefficients
    leaves every probability unchanged).  One row is produced per (E, n),
    with n iterating fastest.
    """
    n_values = list(n_values)
    if not n_values:
        raise ValueError("n_values must not be empty")
    if any(n < 1 for n in n_values):
        raise ValueError("every round count must be >= 1")
    rows = []
    for e in e_grid:
        if not 0.0 < e <= 1.0:
            raise ValueError(f"entanglement values must lie in (0, 1], got {e}")
        state = GhzClassState.from_alpha_sq(e / 2.0)
        plans = round_plan(state, max(n_values))
        partial = 0.0
        partial_by_n = {}
        for plan in plans:
            partial += plan.p_success_uncond
            partial_by_n[plan.round_index] = _clamp01(partial)
        rows.extend(CurveRow(e, n, partial_by_n[n]) for n in n_values)
    return ConcentrationCurve(tuple(rows))
