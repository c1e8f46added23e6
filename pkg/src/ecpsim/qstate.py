"""Dense pure-state register for small spin-qubit protocol simulations.

Conventions shared by every module that touches a register:

* qubit 0 is the most significant bit of a basis index,
* bit value 0 is spin-up, bit value 1 is spin-down,
* states are immutable: gates and measurements return new instances.

Measurements select their branch through ``pick``: pass an outcome value
(:class:`Parity` or :class:`ProjectionBranch`) to force a branch, as
exhaustive enumeration does, or pass anything with a ``random()`` method
returning a float in [0, 1) -- typically ``numpy.random.Generator`` -- to
sample it.  A sampled measurement selects the first branch (even parity,
or the phi projector) iff the draw falls below that branch's probability.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 24
NORM_TOL = 1e-12
MIN_BRANCH_PROB = 1e-15


class ZeroProbabilityBranchError(ValueError):
    """A forced measurement branch carries (numerically) no probability."""

    def __init__(self, message: str, probability: float = 0.0):
        super().__init__(message)
        self.probability = probability


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"


class ChargeReading(enum.Enum):
    """Occupation-number reading of the charge detector.

    C1 is occupation one; C0 merges occupations zero and two, which the
    detector cannot tell apart.
    """

    C1 = "C1"
    C0 = "C0"


class ProjectionBranch(enum.Enum):
    PHI = "phi"
    PHI_PERP = "phi_perp"


@dataclass(frozen=True)
class ParityOutcome:
    parity: Parity
    charge_reading: ChargeReading
    probability: float


@dataclass(frozen=True)
class ProjectionOutcome:
    branch: ProjectionBranch
    probability: float


def _clamp01(p: float) -> float:
    return min(max(p, 0.0), 1.0)


class PureState:
    """Normalized complex amplitude vector over an ordered qubit register."""

    __slots__ = ("num_qubits", "_amps")

    def __init__(self, num_qubits: int, amplitudes):
        if not 1 <= num_qubits <= MAX_QUBITS:
            raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
        amps = np.array(amplitudes, dtype=np.complex128)
        dim = 1 << num_qubits
        if amps.shape != (dim,):
            raise ValueError(f"expected {dim} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps.real)) or not np.all(np.isfinite(amps.imag)):
            raise ValueError("amplitudes must be finite")
        norm = float(np.linalg.norm(amps))
        if norm == 0.0:
            raise ValueError("state vector must have at least one nonzero amplitude")
        if abs(norm - 1.0) > 1e-15:
            amps = amps / norm
        self.num_qubits = num_qubits
        self._amps = amps

    @property
    def dim(self) -> int:
        return self._amps.size

    @property
    def amplitudes(self) -> np.ndarray:
        """Read-only view of the amplitude vector."""
        view = self._amps.view()
        view.flags.writeable = False
        return view

    def probabilities(self) -> np.ndarray:
        return np.abs(self._amps) ** 2

    def __repr__(self):
        return f"PureState(num_qubits={self.num_qubits})"


def _mask(num_qubits: int, qubit: int) -> int:
    if not 0 <= qubit < num_qubits:
        raise IndexError(f"qubit {qubit} out of range for a {num_qubits}-qubit register")
    return 1 << (num_qubits - 1 - qubit)


def make_state(num_qubits: int, assignments) -> PureState:
    """Build a normalized state from sparse (basis index, amplitude) pairs.

    Unlisted amplitudes are zero.  Raises ``ValueError`` for an empty or
    all-zero assignment and for indices outside the register.
    """
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    dim = 1 << num_qubits
    amps = np.zeros(dim, dtype=np.complex128)
    empty = True
    for index, amplitude in assignments:
        if not 0 <= index < dim:
            raise ValueError(f"basis index {index} out of range for dimension {dim}")
        amps[index] = amplitude
        empty = False
    if empty:
        raise ValueError("assignment list is empty")
    return PureState(num_qubits, amps)


def basis_state(num_qubits: int, index: int) -> PureState:
    return make_state(num_qubits, [(index, 1.0)])


def plus_state() -> PureState:
    """Single qubit in (spin-up + spin-down)/sqrt(2)."""
    return make_state(1, [(0, 1.0), (1, 1.0)])


def tensor(a: PureState, b: PureState) -> PureState:
    """Tensor product; the qubits of ``b`` become the least significant bits."""
    n = a.num_qubits + b.num_qubits
    if n > MAX_QUBITS:
        raise ValueError(f"product register of {n} qubits exceeds the {MAX_QUBITS}-qubit cap")
    return PureState(n, np.kron(a._amps, b._amps))


def apply_x(state: PureState, qubit: int) -> PureState:
    """Bit flip (spin-up <-> spin-down) on one qubit."""
    m = _mask(state.num_qubits, qubit)
    idx = np.arange(state.dim)
    return PureState(state.num_qubits, state._amps[idx ^ m])


def apply_z(state: PureState, qubit: int) -> PureState:
    """Negate every amplitude whose qubit is spin-down."""
    m = _mask(state.num_qubits, qubit)
    idx = np.arange(state.dim)
    return PureState(state.num_qubits, np.where(idx & m, -state._amps, state._amps))


def apply_cnot(state: PureState, control: int, target: int) -> PureState:
    """Flip the target bit on components where the control is spin-down."""
    if control == target:
        raise ValueError("control and target must be distinct qubits")
    cm = _mask(state.num_qubits, control)
    tm = _mask(state.num_qubits, target)
    idx = np.arange(state.dim)
    src = np.where(idx & cm, idx ^ tm, idx)
    return PureState(state.num_qubits, state._amps[src])


def apply_rotation(state: PureState, qubit: int, angle: float) -> PureState:
    """Real rotation by ``angle`` in the (up, down) plane of one qubit.

    Maps cos(t)|up> + sin(t)|down> onto cos(t+angle)|up> + sin(t+angle)|down>.
    """
    m = _mask(state.num_qubits, qubit)
    idx = np.arange(state.dim)
    lo = idx[(idx & m) == 0]
    hi = lo | m
    a0 = state._amps[lo]
    a1 = state._amps[hi]
    c, s = math.cos(angle), math.sin(angle)
    new = np.empty_like(state._amps)
    new[lo] = c * a0 - s * a1
    new[hi] = s * a0 + c * a1
    return PureState(state.num_qubits, new)


def _forced_or_drawn(pick, outcome_type, first_outcome, p_first):
    if isinstance(pick, outcome_type):
        return pick
    if isinstance(pick, (Parity, ProjectionBranch)):
        raise TypeError(f"pick of type {type(pick).__name__} does not match this measurement")
    draw = getattr(pick, "random", None)
    if draw is None:
        raise TypeError("pick must be a measurement outcome or expose random() -> float")
    other = [o for o in outcome_type if o is not first_outcome][0]
    return first_outcome if draw() < p_first else other


def measure_parity(state: PureState, qubit1: int, qubit2: int, pick) -> tuple[ParityOutcome, PureState]:
    """Nondestructive two-qubit parity measurement.

    Even parity keeps the span of (up,up) and (down,down) and reads C1 on
    the charge detector; odd parity keeps the mixed-spin span and reads the
    merged C0.  Returns the exact Born probability of the selected branch
    and the renormalized post-measurement state; all other qubits are
    untouched.
    """
    if qubit1 == qubit2:
        raise ValueError("parity check needs two distinct qubits")
    n = state.num_qubits
    m1, m2 = _mask(n, qubit1), _mask(n, qubit2)
    idx = np.arange(state.dim)
    even = ((idx & m1) == 0) == ((idx & m2) == 0)
    weights = state.probabilities()
    p_even = float(np.sum(weights[even]))
    p_odd = float(np.sum(weights[~even]))

    parity = _forced_or_drawn(pick, Parity, Parity.EVEN, p_even)
    keep = even if parity is Parity.EVEN else ~even
    p = p_even if parity is Parity.EVEN else p_odd
    if p < MIN_BRANCH_PROB:
        raise ZeroProbabilityBranchError(
            f"{parity.value}-parity branch has probability {p:.3e}", probability=p
        )
    post = np.where(keep, state._amps, 0.0) / math.sqrt(p)
    reading = ChargeReading.C1 if parity is Parity.EVEN else ChargeReading.C0
    return ParityOutcome(parity, reading, _clamp01(p)), PureState(n, post)


def measure_rotated(state: PureState, qubit: int, theta: float, pick) -> tuple[ProjectionOutcome, PureState]:
    """Projective measurement of one qubit in a rotated real basis.

    The basis is phi = cos(theta)|up> + sin(theta)|down> and its orthogonal
    complement phi_perp = -sin(theta)|up> + cos(theta)|down>.  The qubit
    collapses onto the selected basis vector and the register is
    renormalized.  theta = 0 reduces to a computational-basis measurement.
    """
    n = state.num_qubits
    m = _mask(n, qubit)
    idx = np.arange(state.dim)
    lo = idx[(idx & m) == 0]
    hi = lo | m
    a0 = state._amps[lo]
    a1 = state._amps[hi]
    c, s = math.cos(theta), math.sin(theta)
    amp_phi = c * a0 + s * a1
    amp_perp = -s * a0 + c * a1
    p_phi = float(np.sum(np.abs(amp_phi) ** 2))
    p_perp = float(np.sum(np.abs(amp_perp) ** 2))

    branch = _forced_or_drawn(pick, ProjectionBranch, ProjectionBranch.PHI, p_phi)
    if branch is ProjectionBranch.PHI:
        p, kept, b0, b1 = p_phi, amp_phi, c, s
    else:
        p, kept, b0, b1 = p_perp, amp_perp, -s, c
    if p < MIN_BRANCH_PROB:
        raise ZeroProbabilityBranchError(
            f"{branch.value} branch has probability {p:.3e}", probability=p
        )
    r = math.sqrt(p)
    post = np.empty_like(state._amps)
    post[lo] = b0 * kept / r
    post[hi] = b1 * kept / r
    return ProjectionOutcome(branch, _clamp01(p)), PureState(n, post)


def factor_last_qubit(state: PureState, amp_up: complex, amp_down: complex) -> PureState:
    """Split off the last qubit, which must sit in the given product state.

    Raises ``ValueError`` if the last qubit is entangled with the rest or
    holds a different state (residual above 1e-10).
    """
    if state.num_qubits < 2:
        raise ValueError("cannot factor the only qubit of a register")
    chi = np.array([amp_up, amp_down], dtype=np.complex128)
    chi /= np.linalg.norm(chi)
    block = state._amps.reshape(-1, 2)
    cofactor = block @ chi.conj()
    if float(np.linalg.norm(block - np.outer(cofactor, chi))) > 1e-10:
        raise ValueError("last qubit is entangled or not in the stated product state")
    return PureState(state.num_qubits - 1, cofactor)


def fidelity(a: PureState, b: PureState) -> float:
    """Squared overlap |<a|b>|^2."""
    if a.num_qubits != b.num_qubits:
        raise ValueError("fidelity requires registers of equal size")
    return _clamp01(abs(np.vdot(a._amps, b._amps)) ** 2)
