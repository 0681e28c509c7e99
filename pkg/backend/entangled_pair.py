"""
Two-Particle States
===================

Composite two-qubit states over the ordered basis
|+z>_a|+z>_b, |+z>_a|-z>_b, |-z>_a|+z>_b, |-z>_a|-z>_b, together with:

  - basis expansions along arbitrary measurement axes,
  - joint outcome probabilities and the joint spin expectation,
  - the three-axis Bell quantity,
  - reduced density operators and the sigma*sigma thought experiment on a
    maximally mixed spin,
  - the conditional (collapsed) partner state used by the nonlocal semantics.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np

from backend.config import ALGEBRA_TOL, IMPOSSIBLE_PROB
from backend.spin_algebra import (
    Axis,
    ImpossibleOutcomeError,
    QubitState,
    angle_between,
    axis_eigenstates,
    overlap_prob,
    pauli_component,
)

logger = logging.getLogger(__name__)

SIGNS = (1, -1)
_SIGN_LABEL = {1: "p", -1: "m"}


class Particle(str, Enum):
    """Which factor of the composite system an operation refers to."""

    A = "a"
    B = "b"


# ---------------------------------------------------------------------------
# Outcomes and distributions
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class JointOutcome:
    """Pair of measured signs (s_a, s_b), each +1 or -1."""

    s_a: int
    s_b: int

    def __post_init__(self) -> None:
        for name in ("s_a", "s_b"):
            value = getattr(self, name)
            if value not in SIGNS:
                raise ValueError(f"{name} must be +1 or -1, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def product(self) -> int:
        return self.s_a * self.s_b

    @property
    def label(self) -> str:
        """Channel label: 'pp', 'pm', 'mp' or 'mm'."""
        return _SIGN_LABEL[self.s_a] + _SIGN_LABEL[self.s_b]

    @property
    def index(self) -> int:
        return 2 * (self.s_a < 0) + (self.s_b < 0)


# Fixed order used for amplitudes, probabilities and inverse-CDF sampling
OUTCOMES: Tuple[JointOutcome, ...] = tuple(JointOutcome(a, b) for a in SIGNS for b in SIGNS)


def _as_outcome(key: Union[JointOutcome, Tuple[int, int]]) -> JointOutcome:
    return key if isinstance(key, JointOutcome) else JointOutcome(*key)


@dataclass(frozen=True)
class JointDistribution:
    """Probabilities of the four sign pairs for one (axis_a, axis_b) setting."""

    probabilities: Tuple[float, float, float, float]
    axis_a: Optional[Axis] = None
    axis_b: Optional[Axis] = None

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probabilities)
        if len(probs) != 4:
            raise ValueError(f"JointDistribution needs 4 probabilities, got {len(probs)}")
        if any(p < -ALGEBRA_TOL or p > 1.0 + ALGEBRA_TOL for p in probs):
            raise ValueError(f"Probabilities must lie in [0, 1]: {probs}")
        total = sum(probs)
        if abs(total - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"Probabilities must sum to 1, got {total!r}")
        object.__setattr__(self, "probabilities", tuple(min(1.0, max(0.0, p)) for p in probs))

    def __getitem__(self, key: Union[JointOutcome, Tuple[int, int]]) -> float:
        return self.probabilities[_as_outcome(key).index]

    def marginal_a(self, sign: int) -> float:
        return self[(sign, 1)] + self[(sign, -1)]

    def marginal_b(self, sign: int) -> float:
        return self[(1, sign)] + self[(-1, sign)]

    @property
    def expectation(self) -> float:
        """Sum of sign(s_a*s_b) * P(s_a, s_b)."""
        return sum(o.product * p for o, p in zip(OUTCOMES, self.probabilities))

    def as_dict(self) -> Dict[str, float]:
        return {o.label: p for o, p in zip(OUTCOMES, self.probabilities)}


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TwoQubitState:
    """Normalized 4-amplitude state in the (pp, pm, mp, mm) product basis."""

    amplitudes: Tuple[complex, complex, complex, complex]

    def __post_init__(self) -> None:
        amps = tuple(complex(x) for x in self.amplitudes)
        if len(amps) != 4:
            raise ValueError(f"TwoQubitState needs 4 amplitudes, got {len(amps)}")
        norm = sum(abs(x) ** 2 for x in amps)
        if abs(norm - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"TwoQubitState must be normalized, sum |amp|^2 = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vector, normalize: bool = False) -> "TwoQubitState":
        v = np.asarray(vector, dtype=complex).reshape(4)
        if normalize:
            norm = float(np.linalg.norm(v))
            if norm == 0.0:
                raise ValueError("Cannot normalize the zero vector")
            v = v / norm
        return cls(tuple(complex(x) for x in v))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.amplitudes, dtype=complex)

    @property
    def matrix(self) -> np.ndarray:
        """Coefficient matrix psi[i, j]; row indexes particle a, column particle b."""
        return self.vector.reshape(2, 2)


@dataclass(frozen=True, eq=False)
class DensityMatrix2:
    """Single-qubit density operator: Hermitian, unit trace, positive semidefinite."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"DensityMatrix2 must be 2x2, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > ALGEBRA_TOL:
            raise ValueError("DensityMatrix2 must be Hermitian")
        trace = np.trace(m)
        if abs(trace - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"DensityMatrix2 must have unit trace, got {trace}")
        if np.min(np.linalg.eigvalsh(m)) < -ALGEBRA_TOL:
            raise ValueError("DensityMatrix2 must be positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def is_maximally_mixed(self, tol: float = ALGEBRA_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - np.eye(2) / 2.0)) <= tol)


@dataclass(frozen=True)
class BellAxes:
    """Three measurement axes for the three-term Bell quantity."""

    first: Axis
    second: Axis
    third: Axis

    def pairwise_angles(self) -> Dict[str, float]:
        return {
            "12": angle_between(self.first, self.second),
            "13": angle_between(self.first, self.third),
            "23": angle_between(self.second, self.third),
        }


def singlet() -> TwoQubitState:
    """(|+z>_a|-z>_b - |-z>_a|+z>_b)/sqrt(2)."""
    r = 1.0 / math.sqrt(2.0)
    return TwoQubitState((0.0, r, -r, 0.0))


def tensor(a: QubitState, b: QubitState) -> TwoQubitState:
    # factors may each sit at the norm tolerance; their product can exceed it
    return TwoQubitState.from_vector(np.kron(a.vector, b.vector), normalize=True)


def random_pair_state(rng: np.random.Generator) -> TwoQubitState:
    """Haar-random pure two-qubit state."""
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    return TwoQubitState.from_vector(v, normalize=True)


def pair_equal_up_to_global_phase(x: TwoQubitState, y: TwoQubitState, tol: float = ALGEBRA_TOL) -> bool:
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    return abs(np.vdot(x.vector, y.vector)) >= 1.0 - tol


# ---------------------------------------------------------------------------
# Basis expansions
# ---------------------------------------------------------------------------
def expand_in_kets(
    state: TwoQubitState,
    basis_a: Tuple[QubitState, QubitState],
    basis_b: Tuple[QubitState, QubitState],
) -> np.ndarray:
    """Coefficients d(i, j) = <basis_a[i]| <basis_b[j]| state>, flattened in OUTCOMES order.

    Both bases must be orthonormal; the squared coefficients then sum to one.
    """
    bra_a = np.array([k.vector.conj() for k in basis_a])
    bra_b = np.array([k.vector.conj() for k in basis_b])
    coeffs = (bra_a @ state.matrix @ bra_b.T).reshape(4)
    total = float(np.sum(np.abs(coeffs) ** 2))
    if abs(total - 1.0) > ALGEBRA_TOL:
        raise ValueError(f"Expansion bases are not orthonormal (sum |d|^2 = {total!r})")
    return coeffs


def expand_in_bases(state: TwoQubitState, axis_a: Axis, axis_b: Axis) -> np.ndarray:
    """Coefficients of ``state`` over the eigenstate products of the two axes."""
    return expand_in_kets(state, axis_eigenstates(axis_a), axis_eigenstates(axis_b))


def basis_change(state: TwoQubitState, axis_a: Axis, axis_b: Axis) -> TwoQubitState:
    """The same state rewritten with the eigenstates of the two axes as product basis."""
    return TwoQubitState.from_vector(expand_in_bases(state, axis_a, axis_b), normalize=True)


def singlet_form_check(state: TwoQubitState, axis: Axis, tol: float = ALGEBRA_TOL) -> bool:
    """True when rewriting ``state`` along ``axis`` for both particles gives the singlet form."""
    return pair_equal_up_to_global_phase(basis_change(state, axis, axis), singlet(), tol)


def joint_probabilities(state: TwoQubitState, axis_a: Axis, axis_b: Axis) -> JointDistribution:
    probs = np.abs(expand_in_bases(state, axis_a, axis_b)) ** 2
    return JointDistribution(tuple(float(p) for p in probs), axis_a, axis_b)


def conditional_probabilities(state: TwoQubitState, axis_a: Axis, axis_b: Axis) -> Dict[JointOutcome, float]:
    """P(s_b | s_a) for every s_a branch with non-zero probability."""
    dist = joint_probabilities(state, axis_a, axis_b)
    result: Dict[JointOutcome, float] = {}
    for s_a in SIGNS:
        marginal = dist.marginal_a(s_a)
        if marginal < IMPOSSIBLE_PROB:
            continue
        for s_b in SIGNS:
            result[JointOutcome(s_a, s_b)] = dist[(s_a, s_b)] / marginal
    return result


# ---------------------------------------------------------------------------
# Expectations
# ---------------------------------------------------------------------------
def operator_expectation(state: TwoQubitState, axis_a: Axis, axis_b: Axis) -> float:
    """<psi| sigma_a (x) sigma_b |psi> evaluated directly."""
    op = np.kron(pauli_component(axis_a), pauli_component(axis_b))
    v = state.vector
    return float(np.real(np.vdot(v, op @ v)))


def joint_expectation(state: TwoQubitState, axis_a: Axis, axis_b: Axis) -> float:
    """Expected sign product of the joint measurement.

    Computed as the probability-weighted sum over the four final product
    states and cross-checked against the direct operator expectation.
    """
    weighted = joint_probabilities(state, axis_a, axis_b).expectation
    direct = operator_expectation(state, axis_a, axis_b)
    if abs(weighted - direct) > 1e-10:
        raise RuntimeError(f"Joint expectation forms disagree: weighted={weighted!r}, direct={direct!r}")
    return weighted


def bell_quantity(state: TwoQubitState, axes: BellAxes) -> float:
    """|E(1,2) - E(1,3)| - E(2,3); values above 1 violate the three-axis inequality."""
    e12 = joint_expectation(state, axes.first, axes.second)
    e13 = joint_expectation(state, axes.first, axes.third)
    e23 = joint_expectation(state, axes.second, axes.third)
    return abs(e12 - e13) - e23


# ---------------------------------------------------------------------------
# Reduced states
# ---------------------------------------------------------------------------
def reduce(state: TwoQubitState, which: Union[Particle, str]) -> DensityMatrix2:
    """Partial trace over the particle that is not ``which``."""
    which = Particle(which)
    m = state.matrix
    if which is Particle.A:
        rho = m @ m.conj().T
    else:
        rho = m.T @ m.conj()
    # Hermitian part only; removes rounding noise below the validation tolerance
    return DensityMatrix2((rho + rho.conj().T) / 2.0)


def maximally_mixed() -> DensityMatrix2:
    return DensityMatrix2(np.eye(2, dtype=complex) / 2.0)


def density_product_trace(rho: DensityMatrix2, axis_1: Axis, axis_2: Axis) -> complex:
    """Tr(rho sigma_1 sigma_2); the product of two Pauli components is not Hermitian."""
    return complex(np.trace(rho.matrix @ pauli_component(axis_1) @ pauli_component(axis_2)))


def density_product_expectation(rho: DensityMatrix2, axis_1: Axis, axis_2: Axis) -> float:
    """Real part of Tr(rho sigma_1 sigma_2).

    For the maximally mixed state the imaginary part must vanish; a residue
    above 1e-12 there raises RuntimeError.
    """
    value = density_product_trace(rho, axis_1, axis_2)
    logger.debug(f"Tr(rho s1 s2) = {value.real:.15g} + {value.imag:.3e}i")
    if rho.is_maximally_mixed() and abs(value.imag) > ALGEBRA_TOL:
        raise RuntimeError(f"Imaginary residue {value.imag!r} for the maximally mixed state")
    return value.real


def sign_weighted_overlap_sum(axis_1: Axis, axis_2: Axis) -> float:
    """(1/2) * sum over sign pairs of sign(s1*s2) * |<s1|s2>|^2."""
    kets_1 = dict(zip(SIGNS, axis_eigenstates(axis_1)))
    kets_2 = dict(zip(SIGNS, axis_eigenstates(axis_2)))
    total = sum(s1 * s2 * overlap_prob(kets_1[s1], kets_2[s2]) for s1 in SIGNS for s2 in SIGNS)
    return 0.5 * total


# ---------------------------------------------------------------------------
# Conditioning
# ---------------------------------------------------------------------------
def condition_on(state: TwoQubitState, measured: Union[Particle, str], ket: QubitState) -> Tuple[float, QubitState]:
    """Project ``measured`` onto ``ket`` and return the partner's conditional state.

    Returns:
        (probability of the projection, normalized partner state)

    Raises:
        ImpossibleOutcomeError: the projection has probability below 1e-15.
    """
    measured = Particle(measured)
    m = state.matrix
    bra = ket.vector.conj()
    partner = bra @ m if measured is Particle.A else m @ bra
    prob = float(np.sum(np.abs(partner) ** 2))
    if prob < IMPOSSIBLE_PROB:
        raise ImpossibleOutcomeError(f"Conditioning particle {measured.value} has probability {prob:.3e}")
    return prob, QubitState.from_vector(partner / math.sqrt(prob), normalize=True)
