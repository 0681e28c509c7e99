"""
Single-Qubit Spin Algebra
=========================

Exact complex arithmetic for spin-1/2 states written in the |+z>, |-z> basis:
measurement axes on the Bloch sphere, their Pauli components and eigenstates,
projections, and state comparison up to a global phase.

All values are immutable; every function here is pure.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from backend.config import ALGEBRA_TOL, ANGLE_DECIMALS, IMPOSSIBLE_PROB

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# 2x2 complex matrix, row-major
Operator2 = np.ndarray


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


IDENTITY = _frozen(np.eye(2, dtype=complex))
PAULI_X = _frozen(np.array([[0, 1], [1, 0]], dtype=complex))
PAULI_Y = _frozen(np.array([[0, -1j], [1j, 0]], dtype=complex))
PAULI_Z = _frozen(np.array([[1, 0], [0, -1]], dtype=complex))


class ImpossibleOutcomeError(ValueError):
    """Raised when a projection targets an outcome of (numerically) zero probability."""


# ---------------------------------------------------------------------------
# Axis
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Axis:
    """Measurement direction on the unit sphere.

    Fields:
      - polar: angle from +z, radians in [0, pi]
      - azimuth: angle from +x in the xy-plane, radians in [0, 2*pi)

    At the poles the azimuth carries no physical meaning and is stored as 0.
    """

    polar: float
    azimuth: float = 0.0

    def __post_init__(self) -> None:
        polar = float(self.polar)
        azimuth = float(self.azimuth)
        if not (math.isfinite(polar) and math.isfinite(azimuth)):
            raise ValueError(f"Axis angles must be finite, got polar={polar}, azimuth={azimuth}")
        # acos and degree conversions can overshoot the closed range by an ulp
        if -ALGEBRA_TOL <= polar <= 0.0:
            polar = 0.0
        elif math.pi < polar <= math.pi + ALGEBRA_TOL:
            polar = math.pi
        if polar < 0.0 or polar > math.pi:
            raise ValueError(f"Axis polar angle must lie in [0, pi], got {polar}")
        azimuth = azimuth % TWO_PI
        if azimuth >= TWO_PI:
            azimuth = 0.0
        if polar == 0.0 or polar == math.pi:
            azimuth = 0.0
        object.__setattr__(self, "polar", polar)
        object.__setattr__(self, "azimuth", azimuth)

    @classmethod
    def from_degrees(cls, alpha_deg: float, beta_deg: float = 0.0) -> "Axis":
        return cls(math.radians(alpha_deg), math.radians(beta_deg))

    @classmethod
    def from_vector(cls, vector) -> "Axis":
        """Build an axis pointing along a non-zero 3-vector."""
        v = np.asarray(vector, dtype=float)
        norm = float(np.linalg.norm(v))
        if v.shape != (3,) or norm == 0.0:
            raise ValueError("Axis.from_vector needs a non-zero 3-vector")
        x, y, z = v / norm
        polar = math.acos(max(-1.0, min(1.0, z)))
        azimuth = math.atan2(y, x) if math.hypot(x, y) > 0.0 else 0.0
        return cls(polar, azimuth)

    def unit_vector(self) -> np.ndarray:
        s = math.sin(self.polar)
        return np.array([s * math.cos(self.azimuth), s * math.sin(self.azimuth), math.cos(self.polar)])

    def to_degrees(self) -> Dict[str, float]:
        return {
            "alpha_deg": round(math.degrees(self.polar), ANGLE_DECIMALS),
            "beta_deg": round(math.degrees(self.azimuth), ANGLE_DECIMALS),
        }


Z_AXIS = Axis(0.0, 0.0)
X_AXIS = Axis(math.pi / 2, 0.0)
Y_AXIS = Axis(math.pi / 2, math.pi / 2)


def angle_between(a: Axis, b: Axis) -> float:
    """Angle between two axes in [0, pi], from the unit-vector dot product."""
    dot = float(np.dot(a.unit_vector(), b.unit_vector()))
    return math.acos(max(-1.0, min(1.0, dot)))


def theta_axis(theta: float) -> Axis:
    """Axis at angle theta from +z inside the yz-plane.

    Non-negative angles lean towards +y (azimuth pi/2), negative ones towards
    -y (azimuth 3*pi/2). theta is first reduced modulo 2*pi into [-pi, pi].
    """
    t = math.remainder(float(theta), TWO_PI)
    if t >= 0.0:
        return Axis(t, math.pi / 2)
    return Axis(-t, 3.0 * math.pi / 2)


def random_axis(rng: np.random.Generator) -> Axis:
    """Axis drawn uniformly from the unit sphere."""
    while True:
        v = rng.normal(size=3)
        if np.linalg.norm(v) > 1e-9:
            return Axis.from_vector(v)


# ---------------------------------------------------------------------------
# QubitState
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class QubitState:
    """Normalized spin state amp_plus_z|+z> + amp_minus_z|-z>."""

    amp_plus_z: complex
    amp_minus_z: complex

    def __post_init__(self) -> None:
        a = complex(self.amp_plus_z)
        b = complex(self.amp_minus_z)
        norm = abs(a) ** 2 + abs(b) ** 2
        if abs(norm - 1.0) > ALGEBRA_TOL:
            raise ValueError(f"QubitState must be normalized, |a|^2 + |b|^2 = {norm!r}")
        object.__setattr__(self, "amp_plus_z", a)
        object.__setattr__(self, "amp_minus_z", b)

    @classmethod
    def from_vector(cls, vector, normalize: bool = False) -> "QubitState":
        v = np.asarray(vector, dtype=complex).reshape(2)
        if normalize:
            norm = float(np.linalg.norm(v))
            if norm == 0.0:
                raise ValueError("Cannot normalize the zero vector")
            v = v / norm
        return cls(complex(v[0]), complex(v[1]))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_plus_z, self.amp_minus_z], dtype=complex)

    def with_phase(self, phase: float) -> "QubitState":
        """Same ray, multiplied by exp(i*phase)."""
        u = cmath.exp(1j * phase)
        return QubitState(u * self.amp_plus_z, u * self.amp_minus_z)


KET_PLUS_Z = QubitState(1.0, 0.0)
KET_MINUS_Z = QubitState(0.0, 1.0)


def canonical_phase(state: QubitState) -> QubitState:
    """Fix the global phase so the first non-negligible amplitude is real and positive."""
    for amp in (state.amp_plus_z, state.amp_minus_z):
        if abs(amp) > ALGEBRA_TOL:
            u = amp.conjugate() / abs(amp)
            return QubitState(u * state.amp_plus_z, u * state.amp_minus_z)
    return state


# ---------------------------------------------------------------------------
# Eigenstates and operators
# ---------------------------------------------------------------------------
def axis_eigenstates(axis: Axis) -> Tuple[QubitState, QubitState]:
    """Eigenstates of the Pauli component along ``axis``.

    Returns:
        (|+n>, |-n>) with |+n> = (cos(a/2), sin(a/2) e^{ib}) and
        |-n> = (-sin(a/2) e^{-ib}, cos(a/2)) for polar a and azimuth b.
    """
    c = math.cos(axis.polar / 2.0)
    s = math.sin(axis.polar / 2.0)
    phase = cmath.exp(1j * axis.azimuth)
    plus = QubitState(c, s * phase)
    minus = QubitState(-s * phase.conjugate(), c)
    return plus, minus


def theta_eigenstates(theta: float) -> Tuple[QubitState, QubitState]:
    """The yz-plane pair |+theta> = cos|+z> + i sin|-z>, |-theta> = i sin|+z> + cos|-z>."""
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    return QubitState(c, 1j * s), QubitState(1j * s, c)


def pauli_component(axis: Axis) -> Operator2:
    """sigma_n = n_x*sigma_x + n_y*sigma_y + n_z*sigma_z."""
    nx, ny, nz = axis.unit_vector()
    return nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z


def projector(ket: QubitState) -> Operator2:
    v = ket.vector
    return np.outer(v, v.conj())


def inner(bra: QubitState, ket: QubitState) -> complex:
    """<bra|ket>, conjugate-linear in ``bra``."""
    return complex(np.vdot(bra.vector, ket.vector))


def overlap_prob(a: QubitState, b: QubitState) -> float:
    """|<a|b>|^2, clipped into [0, 1]."""
    return min(1.0, abs(inner(a, b)) ** 2)


def equal_up_to_global_phase(a: QubitState, b: QubitState, tol: float = ALGEBRA_TOL) -> bool:
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    return abs(inner(a, b)) >= 1.0 - tol


def project(state: QubitState, onto: QubitState) -> Tuple[float, QubitState]:
    """Measurement-induced projection of ``state`` onto ``onto``.

    Returns:
        (probability of the outcome, post-measurement state) where the
        post-measurement state is ``onto`` itself.

    Raises:
        ImpossibleOutcomeError: the outcome has probability below 1e-15.
    """
    prob = overlap_prob(onto, state)
    if prob < IMPOSSIBLE_PROB:
        raise ImpossibleOutcomeError(f"Projection has probability {prob:.3e}; outcome is impossible")
    return prob, onto
