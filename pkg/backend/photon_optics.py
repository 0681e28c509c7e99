"""
Photon Pair Experiments
=======================

Predictions for entangled photon pairs from down-conversion, evaluated under
both measurement semantics:

  - the two-mode (upper/lower intensity maximum) pair sent through a double
    slit, with the signal fringe visibility conditioned on where the idler was
    detected,
  - the polarization-to-path variant of the same experiment,
  - the circular-polarization rewrite of the polarization pair and the angular
    momentum a signal photon would deliver to a wave plate.

A mode pair is a TwoQubitState whose first factor is the signal photon and
whose second factor is the idler; |+z> encodes the upper maximum (or H) and
|-z> the lower maximum (or V).
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from backend.config import (
    ALGEBRA_TOL,
    DEFAULT_FRINGE_PERIODS,
    DEFAULT_FRINGE_POINTS,
    DEFAULT_SCREEN_SCALE,
    DEFAULT_SLIT_SEPARATION,
    DEFAULT_WAVELENGTH,
)
from backend.entangled_pair import (
    Particle,
    TwoQubitState,
    condition_on,
    expand_in_kets,
    joint_probabilities,
    pair_equal_up_to_global_phase,
    reduce,
)
from backend.measurement_sim import MeasurementModel
from backend.spin_algebra import KET_MINUS_Z, KET_PLUS_Z, QubitState, Z_AXIS, canonical_phase, overlap_prob

logger = logging.getLogger(__name__)

SIGNAL = Particle.A
IDLER = Particle.B

# Path / linear polarization encodings
KET_UPPER = KET_PLUS_Z
KET_LOWER = KET_MINUS_Z
KET_H = KET_PLUS_Z
KET_V = KET_MINUS_Z

_IDLER_PATH = {"u": KET_UPPER, "l": KET_LOWER}
_IDLER_POLARIZATION = {"H": KET_H, "V": KET_V}

# Angular momentum per photon in units of hbar
SPIN_R = 1.0
SPIN_L = -1.0


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ModePairState:
    """Signal/idler pair over the {u, l} x {u, l} mode basis plus its source phase."""

    state: TwoQubitState
    gamma: float = 0.0


@dataclass(frozen=True)
class SlitAmplitudes:
    """Field amplitudes at the upper and lower slit (sub-normalized allowed)."""

    a_u: complex
    a_l: complex

    def __post_init__(self) -> None:
        a_u = complex(self.a_u)
        a_l = complex(self.a_l)
        power = abs(a_u) ** 2 + abs(a_l) ** 2
        if power > 1.0 + ALGEBRA_TOL:
            raise ValueError(f"Slit amplitudes carry more than unit power: {power!r}")
        object.__setattr__(self, "a_u", a_u)
        object.__setattr__(self, "a_l", a_l)

    @property
    def power(self) -> float:
        return abs(self.a_u) ** 2 + abs(self.a_l) ** 2

    def as_dict(self) -> Dict[str, float]:
        return {
            "a_u_re": self.a_u.real,
            "a_u_im": self.a_u.imag,
            "a_l_re": self.a_l.real,
            "a_l_im": self.a_l.imag,
        }


@dataclass(frozen=True)
class SlitGeometry:
    """Slit separation d, wavelength and far-field scale F (all in meters)."""

    slit_separation: float = DEFAULT_SLIT_SEPARATION
    wavelength: float = DEFAULT_WAVELENGTH
    screen_scale: float = DEFAULT_SCREEN_SCALE

    def __post_init__(self) -> None:
        for name in ("slit_separation", "wavelength", "screen_scale"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def fringe_period(self) -> float:
        """Screen distance between neighbouring maxima, lambda*F/d."""
        return self.wavelength * self.screen_scale / self.slit_separation

    def as_dict(self) -> Dict[str, float]:
        return {
            "slit_separation_m": self.slit_separation,
            "wavelength_m": self.wavelength,
            "screen_scale_m": self.screen_scale,
        }


@dataclass(frozen=True, eq=False)
class FringePattern:
    positions: np.ndarray
    intensities: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.positions, dtype=float)
        y = np.asarray(self.intensities, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("positions and intensities must be 1-d arrays of equal length")
        if np.any(y < 0.0):
            raise ValueError("intensities must be non-negative")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "intensities", y)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x_m": self.positions, "intensity": self.intensities})

    def extracted_visibility(self) -> float:
        """(Imax - Imin)/(Imax + Imin) read off the sampled pattern."""
        i_max = float(self.intensities.max())
        i_min = float(self.intensities.min())
        if i_max + i_min <= 0.0:
            raise ValueError("Pattern has no intensity; visibility is undefined")
        return (i_max - i_min) / (i_max + i_min)

    def integrated_intensity(self) -> float:
        return float(trapezoid(self.intensities, self.positions))


@dataclass(frozen=True)
class AngularMomentumPrediction:
    """Distribution of the signal photon's angular momentum (units of hbar)."""

    per_shot_values: Tuple[float, ...]
    probabilities: Tuple[float, ...]
    mean: float

    def as_dict(self) -> Dict[str, object]:
        return {
            "per_shot": {f"{v:+g}": p for v, p in zip(self.per_shot_values, self.probabilities)},
            "mean_hbar": self.mean,
        }


# ---------------------------------------------------------------------------
# Two-mode pair through a double slit
# ---------------------------------------------------------------------------
def tem01_state(gamma: float = 0.0) -> ModePairState:
    """(|u>_s|u>_i + e^{i gamma}|l>_s|l>_i)/sqrt(2)."""
    r = 1.0 / math.sqrt(2.0)
    return ModePairState(TwoQubitState((r, 0.0, 0.0, r * cmath.exp(1j * gamma))), float(gamma))


def near_field_probabilities(mode: ModePairState) -> Dict[str, float]:
    """Joint detection probabilities of the two photons imaged onto the slit plane."""
    dist = joint_probabilities(mode.state, Z_AXIS, Z_AXIS)
    return dict(zip(("uu", "ul", "lu", "ll"), dist.probabilities))


def _idler_ket(idler: str, table: Dict[str, QubitState]) -> QubitState:
    try:
        return table[idler]
    except KeyError:
        raise ValueError(f"Unknown idler outcome {idler!r}; expected one of {sorted(table)}") from None


def _signal_amplitudes(mode: ModePairState, idler_ket: QubitState, model: MeasurementModel) -> SlitAmplitudes:
    model = MeasurementModel.from_flag(model)
    if model is MeasurementModel.NONLOCAL_COLLAPSE:
        _, partner = condition_on(mode.state, IDLER, idler_ket)
        partner = canonical_phase(partner)
        return SlitAmplitudes(partner.amp_plus_z, partner.amp_minus_z)
    # The idler detection leaves the signal untouched: both paths keep their
    # own power and the source phase between them.
    rho = reduce(mode.state, SIGNAL).matrix
    p_u = float(np.real(rho[0, 0]))
    p_l = float(np.real(rho[1, 1]))
    return SlitAmplitudes(math.sqrt(max(0.0, p_u)), cmath.exp(1j * mode.gamma) * math.sqrt(max(0.0, p_l)))


def signal_amplitudes_after_idler(mode: ModePairState, idler_outcome: str, model: MeasurementModel) -> SlitAmplitudes:
    """Signal amplitudes at the two slits once the idler was seen at ``u`` or ``l``."""
    amps = _signal_amplitudes(mode, _idler_ket(idler_outcome, _IDLER_PATH), model)
    logger.debug(f"Signal amplitudes after idler={idler_outcome} ({MeasurementModel.from_flag(model).value}): {amps}")
    return amps


def polarization_slit_amplitudes(idler_outcome: str, model: MeasurementModel) -> SlitAmplitudes:
    """Signal amplitudes when its H part feeds the upper slit and its V part,
    rotated to H by a half-wave plate, feeds the lower slit."""
    mode = ModePairState(polarization_state(), 0.0)
    return _signal_amplitudes(mode, _idler_ket(idler_outcome, _IDLER_POLARIZATION), model)


def far_field_pattern(
    amps: SlitAmplitudes,
    geom: SlitGeometry,
    n_points: int = DEFAULT_FRINGE_POINTS,
    span: Optional[float] = None,
) -> FringePattern:
    """Point-slit far-field intensity on a uniform grid centered at x = 0.

    I(x) = |a_u exp(i*pi*d*x/(lambda*F)) + a_l exp(-i*pi*d*x/(lambda*F))|^2.
    ``span`` defaults to DEFAULT_FRINGE_PERIODS fringe periods.
    """
    if int(n_points) < 2:
        raise ValueError(f"n_points must be at least 2, got {n_points}")
    if span is None:
        span = DEFAULT_FRINGE_PERIODS * geom.fringe_period
    if not (math.isfinite(span) and span > 0.0):
        raise ValueError(f"span must be strictly positive, got {span!r}")
    x = np.linspace(-span / 2.0, span / 2.0, int(n_points))
    k = math.pi * geom.slit_separation / (geom.wavelength * geom.screen_scale)
    field = amps.a_u * np.exp(1j * k * x) + amps.a_l * np.exp(-1j * k * x)
    return FringePattern(x, np.abs(field) ** 2)


def visibility(amps: SlitAmplitudes) -> float:
    """2|a_u||a_l| / (|a_u|^2 + |a_l|^2)."""
    power = amps.power
    if power == 0.0:
        raise ValueError("Visibility is undefined when both slit amplitudes are zero")
    return min(1.0, 2.0 * abs(amps.a_u) * abs(amps.a_l) / power)


def visibility_bound(which_path_info: float, form: str = "linear") -> float:
    """Largest fringe visibility compatible with which-path information D.

    ``linear`` gives 1 - D, so 99% which-slit information leaves 1% visibility;
    ``quadratic`` gives the complementarity bound sqrt(1 - D^2).
    """
    d = float(which_path_info)
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"which-path information must lie in [0, 1], got {which_path_info!r}")
    if form == "linear":
        return 1.0 - d
    if form == "quadratic":
        return math.sqrt(1.0 - d * d)
    raise ValueError(f"Unknown bound form {form!r}; expected 'linear' or 'quadratic'")


# ---------------------------------------------------------------------------
# Polarization pair and circular polarization
# ---------------------------------------------------------------------------
def polarization_state() -> TwoQubitState:
    """(|H>_s|H>_i + |V>_s|V>_i)/sqrt(2)."""
    r = 1.0 / math.sqrt(2.0)
    return TwoQubitState((r, 0.0, 0.0, r))


def circular_basis(convention: str = "standard") -> Tuple[QubitState, QubitState]:
    """(|R>, |L>) over (H, V).

    standard: |L> = (|H> - i|V>)/sqrt(2), |R> = (|H> + i|V>)/sqrt(2);
    opposite swaps the two handedness labels.
    """
    r = 1.0 / math.sqrt(2.0)
    plus = QubitState(r, 1j * r)
    minus = QubitState(r, -1j * r)
    if convention == "standard":
        return plus, minus
    if convention == "opposite":
        return minus, plus
    raise ValueError(f"Unknown circular convention {convention!r}; expected 'standard' or 'opposite'")


def circular_joint_probabilities(state: Optional[TwoQubitState] = None, convention: str = "standard") -> Dict[str, float]:
    """Joint R/L detection probabilities of a polarization pair (keys RR, RL, LR, LL)."""
    state = polarization_state() if state is None else state
    basis = circular_basis(convention)
    coeffs = expand_in_kets(state, basis, basis)
    return dict(zip(("RR", "RL", "LR", "LL"), (float(abs(c) ** 2) for c in coeffs)))


def cp_rewrite_check(perturbation: float = 0.0, convention: str = "standard") -> bool:
    """Does the polarization pair read (|R>_s|L>_i + |L>_s|R>_i)/sqrt(2) in the circular basis?

    ``perturbation`` is added to the |H>_s|H>_i amplitude (then renormalized)
    to probe how sharp the check is.
    """
    vector = polarization_state().vector
    vector[0] += perturbation
    state = TwoQubitState.from_vector(vector, normalize=True)
    basis = circular_basis(convention)
    rewritten = TwoQubitState.from_vector(expand_in_kets(state, basis, basis), normalize=True)
    r = 1.0 / math.sqrt(2.0)
    return pair_equal_up_to_global_phase(rewritten, TwoQubitState((0.0, r, r, 0.0)), ALGEBRA_TOL)


def predicted_signal_angular_momentum(idler_outcome: str, model: MeasurementModel) -> AngularMomentumPrediction:
    """Angular momentum the signal photon delivers once the idler was found L or R.

    Collapse: the signal is left in the opposite-handed state, so every shot
    carries the same sign. Local: the signal keeps its own unpolarized
    statistics and the shots split evenly.
    """
    model = MeasurementModel.from_flag(model)
    ket_r, ket_l = circular_basis()
    idler_kets = {"R": ket_r, "L": ket_l}
    if idler_outcome not in idler_kets:
        raise ValueError(f"Unknown idler outcome {idler_outcome!r}; expected 'L' or 'R'")
    state = polarization_state()
    if model is MeasurementModel.NONLOCAL_COLLAPSE:
        _, signal = condition_on(state, IDLER, idler_kets[idler_outcome])
        p_r = overlap_prob(ket_r, signal)
    else:
        rho = reduce(state, SIGNAL).matrix
        p_r = float(np.real(np.vdot(ket_r.vector, rho @ ket_r.vector)))
    p_l = 1.0 - p_r
    mean = SPIN_R * p_r + SPIN_L * p_l
    return AngularMomentumPrediction((SPIN_R, SPIN_L), (p_r, p_l), mean)
