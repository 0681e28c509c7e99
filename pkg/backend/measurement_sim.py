"""
Measurement Semantics Simulator
===============================

Seeded Monte Carlo sampling of joint spin measurements under two semantics:

  - NONLOCAL_COLLAPSE: measuring particle a projects the composite state, and
    particle b is then measured in the collapsed conditional state.
  - LOCAL_INDEPENDENT: no intermediate state is ever formed for b; the joint
    outcome is drawn in one step from the final joint projection.

On top of the sampler sit the trial records, coincidence count tables, the
geometric-mean normalized coincidence estimator and the replica estimate of a
local sigma_z*sigma_n measurement on particle a.

Random streams: trials are grouped into blocks of BLOCK_SIZE; block k draws from
Generator(SFC64(SeedSequence(seed, spawn_key=(k,)))). The same seed therefore
gives the same trials whatever the number of workers.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Mapping, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import chi2_contingency

from backend.config import ALGEBRA_TOL, BLOCK_SIZE, IMPOSSIBLE_PROB, MAX_SEED, SIGMA_BOUND
from backend.entangled_pair import (
    OUTCOMES,
    SIGNS,
    JointOutcome,
    Particle,
    TwoQubitState,
    condition_on,
    joint_probabilities,
    reduce,
)
from backend.spin_algebra import Axis, ImpossibleOutcomeError, axis_eigenstates, overlap_prob

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = ["trial", "sa", "sb", "alpha_a_deg", "beta_a_deg", "alpha_b_deg", "beta_b_deg", "model", "seed"]
COUNT_KEYS = ("n_trials", "n_a_plus", "n_a_minus", "n_b_plus", "n_b_minus", "c_pp", "c_pm", "c_mp", "c_mm")


class MeasurementModel(str, Enum):
    """Measurement semantics used when sampling joint outcomes."""

    NONLOCAL_COLLAPSE = "collapse"
    LOCAL_INDEPENDENT = "local"

    @classmethod
    def from_flag(cls, value: Union[str, "MeasurementModel"]) -> "MeasurementModel":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if text in (member.value, member.name.lower()):
                return member
        raise ValueError(f"Unknown measurement model {value!r}; expected 'local' or 'collapse'")


class UndefinedEstimateError(ValueError):
    """A coincidence estimate whose single-detector denominator is zero."""

    def __init__(self, channel: str, message: str):
        super().__init__(f"channel {channel}: {message}")
        self.channel = channel


class CountTableError(ValueError):
    """Malformed or inconsistent count table; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# Records and tables
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RunConfig:
    """Parameters of one Monte Carlo run."""

    seed: int
    n_trials: int
    model: MeasurementModel
    axes: Tuple[Axis, Axis]

    def __post_init__(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if isinstance(self.n_trials, bool) or not isinstance(self.n_trials, (int, np.integer)):
            raise ValueError(f"n_trials must be an integer, got {self.n_trials!r}")
        if int(self.n_trials) < 1:
            raise ValueError(f"n_trials must be at least 1, got {self.n_trials}")
        axes = tuple(self.axes)
        if len(axes) != 2 or not all(isinstance(a, Axis) for a in axes):
            raise ValueError("axes must be a pair of Axis values")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "n_trials", int(self.n_trials))
        object.__setattr__(self, "model", MeasurementModel.from_flag(self.model))
        object.__setattr__(self, "axes", axes)

    @property
    def axis_a(self) -> Axis:
        return self.axes[0]

    @property
    def axis_b(self) -> Axis:
        return self.axes[1]

    def to_dict(self) -> Dict[str, Any]:
        a = self.axis_a.to_degrees()
        b = self.axis_b.to_degrees()
        return {
            "seed": self.seed,
            "n_trials": self.n_trials,
            "model": self.model.value,
            "alpha_a_deg": a["alpha_deg"],
            "beta_a_deg": a["beta_deg"],
            "alpha_b_deg": b["alpha_deg"],
            "beta_b_deg": b["beta_deg"],
        }


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    outcome: JointOutcome
    axis_a: Axis
    axis_b: Axis
    model: MeasurementModel


@dataclass(frozen=True)
class EstimatorResult:
    value: float
    std_error: float
    n_trials: int

    def __post_init__(self) -> None:
        if not self.std_error >= 0.0:
            raise ValueError(f"std_error must be non-negative, got {self.std_error!r}")

    def as_dict(self) -> Dict[str, float]:
        return {"value": self.value, "std_error": self.std_error, "n_trials": self.n_trials}


@dataclass(frozen=True)
class CountTable:
    """Single-detector counts and the four coincidence counts of one run."""

    n_trials: int
    n_a_plus: int
    n_a_minus: int
    n_b_plus: int
    n_b_minus: int
    c_pp: int
    c_pm: int
    c_mp: int
    c_mm: int

    def __post_init__(self) -> None:
        for key in COUNT_KEYS:
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise CountTableError(key, f"must be an integer, got {value!r}")
            if value < 0:
                raise CountTableError(key, f"must be non-negative, got {value}")
            object.__setattr__(self, key, int(value))
        if self.n_trials < 1:
            raise CountTableError("n_trials", "must be at least 1")
        if self.n_a_plus + self.n_a_minus != self.n_trials:
            raise CountTableError("n_a_plus", "n_a_plus + n_a_minus must equal n_trials")
        if self.n_b_plus + self.n_b_minus != self.n_trials:
            raise CountTableError("n_b_plus", "n_b_plus + n_b_minus must equal n_trials")
        if self.c_pp + self.c_pm + self.c_mp + self.c_mm != self.n_trials:
            raise CountTableError("c_pp", "coincidence counts must sum to n_trials")
        if self.c_pp + self.c_pm != self.n_a_plus:
            raise CountTableError("n_a_plus", "inconsistent with c_pp + c_pm")
        if self.c_pp + self.c_mp != self.n_b_plus:
            raise CountTableError("n_b_plus", "inconsistent with c_pp + c_mp")

    @classmethod
    def from_counts(cls, coincidences) -> "CountTable":
        """Build a table from coincidence counts in OUTCOMES order (pp, pm, mp, mm)."""
        c_pp, c_pm, c_mp, c_mm = (int(c) for c in coincidences)
        return cls(
            n_trials=c_pp + c_pm + c_mp + c_mm,
            n_a_plus=c_pp + c_pm,
            n_a_minus=c_mp + c_mm,
            n_b_plus=c_pp + c_mp,
            n_b_minus=c_pm + c_mm,
            c_pp=c_pp, c_pm=c_pm, c_mp=c_mp, c_mm=c_mm,
        )

    @classmethod
    def from_signs(cls, sa: np.ndarray, sb: np.ndarray) -> "CountTable":
        index = 2 * (np.asarray(sa) < 0) + (np.asarray(sb) < 0)
        return cls.from_counts(np.bincount(index, minlength=4))

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "CountTable":
        if not isinstance(payload, Mapping):
            raise CountTableError("<root>", "expected a JSON object")
        values = {}
        for key in COUNT_KEYS:
            if key not in payload:
                raise CountTableError(key, "missing")
            value = payload[key]
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            values[key] = value
        return cls(**values)

    def to_dict(self) -> Dict[str, int]:
        return {key: getattr(self, key) for key in COUNT_KEYS}

    def coincidence(self, outcome: Union[JointOutcome, Tuple[int, int]]) -> int:
        label = outcome.label if isinstance(outcome, JointOutcome) else JointOutcome(*outcome).label
        return getattr(self, f"c_{label}")

    def n_a(self, sign: int) -> int:
        return self.n_a_plus if sign > 0 else self.n_a_minus

    def n_b(self, sign: int) -> int:
        return self.n_b_plus if sign > 0 else self.n_b_minus

    def as_array(self) -> np.ndarray:
        return np.array([self.c_pp, self.c_pm, self.c_mp, self.c_mm], dtype=np.int64)

    def merge(self, other: "CountTable") -> "CountTable":
        return CountTable.from_counts(self.as_array() + other.as_array())


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------
def block_generator(seed: int, block: int) -> np.random.Generator:
    """Generator for trial block ``block`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(seed, spawn_key=(block,))))


def derive_seed(seed: int, k: int) -> int:
    """Independent 64-bit child seed number ``k`` of ``seed``."""
    return int(np.random.SeedSequence(seed, spawn_key=(k,)).generate_state(1, dtype=np.uint64)[0])


def _blocks(n_trials: int) -> List[Tuple[int, int, int]]:
    return [(k, start, min(BLOCK_SIZE, n_trials - start)) for k, start in enumerate(range(0, n_trials, BLOCK_SIZE))]


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------
def _born_marginal(state: TwoQubitState, axis_a: Axis) -> float:
    """P(s_a = +1) from the reduced state of particle a."""
    plus, _ = axis_eigenstates(axis_a)
    rho = reduce(state, Particle.A).matrix
    v = plus.vector
    return float(min(1.0, max(0.0, np.real(np.vdot(v, rho @ v)))))


def _collapsed_plus_probability(state: TwoQubitState, axis_a: Axis, axis_b: Axis, s_a: int) -> float:
    """P(s_b = +1) for b collapsed by outcome s_a on a; 0.5 for a branch that cannot occur."""
    kets_a = dict(zip(SIGNS, axis_eigenstates(axis_a)))
    plus_b, _ = axis_eigenstates(axis_b)
    try:
        _, partner = condition_on(state, Particle.A, kets_a[s_a])
    except ImpossibleOutcomeError:
        return 0.5
    return overlap_prob(plus_b, partner)


def _sample_signs(
    state: TwoQubitState,
    axis_a: Axis,
    axis_b: Axis,
    model: MeasurementModel,
    rng: np.random.Generator,
    n: int,
) -> Tuple[np.ndarray, np.ndarray]:
    if model is MeasurementModel.LOCAL_INDEPENDENT:
        cdf = np.cumsum(joint_probabilities(state, axis_a, axis_b).probabilities)
        cdf[-1] = 1.0
        index = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), 3)
        sa = np.where(index < 2, 1, -1).astype(np.int8)
        sb = np.where(index % 2 == 0, 1, -1).astype(np.int8)
        return sa, sb

    p_a_plus = _born_marginal(state, axis_a)
    p_b_plus = {s: _collapsed_plus_probability(state, axis_a, axis_b, s) for s in SIGNS}
    sa = np.where(rng.random(n) < p_a_plus, 1, -1).astype(np.int8)
    threshold = np.where(sa > 0, p_b_plus[1], p_b_plus[-1])
    sb = np.where(rng.random(n) < threshold, 1, -1).astype(np.int8)
    return sa, sb


def sample_joint(
    state: TwoQubitState,
    axis_a: Axis,
    axis_b: Axis,
    model: MeasurementModel,
    rng: np.random.Generator,
) -> JointOutcome:
    """Draw one joint outcome under the given measurement semantics."""
    if not isinstance(rng, np.random.Generator):
        raise TypeError(f"rng must be a numpy Generator, got {type(rng).__name__}")
    sa, sb = _sample_signs(state, axis_a, axis_b, MeasurementModel.from_flag(model), rng, 1)
    return JointOutcome(int(sa[0]), int(sb[0]))


def simulate_signs(config: RunConfig, state: TwoQubitState, max_workers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Sign arrays (s_a, s_b) of every trial of a run, in trial order."""
    blocks = _blocks(config.n_trials)

    def work(block: Tuple[int, int, int]) -> Tuple[np.ndarray, np.ndarray]:
        k, start, count = block
        logger.debug(f"Sampling block {k}: trials {start}..{start + count - 1}")
        return _sample_signs(state, config.axis_a, config.axis_b, config.model, block_generator(config.seed, k), count)

    if max_workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    sa = np.concatenate([p[0] for p in parts])
    sb = np.concatenate([p[1] for p in parts])
    return sa, sb


def count_trials(config: RunConfig, state: TwoQubitState, max_workers: int = 1) -> CountTable:
    """CountTable of a run without materializing per-trial records."""
    table = CountTable.from_signs(*simulate_signs(config, state, max_workers))
    logger.info(f"Counted {config.n_trials} trials (model={config.model.value}, seed={config.seed})")
    return table


def run_trials(config: RunConfig, state: TwoQubitState, max_workers: int = 1) -> Tuple[List[TrialRecord], CountTable]:
    """Run a seeded experiment and return every trial plus its count table."""
    sa, sb = simulate_signs(config, state, max_workers)
    records = [
        TrialRecord(i, JointOutcome(int(a), int(b)), config.axis_a, config.axis_b, config.model)
        for i, (a, b) in enumerate(zip(sa.tolist(), sb.tolist()))
    ]
    table = CountTable.from_signs(sa, sb)
    logger.info(f"Ran {config.n_trials} trials (model={config.model.value}, seed={config.seed})")
    return records, table


def trials_frame(records: List[TrialRecord], seed: int) -> pd.DataFrame:
    """Trial records as a table with the TRIAL_COLUMNS layout (signs as '+1'/'-1')."""
    rows = []
    for rec in records:
        a = rec.axis_a.to_degrees()
        b = rec.axis_b.to_degrees()
        rows.append({
            "trial": rec.trial_index,
            "sa": f"{rec.outcome.s_a:+d}",
            "sb": f"{rec.outcome.s_b:+d}",
            "alpha_a_deg": f"{a['alpha_deg']:.9f}",
            "beta_a_deg": f"{a['beta_deg']:.9f}",
            "alpha_b_deg": f"{b['alpha_deg']:.9f}",
            "beta_b_deg": f"{b['beta_deg']:.9f}",
            "model": rec.model.value,
            "seed": seed,
        })
    return pd.DataFrame(rows, columns=TRIAL_COLUMNS)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------
def coincidence_estimate(table: CountTable, s_a: int, s_b: int) -> EstimatorResult:
    """C(s_a, s_b) / sqrt(N_a(s_a) * N_b(s_b)).

    The geometric-mean normalization estimates |<S_z|S_n>|^2 only when both
    single-detector splits are balanced, as they are for the singlet.

    Raises:
        UndefinedEstimateError: one of the two channels never fired.
    """
    outcome = JointOutcome(s_a, s_b)
    denominator = table.n_a(s_a) * table.n_b(s_b)
    if denominator == 0:
        raise UndefinedEstimateError(
            outcome.label,
            f"no detections (N_a({s_a:+d})={table.n_a(s_a)}, N_b({s_b:+d})={table.n_b(s_b)})",
        )
    scale = math.sqrt(denominator)
    n = table.n_trials
    c = table.coincidence(outcome)
    p = c / n
    std_error = math.sqrt(n * p * (1.0 - p)) / scale
    return EstimatorResult(c / scale, std_error, n)


def balanced_marginals(table: CountTable, sigma: float = SIGMA_BOUND) -> bool:
    """Both single-detector splits within ``sigma`` binomial errors of one half."""
    n = table.n_trials
    bound = sigma * math.sqrt(n) / 2.0
    return abs(table.n_a_plus - n / 2.0) <= bound and abs(table.n_b_plus - n / 2.0) <= bound


def replica_local_expectation(table: CountTable) -> EstimatorResult:
    """Estimate of a local sigma_z*sigma_n measurement on particle a.

    Particle b's counts stand in for the unavailable second measurement on a
    (N_{+n}^b = N_{-n}^a), so each channel enters with its sign flipped:
    value = -(1/2) * sum sign(s_a*s_b) * C(s_a, s_b)/sqrt(N_a N_b).

    When a detector never fired its channels hold no coincidences and are left
    out; the 1/2 prefactor is then replaced by 1/(sum of remaining estimates).
    """
    estimates: Dict[JointOutcome, EstimatorResult] = {}
    for outcome in OUTCOMES:
        try:
            estimates[outcome] = coincidence_estimate(table, outcome.s_a, outcome.s_b)
        except UndefinedEstimateError:
            if table.coincidence(outcome) != 0:
                raise
            logger.debug(f"Channel {outcome.label} has an empty detector and no coincidences; skipped")

    if len(estimates) == len(OUTCOMES):
        prefactor = 0.5
    else:
        total = sum(e.value for e in estimates.values())
        if total <= 0.0:
            raise UndefinedEstimateError("all", "no defined channel carries coincidences")
        prefactor = 1.0 / total

    if not balanced_marginals(table):
        logger.warning(
            "Single-detector counts are not balanced; the geometric-mean normalization "
            "does not estimate the replica overlap for this table"
        )

    value = -prefactor * sum(o.product * e.value for o, e in estimates.items())
    std_error = prefactor * math.sqrt(sum(e.std_error ** 2 for e in estimates.values()))
    return EstimatorResult(value, std_error, table.n_trials)


def empirical_correlation(table: CountTable) -> EstimatorResult:
    """Mean of s_a*s_b over the run, with standard error sqrt((1 - m^2)/N)."""
    n = table.n_trials
    mean = (table.c_pp + table.c_mm - table.c_pm - table.c_mp) / n
    return EstimatorResult(mean, math.sqrt(max(0.0, 1.0 - mean * mean) / n), n)


def replica_agreement(table: CountTable, sigma: float = SIGMA_BOUND) -> Dict[str, Any]:
    """Compare the replica estimate with minus the directly measured correlation."""
    replica = replica_local_expectation(table)
    direct = empirical_correlation(table)
    difference = replica.value + direct.value
    combined = math.hypot(replica.std_error, direct.std_error)
    agrees = abs(difference) <= (sigma * combined if combined > 0.0 else ALGEBRA_TOL)
    return {
        "replica": replica.as_dict(),
        "direct": direct.as_dict(),
        "difference": difference,
        "combined_std_error": combined,
        "agrees": bool(agrees),
    }


def analytic_coincidence_rate(state: TwoQubitState, axis_a: Axis, axis_b: Axis, s_a: int, s_b: int) -> float:
    """Large-N limit of coincidence_estimate: P(s_a, s_b)/sqrt(P_a(s_a) P_b(s_b))."""
    dist = joint_probabilities(state, axis_a, axis_b)
    outcome = JointOutcome(s_a, s_b)
    denominator = dist.marginal_a(s_a) * dist.marginal_b(s_b)
    if denominator < IMPOSSIBLE_PROB:
        raise UndefinedEstimateError(outcome.label, "marginal probability is zero")
    return dist[outcome] / math.sqrt(denominator)


# ---------------------------------------------------------------------------
# Semantics comparison
# ---------------------------------------------------------------------------
def model_total_variation(state: TwoQubitState, axis_a: Axis, axis_b: Axis) -> float:
    """Total-variation distance between the joint laws of the two semantics.

    The collapse law is built as marginal(a) x conditional(b | collapsed
    state); the local law is the squared expansion coefficients.
    """
    direct = joint_probabilities(state, axis_a, axis_b)
    kets_a = dict(zip(SIGNS, axis_eigenstates(axis_a)))
    kets_b = dict(zip(SIGNS, axis_eigenstates(axis_b)))
    rho_a = reduce(state, Particle.A).matrix
    distance = 0.0
    for outcome in OUTCOMES:
        ket_a = kets_a[outcome.s_a].vector
        marginal = float(np.real(np.vdot(ket_a, rho_a @ ket_a)))
        try:
            _, partner = condition_on(state, Particle.A, kets_a[outcome.s_a])
            chained = marginal * overlap_prob(kets_b[outcome.s_b], partner)
        except ImpossibleOutcomeError:
            chained = 0.0
        distance += abs(chained - direct[outcome])
    return 0.5 * distance


def compare_tables(first: CountTable, second: CountTable) -> Dict[str, float]:
    """Chi-square homogeneity test of two coincidence tables (empty channels dropped)."""
    observed = np.vstack([first.as_array(), second.as_array()])
    observed = observed[:, observed.sum(axis=0) > 0]
    if observed.shape[1] < 2:
        return {"chi2": 0.0, "dof": 0, "p_value": 1.0}
    chi2, p_value, dof, _ = chi2_contingency(observed, correction=False)
    return {"chi2": float(chi2), "dof": int(dof), "p_value": float(p_value)}
