"""Expected pairing statistics of the asynchronous click-matching protocol.

A click in some time bin opens a pairing window of N_Tc subsequent bins; the
first retained click inside the window completes a pair, otherwise the opener
is discarded and the next click opens a fresh window.  Each party then
announces, per pair, the sum of the two intensities it sent in the paired
bins.  Pairs whose per-party totals involve a signal in both bins, or a
signal mixed with a decoy, are dropped; the rest fall into categories indexed
by the two totals, which downstream decoy analysis consumes.

Everything here is an expectation under the analytic click model; the
Monte-Carlo module samples the same process event by event and the test
suite holds the two within statistical error of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np

from .defaults import (
    DEFAULT_DETUNING_HZ,
    DEFAULT_E_HOM,
    DEFAULT_FIBER_DRIFT_RAD_PER_S,
    DEFAULT_PHASE_SLICES,
    DEFAULT_QUAD_POINTS,
)
from .detection import (
    DECOY_NU,
    DECOY_OMEGA,
    FILTERED_COMBOS,
    SIGNAL,
    VACUUM,
    GainTable,
    build_gain_table,
    class_send_prob,
    click_probs_theta,
)
from .sources import SourceSpec

# Per-party two-bin intensity totals that survive the announcement rules.
# A signal may only share its pair with a vacuum bin; decoys may combine
# with vacuum or each other.
TOTAL_SIGNAL = "sig"
TOTAL_NU = "nu"
TOTAL_OMEGA = "om"
TOTAL_VACUUM = "vac"
TOTAL_2NU = "2nu"
TOTAL_2OMEGA = "2om"
TOTAL_NU_OMEGA = "nu+om"

PARTY_TOTALS = (
    TOTAL_SIGNAL,
    TOTAL_NU,
    TOTAL_OMEGA,
    TOTAL_VACUUM,
    TOTAL_2NU,
    TOTAL_2OMEGA,
    TOTAL_NU_OMEGA,
)

# (early bin class, late bin class) arrangements realizing each total
TOTAL_DECOMPS: Mapping[str, Tuple[Tuple[str, str], ...]] = {
    TOTAL_SIGNAL: ((SIGNAL, VACUUM), (VACUUM, SIGNAL)),
    TOTAL_NU: ((DECOY_NU, VACUUM), (VACUUM, DECOY_NU)),
    TOTAL_OMEGA: ((DECOY_OMEGA, VACUUM), (VACUUM, DECOY_OMEGA)),
    TOTAL_VACUUM: ((VACUUM, VACUUM),),
    TOTAL_2NU: ((DECOY_NU, DECOY_NU),),
    TOTAL_2OMEGA: ((DECOY_OMEGA, DECOY_OMEGA),),
    TOTAL_NU_OMEGA: ((DECOY_NU, DECOY_OMEGA), (DECOY_OMEGA, DECOY_NU)),
}

Category = Tuple[str, str]


@dataclass(frozen=True)
class ProtocolTiming:
    """Repetition rate, pairing window and session length."""

    rep_rate_hz: float
    pairing_window_s: float
    n_pulses: float

    def __post_init__(self) -> None:
        if not (self.rep_rate_hz > 0.0):
            raise ValueError("repetition rate must be positive")
        if not (self.pairing_window_s > 0.0):
            raise ValueError("pairing window must be positive")
        if not (self.n_pulses >= 1.0):
            raise ValueError("pulse count must be at least 1")
        if self.n_window_bins < 1.0:
            raise ValueError("pairing window must span at least one time bin")

    @property
    def n_window_bins(self) -> float:
        return self.rep_rate_hz * self.pairing_window_s


@dataclass(frozen=True)
class InterferenceConfig:
    """Interference-quality model for the phase-matched basis.

    e_hom mixes same-detector (erroneous) click products into the error
    integral; the drift rate and detuning rotate the late bin's reference
    phase by mean-pairing-time * (2*pi*detuning + drift).
    """

    e_hom: float = DEFAULT_E_HOM
    drift_rad_per_s: float = DEFAULT_FIBER_DRIFT_RAD_PER_S
    detuning_hz: float = DEFAULT_DETUNING_HZ
    phase_slices: int = DEFAULT_PHASE_SLICES
    quad_points: int = DEFAULT_QUAD_POINTS

    def __post_init__(self) -> None:
        if not (0.0 <= self.e_hom <= 1.0):
            raise ValueError("interference error weight must lie in [0, 1]")
        if self.drift_rad_per_s < 0.0:
            raise ValueError("drift rate must be non-negative")
        if self.phase_slices < 2:
            raise ValueError("need at least 2 phase slices")
        if self.quad_points < 16:
            raise ValueError("need at least 16 quadrature points")

    def drift_angle(self, mean_pair_time_s: float) -> float:
        return mean_pair_time_s * (
            2.0 * math.pi * self.detuning_hz + self.drift_rad_per_s
        )


@dataclass(frozen=True)
class PairingStatistics:
    """Expected per-session pairing outcome at one parameter point."""

    click_prob: float
    window_prob: float
    pair_total: float
    mean_pair_time_s: float
    drift_angle_rad: float
    pair_category_counts: Mapping[Category, float]
    x_pairs: float
    x_errors: float
    z_pairs: float
    z_errors: float
    retained_send_prob: float
    send_category_probs: Mapping[Category, float]
    x_send_prob: float


def q_total(spec_a: SourceSpec, spec_b: SourceSpec, gains: GainTable) -> float:
    """Per-bin probability of a click that survives the announcement filter."""
    total = 0.0
    for (class_a, class_b), gain in gains.items():
        if (class_a, class_b) in FILTERED_COMBOS:
            continue
        total += (
            class_send_prob(spec_a, class_a) * class_send_prob(spec_b, class_b) * gain
        )
    return total


def q_window(q_tot: float, timing: ProtocolTiming) -> float:
    """Probability that a pairing window of N_Tc bins sees a retained click."""
    if not (0.0 <= q_tot <= 1.0):
        raise ValueError("click probability must lie in [0, 1]")
    if q_tot == 1.0:
        return 1.0
    return -math.expm1(timing.n_window_bins * math.log1p(-q_tot))


def total_pairs(timing: ProtocolTiming, q_tot: float, q_window_prob: float) -> float:
    """Expected number of completed pairs over the whole session."""
    if q_window_prob <= 0.0:
        return 0.0
    return timing.n_pulses * q_tot / (1.0 + 1.0 / q_window_prob)


def mean_pair_time(timing: ProtocolTiming, q_tot: float) -> float:
    """Mean time between the two clicks of a completed pair, in seconds.

    The gap is a geometric variable truncated to the window; its mean is
    [1 - (1-q)^n (1+nq)] / (q * (1-(1-q)^n)) bins.  Both numerator factors
    are evaluated through expm1/log1p, and a quadratic series takes over
    when n*q is tiny, keeping the result to ~1e-10 relative everywhere.
    """
    if not (0.0 < q_tot <= 1.0):
        raise ValueError("click probability must lie in (0, 1] for pairing times")
    n = timing.n_window_bins
    x = n * q_tot
    if x < 1e-6:
        mean_gap = 0.5 * (n + 1.0) * (1.0 - q_tot * (n - 1.0) / 6.0)
    else:
        log_miss = n * math.log1p(-q_tot) if q_tot < 1.0 else -math.inf
        numerator = -math.expm1(log_miss + math.log1p(x))
        window_prob = -math.expm1(log_miss)
        mean_gap = numerator / (q_tot * window_prob)
    # the exact mean provably lies in [1, n] bins; evaluation can poke out
    # by ~1e-12 relative when the two log terms nearly cancel
    mean_gap = min(max(mean_gap, 1.0), n)
    return mean_gap / timing.rep_rate_hz


def send_retained_prob(spec_a: SourceSpec, spec_b: SourceSpec) -> float:
    """Per-bin probability that the sent class pair survives the filter."""
    dropped = 0.0
    for class_a, class_b in FILTERED_COMBOS:
        dropped += class_send_prob(spec_a, class_a) * class_send_prob(spec_b, class_b)
    return 1.0 - dropped


def _decomposition_weights(
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    category: Category,
    per_combo,
) -> float:
    """Sum of early*late weights over the category's valid arrangements."""
    total_a, total_b = category
    weight = 0.0
    for early_a, late_a in TOTAL_DECOMPS[total_a]:
        for early_b, late_b in TOTAL_DECOMPS[total_b]:
            if (early_a, early_b) in FILTERED_COMBOS:
                continue
            if (late_a, late_b) in FILTERED_COMBOS:
                continue
            weight += per_combo(early_a, early_b) * per_combo(late_a, late_b)
    return weight


def pair_counts(
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    gains: GainTable,
    n_tot: float,
) -> Dict[Category, float]:
    """Expected pair count per announced category of two-bin totals.

    Each category splits into arrangements of which bin carried which class;
    an arrangement contributes the product of its two bins' click weights,
    normalized by the per-bin click probability.
    """
    q_tot = q_total(spec_a, spec_b, gains)
    counts: Dict[Category, float] = {}
    if q_tot <= 0.0:
        return {(a, b): 0.0 for a in PARTY_TOTALS for b in PARTY_TOTALS}

    def combo_weight(class_a: str, class_b: str) -> float:
        return (
            class_send_prob(spec_a, class_a)
            * class_send_prob(spec_b, class_b)
            * gains[(class_a, class_b)]
            / q_tot
        )

    for total_a in PARTY_TOTALS:
        for total_b in PARTY_TOTALS:
            counts[(total_a, total_b)] = n_tot * _decomposition_weights(
                spec_a, spec_b, (total_a, total_b), combo_weight
            )
    return counts


def category_send_probs(
    spec_a: SourceSpec, spec_b: SourceSpec
) -> Dict[Category, float]:
    """Send-probability weight of each category among retained bin pairs."""
    p_s = send_retained_prob(spec_a, spec_b)
    if p_s <= 0.0:
        raise ValueError("announcement filter removes every bin pair")

    def combo_weight(class_a: str, class_b: str) -> float:
        return (
            class_send_prob(spec_a, class_a) * class_send_prob(spec_b, class_b) / p_s
        )

    probs: Dict[Category, float] = {}
    for total_a in PARTY_TOTALS:
        for total_b in PARTY_TOTALS:
            probs[(total_a, total_b)] = _decomposition_weights(
                spec_a, spec_b, (total_a, total_b), combo_weight
            )
    return probs


def x_send_prob(spec: SourceSpec, phase_slices: int) -> float:
    """Send-probability weight of phase-matched lowest-decoy pairs."""
    p_s = send_retained_prob(spec, spec)
    if p_s <= 0.0:
        raise ValueError("announcement filter removes every bin pair")
    per_bin = spec.p_omega * spec.p_omega / p_s
    return (2.0 / phase_slices) * per_bin * per_bin


def x_pair_count(
    spec: SourceSpec,
    gains: GainTable,
    n_tot: float,
    phase_slices: int,
    quad_points: int = DEFAULT_QUAD_POINTS,
) -> float:
    """Expected phase-matched pairs with both parties at the lowest decoy.

    Both bins of such a pair share one random reference phase up to the slice
    width, so the count carries the phase average of the squared resolved
    gain, not the square of the averaged gain.
    """
    q_tot = q_total(spec, spec, gains)
    if q_tot <= 0.0 or spec.p_omega == 0.0:
        return 0.0
    thetas = np.linspace(0.0, 2.0 * math.pi, quad_points, endpoint=False)
    q_left, q_right = click_probs_theta(spec.omega, spec.omega, thetas, gains.model)
    resolved = q_left + q_right
    mean_square = float(np.mean(resolved * resolved))
    weight = (spec.p_omega * spec.p_omega / q_tot) ** 2
    return n_tot * (2.0 / phase_slices) * weight * mean_square


def x_error_count(
    spec: SourceSpec,
    gains: GainTable,
    n_tot: float,
    phase_slices: int,
    e_hom: float,
    delta_drift: float,
    quad_points: int = DEFAULT_QUAD_POINTS,
) -> float:
    """Expected erroneous phase-matched pairs.

    A pair is erroneous when its two clicks land on the same detector side
    (weight e_hom for misalignment) or on opposite sides through the drifted
    late-bin phase.  With e_hom = 0.5 and no drift the mixture collapses to
    half the pair count.
    """
    q_tot = q_total(spec, spec, gains)
    if q_tot <= 0.0 or spec.p_omega == 0.0:
        return 0.0
    thetas = np.linspace(0.0, 2.0 * math.pi, quad_points, endpoint=False)
    early_l, early_r = click_probs_theta(spec.omega, spec.omega, thetas, gains.model)
    late_l, late_r = click_probs_theta(
        spec.omega, spec.omega, thetas + delta_drift, gains.model
    )
    crossed = early_l * late_r + early_r * late_l
    same_side = early_l * late_l + early_r * late_r
    integrand = (1.0 - e_hom) * crossed + e_hom * same_side
    weight = (spec.p_omega * spec.p_omega / q_tot) ** 2
    return n_tot * (2.0 / phase_slices) * weight * float(np.mean(integrand))


def z_counts(
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    gains: GainTable,
    n_tot: float,
) -> Tuple[float, float]:
    """Raw-key pair count and error count of the signal-signal category.

    Bits are read off from which bin carried each party's signal, so the
    two arrangements that put both signals in the same bin (the other bin
    clicking on dark counts alone) decorrelate the bits and count as errors.
    """
    q_tot = q_total(spec_a, spec_b, gains)
    if q_tot <= 0.0:
        return 0.0, 0.0

    def combo_weight(class_a: str, class_b: str) -> float:
        return (
            class_send_prob(spec_a, class_a)
            * class_send_prob(spec_b, class_b)
            * gains[(class_a, class_b)]
            / q_tot
        )

    n_z = n_tot * _decomposition_weights(
        spec_a, spec_b, (TOTAL_SIGNAL, TOTAL_SIGNAL), combo_weight
    )
    m_z = n_tot * 2.0 * combo_weight(SIGNAL, SIGNAL) * combo_weight(VACUUM, VACUUM)
    return n_z, m_z


def collect_statistics(
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    gains: GainTable,
    timing: ProtocolTiming,
    interference: InterferenceConfig,
) -> PairingStatistics:
    """Assemble the full expected-statistics record for one parameter point."""
    q_tot = q_total(spec_a, spec_b, gains)
    window_prob = q_window(q_tot, timing)
    n_tot = total_pairs(timing, q_tot, window_prob)
    if q_tot > 0.0:
        pair_time = mean_pair_time(timing, q_tot)
    else:
        pair_time = math.nan
    drift = interference.drift_angle(pair_time) if q_tot > 0.0 else 0.0
    counts = pair_counts(spec_a, spec_b, gains, n_tot)
    n_x = x_pair_count(
        spec_a, gains, n_tot, interference.phase_slices, interference.quad_points
    )
    m_x = x_error_count(
        spec_a,
        gains,
        n_tot,
        interference.phase_slices,
        interference.e_hom,
        drift,
        interference.quad_points,
    )
    n_z, m_z = z_counts(spec_a, spec_b, gains, n_tot)
    return PairingStatistics(
        click_prob=q_tot,
        window_prob=window_prob,
        pair_total=n_tot,
        mean_pair_time_s=pair_time,
        drift_angle_rad=drift,
        pair_category_counts=counts,
        x_pairs=n_x,
        x_errors=m_x,
        z_pairs=n_z,
        z_errors=m_z,
        retained_send_prob=send_retained_prob(spec_a, spec_b),
        send_category_probs=category_send_probs(spec_a, spec_b),
        x_send_prob=x_send_prob(spec_a, interference.phase_slices),
    )


def statistics_for(
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    model,
    timing: ProtocolTiming,
    interference: InterferenceConfig,
) -> PairingStatistics:
    """Convenience wrapper building the gain table internally."""
    gains = build_gain_table(spec_a, spec_b, model)
    return collect_statistics(spec_a, spec_b, gains, timing, interference)
