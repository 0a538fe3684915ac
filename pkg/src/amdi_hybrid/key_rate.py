"""Secret-key length, error-correction cost, security budget, and benchmark.

The extractable key length combines the vacuum and single-photon credits
from the decoy analysis with the phase-error privacy penalty, then
subtracts the error-correction and post-processing costs.  Rates are
reported per pulse (benchmark-comparable) and per second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

from .defaults import (
    DEFAULT_EC_EFFICIENCY,
    DEFAULT_EPSILON,
)
from .finite_key import DecoyEstimate, DecoySettings, EstimationError, decoy_estimate
from .detection import DetectorModel
from .pairing_stats import (
    InterferenceConfig,
    PairingStatistics,
    ProtocolTiming,
    statistics_for,
)
from .sources import SourceSpec


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits, continuous at the endpoints."""
    if not (0.0 <= x <= 1.0):
        raise ValueError("entropy argument must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def lambda_ec(n_z: float, m_z: float, efficiency: float = DEFAULT_EC_EFFICIENCY) -> float:
    """Bits consumed by error correction on the raw key."""
    if n_z < 0.0 or m_z < 0.0:
        raise ValueError("counts must be non-negative")
    if efficiency < 1.0:
        raise ValueError("error-correction efficiency must be at least 1")
    if n_z == 0.0:
        return 0.0
    if m_z > n_z:
        raise ValueError("error count cannot exceed the raw-key count")
    return n_z * efficiency * binary_entropy(m_z / n_z)


def plob_bound(distance_km: float, alpha_db_per_km: float) -> float:
    """Repeaterless benchmark rate in bits per channel use."""
    if distance_km < 0.0:
        raise ValueError("distance must be non-negative")
    if alpha_db_per_km <= 0.0:
        raise ValueError("attenuation must be positive")
    transmittance = 10.0 ** (-alpha_db_per_km * distance_km / 10.0)
    if transmittance >= 1.0:
        return math.inf
    return -math.log1p(-transmittance) / math.log(2.0)


@dataclass(frozen=True)
class EpsilonBudget:
    """Failure probabilities of the post-processing steps."""

    eps_prime: float = DEFAULT_EPSILON
    eps_hat: float = DEFAULT_EPSILON
    eps_phase: float = DEFAULT_EPSILON
    eps_beta: float = DEFAULT_EPSILON
    eps_vacuum: float = DEFAULT_EPSILON
    eps_single: float = DEFAULT_EPSILON
    eps_pa: float = DEFAULT_EPSILON
    eps_cor: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        # zero is admitted so the budget composition stays linear down to
        # the origin; it makes the post-processing cost infinite
        for name in ("eps_prime", "eps_hat", "eps_phase", "eps_beta",
                     "eps_vacuum", "eps_single", "eps_pa", "eps_cor"):
            value = getattr(self, name)
            if not (0.0 <= value < 1.0):
                raise ValueError(f"{name} must lie in [0, 1)")


def _log2_inv(x: float) -> float:
    """log2(1/x), infinite at x = 0 so a zero budget forbids any key."""
    return math.inf if x == 0.0 else -math.log2(x)


def epsilon_budget(budget: EpsilonBudget) -> float:
    """Total security failure probability of the produced key."""
    return (
        2.0 * (budget.eps_prime + budget.eps_hat + 2.0 * budget.eps_phase)
        + budget.eps_beta
        + budget.eps_vacuum
        + budget.eps_single
        + budget.eps_pa
    )


@dataclass(frozen=True)
class KeyRateReport:
    """Everything one rate evaluation produced, defaults made explicit."""

    rate_per_pulse: float
    rate_per_second: float
    secret_bits: float
    unclamped_bits: float
    lambda_ec: float
    eps_sec: float
    eps_cor: float
    plob: float
    stats: PairingStatistics
    estimate: Optional[DecoyEstimate]
    failure_reason: Optional[str] = None
    config: Mapping[str, object] = field(default_factory=dict)


def secret_key_rate(
    stats: PairingStatistics,
    estimate: Optional[DecoyEstimate],
    budget: EpsilonBudget,
    timing: ProtocolTiming,
    ec_efficiency: float = DEFAULT_EC_EFFICIENCY,
    plob: float = math.nan,
    config: Optional[Mapping[str, object]] = None,
    failure_reason: Optional[str] = None,
) -> KeyRateReport:
    """Assemble the key-length formula into a report.

    A missing estimate (upstream estimation failure) yields rate zero with
    the reason recorded instead of raising.
    """
    cost_ec = lambda_ec(stats.z_pairs, stats.z_errors, ec_efficiency)
    if estimate is None:
        bits = 0.0
        unclamped = -math.inf
    else:
        privacy = 1.0 - binary_entropy(estimate.phase_error_upper)
        unclamped = (
            estimate.z_vacuum_lower
            + estimate.z_single_lower * privacy
            - cost_ec
            - (1.0 + _log2_inv(budget.eps_cor))
            - 2.0 * (1.0 + _log2_inv(budget.eps_prime) + _log2_inv(budget.eps_hat))
            - 2.0 * (_log2_inv(budget.eps_pa) - 1.0)
        )
        bits = max(0.0, unclamped)
    per_pulse = bits / timing.n_pulses
    return KeyRateReport(
        rate_per_pulse=per_pulse,
        rate_per_second=timing.rep_rate_hz * per_pulse,
        secret_bits=bits,
        unclamped_bits=unclamped,
        lambda_ec=cost_ec,
        eps_sec=epsilon_budget(budget),
        eps_cor=budget.eps_cor,
        plob=plob,
        stats=stats,
        estimate=estimate,
        failure_reason=failure_reason,
        config=dict(config) if config is not None else {},
    )


def _config_echo(
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    model: DetectorModel,
    timing: ProtocolTiming,
    interference: InterferenceConfig,
    budget: EpsilonBudget,
    ec_efficiency: float,
    decoy: DecoySettings,
) -> Mapping[str, object]:
    echo: dict = {
        "distance_km": model.distance_km,
        "eta_detector": model.eta_d,
        "dark_count_prob": model.p_dark,
        "attenuation_db_per_km": model.alpha_db_per_km,
        "rep_rate_hz": timing.rep_rate_hz,
        "pairing_window_s": timing.pairing_window_s,
        "n_pulses": timing.n_pulses,
        "e_hom": interference.e_hom,
        "drift_rad_per_s": interference.drift_rad_per_s,
        "detuning_hz": interference.detuning_hz,
        "phase_slices": interference.phase_slices,
        "quad_points": interference.quad_points,
        "ec_efficiency": ec_efficiency,
        "decoy_epsilon": decoy.epsilon,
        "decoy_joint": decoy.joint,
        "eps_prime": budget.eps_prime,
        "eps_hat": budget.eps_hat,
        "eps_phase": budget.eps_phase,
        "eps_beta": budget.eps_beta,
        "eps_vacuum": budget.eps_vacuum,
        "eps_single": budget.eps_single,
        "eps_pa": budget.eps_pa,
        "eps_cor": budget.eps_cor,
    }
    for label, spec in (("a", spec_a), ("b", spec_b)):
        echo[f"mu_{label}"] = spec.mu
        echo[f"nu_{label}"] = spec.nu
        echo[f"omega_{label}"] = spec.omega
        echo[f"p_signal_{label}"] = spec.p_signal
        echo[f"p_nu_{label}"] = spec.p_nu
        echo[f"p_omega_{label}"] = spec.p_omega
        echo[f"purity_{label}"] = spec.purity
        echo[f"signal_kind_{label}"] = spec.signal_kind.value
    return echo


def evaluate_protocol(
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    model: DetectorModel,
    timing: ProtocolTiming,
    interference: InterferenceConfig = InterferenceConfig(),
    budget: EpsilonBudget = EpsilonBudget(),
    ec_efficiency: float = DEFAULT_EC_EFFICIENCY,
    decoy: DecoySettings = DecoySettings(),
) -> KeyRateReport:
    """Full pipeline: pairing statistics, decoy analysis, key length."""
    stats = statistics_for(spec_a, spec_b, model, timing, interference)
    failure: Optional[str] = None
    estimate: Optional[DecoyEstimate] = None
    try:
        estimate = decoy_estimate(stats, spec_a, spec_b, decoy)
    except EstimationError as exc:
        failure = str(exc)
    return secret_key_rate(
        stats,
        estimate,
        budget,
        timing,
        ec_efficiency=ec_efficiency,
        plob=plob_bound(model.distance_km, model.alpha_db_per_km),
        config=_config_echo(spec_a, spec_b, model, timing, interference,
                            budget, ec_efficiency, decoy),
        failure_reason=failure,
    )
