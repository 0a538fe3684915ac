"""Finite-size bounds and decoy-state estimators on pairing statistics.

The decoy analysis runs in the expected-value domain: observed counts are
first bracketed by expected-value bounds (multiplicative-Chernoff style),
the linear decoy combinations are evaluated with each term pushed in its
conservative direction, and the resulting expected-value estimates are
converted back to bounds on observed counts before entering the key-length
formula.  With the failure probability set to None every bound collapses to
the central value, which is the asymptotic mode used in soundness tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple

from .defaults import DEFAULT_EPSILON
from .pairing_stats import (
    TOTAL_2OMEGA,
    TOTAL_NU,
    TOTAL_OMEGA,
    TOTAL_SIGNAL,
    TOTAL_VACUUM,
    Category,
    PairingStatistics,
)
from .sources import SourceSpec, single_photon_prob, vacuum_prob

CAT_OMEGA_OMEGA: Category = (TOTAL_OMEGA, TOTAL_OMEGA)
CAT_VAC_NU: Category = (TOTAL_VACUUM, TOTAL_NU)
CAT_NU_VAC: Category = (TOTAL_NU, TOTAL_VACUUM)
CAT_VAC_VAC: Category = (TOTAL_VACUUM, TOTAL_VACUUM)
CAT_NU_NU: Category = (TOTAL_NU, TOTAL_NU)
CAT_VAC_OMEGA: Category = (TOTAL_VACUUM, TOTAL_OMEGA)
CAT_OMEGA_VAC: Category = (TOTAL_OMEGA, TOTAL_VACUUM)
CAT_VAC_SIGNAL: Category = (TOTAL_VACUUM, TOTAL_SIGNAL)
CAT_VAC_2OMEGA: Category = (TOTAL_VACUUM, TOTAL_2OMEGA)
CAT_2OMEGA_VAC: Category = (TOTAL_2OMEGA, TOTAL_VACUUM)
CAT_SIGNAL_SIGNAL: Category = (TOTAL_SIGNAL, TOTAL_SIGNAL)


class EstimationError(RuntimeError):
    """Raised when the decoy analysis cannot produce a usable estimate."""


class BoundKind(Enum):
    """Whether the bounds bracket an expected value or an observed count."""

    EXPECTED = "expected"
    OBSERVED = "observed"


@dataclass(frozen=True)
class BoundedCount:
    """A count with its confidence bracket.

    For kind EXPECTED the value is an observed count and the bracket holds
    its expectation; for kind OBSERVED the value is an expectation and the
    bracket holds a yet-unseen observation.  epsilon None marks the
    asymptotic mode where the bracket is degenerate.
    """

    value: float
    lower: float
    upper: float
    epsilon: Optional[float]
    kind: BoundKind

    def __post_init__(self) -> None:
        if self.value < 0.0:
            raise ValueError("counts must be non-negative")
        if not (self.lower <= self.value * (1.0 + 1e-12) + 1e-12
                and self.value <= self.upper * (1.0 + 1e-12) + 1e-12):
            raise ValueError("bounds must bracket the value")
        if self.epsilon is not None and not (0.0 < self.epsilon < 1.0):
            raise ValueError("failure probability must lie in (0, 1)")


def _beta(epsilon: Optional[float]) -> float:
    if epsilon is None:
        return 0.0
    if not (0.0 < epsilon < 1.0):
        raise ValueError("failure probability must lie in (0, 1)")
    return math.log(1.0 / epsilon)


def expected_bounds(
    observed: float, epsilon: Optional[float]
) -> Tuple[float, float]:
    """Bracket the expectation behind an observed count."""
    if observed < 0.0:
        raise ValueError("observed count must be non-negative")
    beta = _beta(epsilon)
    upper = observed + beta + math.sqrt(2.0 * beta * observed + beta * beta)
    lower = max(0.0, observed - math.sqrt(2.0 * beta * observed))
    return lower, upper


def observed_bounds(
    expected: float, epsilon: Optional[float]
) -> Tuple[float, float]:
    """Bracket the observation that an expected count will produce."""
    if expected < 0.0:
        raise ValueError("expected count must be non-negative")
    beta = _beta(epsilon)
    upper = expected + 0.5 * (
        beta + math.sqrt(beta * beta + 8.0 * beta * expected)
    )
    lower = max(0.0, expected - math.sqrt(2.0 * beta * expected))
    return lower, upper


def bounded_expected(observed: float, epsilon: Optional[float]) -> BoundedCount:
    lower, upper = expected_bounds(observed, epsilon)
    return BoundedCount(value=observed, lower=lower, upper=upper,
                        epsilon=epsilon, kind=BoundKind.EXPECTED)


def bounded_observed(expected: float, epsilon: Optional[float]) -> BoundedCount:
    lower, upper = observed_bounds(expected, epsilon)
    return BoundedCount(value=expected, lower=lower, upper=upper,
                        epsilon=epsilon, kind=BoundKind.OBSERVED)


@dataclass(frozen=True)
class DecoySettings:
    """Failure probability and bounding mode of the decoy analysis.

    epsilon None disables all fluctuation terms (asymptotic mode).  With
    joint=True the two linear combinations fluctuate once as aggregates
    instead of term by term.
    """

    epsilon: Optional[float] = DEFAULT_EPSILON
    joint: bool = False


@dataclass(frozen=True)
class DecoyEstimate:
    """Outputs of the decoy analysis, in observed-count units."""

    z_vacuum_lower: float
    z_single_lower: float
    x_single_lower: float
    x_single_errors_upper: float
    phase_error_upper: float
    eps_vacuum: Optional[float]
    eps_single: Optional[float]
    eps_phase: Optional[float]


# coefficient layout of the two decoy combinations; terms are
# (category, bound direction used for the lower/upper composite)
_S1_CATEGORIES = (CAT_OMEGA_OMEGA, CAT_VAC_NU, CAT_NU_VAC, CAT_VAC_VAC)
_S2_CATEGORIES = (CAT_NU_NU, CAT_VAC_OMEGA, CAT_OMEGA_VAC)


def _require(
    counts: Mapping[Category, BoundedCount], category: Category
) -> BoundedCount:
    try:
        return counts[category]
    except KeyError:
        raise EstimationError(f"missing pair category {category}") from None


def _require_prob(probs: Mapping[Category, float], category: Category) -> float:
    try:
        p = probs[category]
    except KeyError:
        raise EstimationError(f"missing category probability {category}") from None
    if p <= 0.0:
        raise EstimationError(f"category {category} has zero send probability")
    return p


def _s1_terms(nu: float, omega: float) -> Tuple[Tuple[Category, float], ...]:
    return (
        (CAT_OMEGA_OMEGA, nu**3 * math.exp(2.0 * omega)),
        (CAT_VAC_NU, omega**3 * math.exp(nu)),
        (CAT_NU_VAC, omega**3 * math.exp(nu)),
        (CAT_VAC_VAC, nu**3 - omega**3),
    )


def _s2_terms(nu: float, omega: float) -> Tuple[Tuple[Category, float], ...]:
    return (
        (CAT_NU_NU, omega**3 * math.exp(2.0 * nu)),
        (CAT_VAC_OMEGA, nu**3 * math.exp(omega)),
        (CAT_OMEGA_VAC, nu**3 * math.exp(omega)),
    )


def s_composites(
    n_counts: Mapping[Category, BoundedCount],
    p_categories: Mapping[Category, float],
    nu: float,
    omega: float,
    joint: bool = False,
) -> Tuple[float, float]:
    """Conservative (lower, upper) values of the two decoy combinations.

    The first combination collects the categories whose single-photon
    content is to be kept (lower-bounded), the second the ones subtracted
    off (upper-bounded).
    """
    if not (nu > omega > 0.0):
        raise ValueError("decoy intensities must satisfy nu > omega > 0")

    def ratio(count: BoundedCount, category: Category, pick) -> float:
        return pick(count) / _require_prob(p_categories, category)

    if joint:
        epsilons = {
            _require(n_counts, cat).epsilon
            for cat in _S1_CATEGORIES + _S2_CATEGORIES
        }
        if len(epsilons) != 1:
            raise EstimationError("joint mode needs a single failure probability")
        epsilon = next(iter(epsilons))
        s1_central = sum(
            coeff * ratio(_require(n_counts, cat), cat, lambda c: c.value)
            for cat, coeff in _s1_terms(nu, omega)
        )
        s2_central = sum(
            coeff * ratio(_require(n_counts, cat), cat, lambda c: c.value)
            for cat, coeff in _s2_terms(nu, omega)
        )
        s1_lower = expected_bounds(s1_central, epsilon)[0]
        s2_upper = expected_bounds(s2_central, epsilon)[1]
        return s1_lower, s2_upper

    s1_lower = sum(
        coeff * ratio(_require(n_counts, cat), cat, lambda c: c.lower)
        for cat, coeff in _s1_terms(nu, omega)
    )
    s2_upper = sum(
        coeff * ratio(_require(n_counts, cat), cat, lambda c: c.upper)
        for cat, coeff in _s2_terms(nu, omega)
    )
    return s1_lower, s2_upper


def _symmetric_decoys(spec_a: SourceSpec, spec_b: SourceSpec) -> Tuple[float, float]:
    if not (
        math.isclose(spec_a.nu, spec_b.nu, rel_tol=1e-12)
        and math.isclose(spec_a.omega, spec_b.omega, rel_tol=1e-12)
    ):
        raise ValueError("decoy analysis assumes symmetric decoy intensities")
    return spec_a.nu, spec_a.omega


def z_single_photon_lower(
    composites: Tuple[float, float],
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    p_categories: Mapping[Category, float],
    epsilon: Optional[float],
) -> float:
    """Observed-count lower bound on raw-key pairs from single-photon pulses."""
    nu, omega = _symmetric_decoys(spec_a, spec_b)
    s1_lower, s2_upper = composites
    p_zz = _require_prob(p_categories, CAT_SIGNAL_SIGNAL)
    scale = (
        single_photon_prob(spec_a)
        * single_photon_prob(spec_b)
        * p_zz
        / (nu**2 * omega**2 * (nu - omega))
    )
    expected = scale * max(0.0, s1_lower - s2_upper)
    return observed_bounds(expected, epsilon)[0]


def z_vacuum_lower(
    n_vac_signal: BoundedCount,
    vacuum_prob_a: float,
    p_categories: Mapping[Category, float],
    epsilon: Optional[float],
) -> float:
    """Observed-count lower bound on raw-key pairs with an empty signal pulse.

    Identically zero for a pure odd-photon signal, whose vacuum weight
    vanishes.
    """
    if not (0.0 <= vacuum_prob_a <= 1.0):
        raise ValueError("vacuum probability must lie in [0, 1]")
    p_zz = _require_prob(p_categories, CAT_SIGNAL_SIGNAL)
    p_ref = _require_prob(p_categories, CAT_VAC_SIGNAL)
    expected = vacuum_prob_a * (p_zz / p_ref) * n_vac_signal.lower
    return observed_bounds(expected, epsilon)[0]


def x_single_photon_lower(
    composites: Tuple[float, float],
    omega: float,
    nu: float,
    x_send_prob: float,
) -> float:
    """Lower bound on phase-matched single-photon pairs.

    Stays in the expected-value domain: only the phase-error ratio consumes
    it, so no observed-count conversion is applied.
    """
    if not (nu > omega > 0.0):
        raise ValueError("decoy intensities must satisfy nu > omega > 0")
    s1_lower, s2_upper = composites
    scale = 4.0 * math.exp(-4.0 * omega) * x_send_prob / (nu**2 * (nu - omega))
    return scale * max(0.0, s1_lower - s2_upper)


def x_background_errors_lower(
    n_counts: Mapping[Category, BoundedCount],
    p_categories: Mapping[Category, float],
    x_send_prob: float,
    omega: float,
) -> float:
    """Expected-value lower bound on phase-matched errors of non-photonic origin.

    Collects the error mass attributable to pairs where at least one party
    contributed no photons, scaled into the phase-matched category through
    send-probability ratios.
    """
    half_x = 0.5 * x_send_prob
    term_vac_2om = (
        math.exp(-2.0 * omega)
        * (half_x / _require_prob(p_categories, CAT_VAC_2OMEGA))
        * _require(n_counts, CAT_VAC_2OMEGA).lower
    )
    term_2om_vac = (
        math.exp(-2.0 * omega)
        * (half_x / _require_prob(p_categories, CAT_2OMEGA_VAC))
        * _require(n_counts, CAT_2OMEGA_VAC).lower
    )
    term_vac_vac = (
        math.exp(-4.0 * omega)
        * (half_x / _require_prob(p_categories, CAT_VAC_VAC))
        * _require(n_counts, CAT_VAC_VAC).lower
    )
    return term_vac_2om + term_2om_vac + term_vac_vac


def x_single_errors_upper(
    x_errors_observed: float,
    background_lower: float,
) -> float:
    """Upper bound on errors among single-photon matched pairs.

    Subtracts the background error floor (already lower-bounded through its
    ingredient counts) from the observed error total; subtracting a
    non-negative floor keeps the result at or below the observed count.
    """
    if x_errors_observed < 0.0 or background_lower < 0.0:
        raise ValueError("error counts must be non-negative")
    return max(0.0, x_errors_observed - background_lower)


def phase_error_rate_upper(
    x_single_errors: float, x_single_pairs: float
) -> float:
    """Upper bound on the single-photon phase-error rate, clamped to [0, 1/2]."""
    if x_single_pairs <= 0.0:
        raise EstimationError(
            "no phase-matched single-photon pairs resolvable; cannot bound "
            "the phase-error rate"
        )
    return min(0.5, max(0.0, x_single_errors / x_single_pairs))


_LOWER_CATEGORIES = (
    CAT_OMEGA_OMEGA,
    CAT_VAC_NU,
    CAT_NU_VAC,
    CAT_VAC_VAC,
    CAT_VAC_SIGNAL,
    CAT_VAC_2OMEGA,
    CAT_2OMEGA_VAC,
)
_UPPER_CATEGORIES = (CAT_NU_NU, CAT_VAC_OMEGA, CAT_OMEGA_VAC)


def bounded_counts(
    stats: PairingStatistics, epsilon: Optional[float]
) -> Dict[Category, BoundedCount]:
    """Expected-value brackets for every category the estimators consume."""
    counts: Dict[Category, BoundedCount] = {}
    for category in set(_LOWER_CATEGORIES) | set(_UPPER_CATEGORIES):
        value = stats.pair_category_counts.get(category)
        if value is None:
            raise EstimationError(f"missing pair category {category}")
        counts[category] = bounded_expected(value, epsilon)
    return counts


def decoy_estimate(
    stats: PairingStatistics,
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    settings: DecoySettings = DecoySettings(),
) -> DecoyEstimate:
    """Run the full decoy pipeline on one set of pairing statistics."""
    nu, omega = _symmetric_decoys(spec_a, spec_b)
    eps = settings.epsilon
    counts = bounded_counts(stats, eps)
    composites = s_composites(
        counts, stats.send_category_probs, nu, omega, joint=settings.joint
    )
    z_single = z_single_photon_lower(
        composites, spec_a, spec_b, stats.send_category_probs, eps
    )
    z_vacuum = z_vacuum_lower(
        counts[CAT_VAC_SIGNAL], vacuum_prob(spec_a), stats.send_category_probs, eps
    )
    x_single = x_single_photon_lower(composites, omega, nu, stats.x_send_prob)
    background = x_background_errors_lower(
        counts, stats.send_category_probs, stats.x_send_prob, omega
    )
    x_errors = x_single_errors_upper(stats.x_errors, background)
    phase_error = phase_error_rate_upper(x_errors, x_single)
    return DecoyEstimate(
        z_vacuum_lower=z_vacuum,
        z_single_lower=z_single,
        x_single_lower=x_single,
        x_single_errors_upper=x_errors,
        phase_error_upper=phase_error,
        eps_vacuum=eps,
        eps_single=eps,
        eps_phase=eps,
    )
