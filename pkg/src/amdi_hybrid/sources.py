"""Photon-number statistics of the transmitter sources.

Each party sends, per time bin, one of four pulse classes: a signal pulse, one
of two decoy intensities, or vacuum.  Decoys are phase-randomized weak coherent
pulses (Poisson photon statistics).  The signal pulse is either a
phase-randomized coherent-state superposition ("cat" signal, odd-dominated
photon parity controlled by a purity weight) or, for the baseline protocol, a
phase-randomized weak coherent pulse as well.

The cat signal with amplitude mu and purity a mixes an odd and an even
superposition branch:

    P(2n+1) = a * mu^(2n+1) / (sinh(mu) * (2n+1)!)
    P(2m)   = (1-a) * mu^(2m) / (cosh(mu) * (2m)!)

At a = 1 only odd photon numbers survive, which is what suppresses the vacuum
and two-photon components relative to a Poisson source of equal amplitude.
At exactly mu = 0 the distribution is taken to be all-vacuum by convention
(the one-sided limit mu -> 0+ of the odd branch degenerates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import gammaln

from .defaults import DEFAULT_PND_CUTOFF, DEFAULT_PND_TAIL_TOL

PROBABILITY_ATOL = 1e-12

# extra series terms summed past the cutoff to evaluate the truncation tail
_TAIL_TERMS = 120


class SignalKind(Enum):
    """Signal-window pulse class: cat superposition or weak coherent."""

    CAT = "cat"
    WCS = "wcs"


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """Truncated photon-number distribution with an explicit tail bound.

    Attributes
    ----------
    probs:
        probs[n] is the probability of emitting exactly n photons, for
        n = 0 .. cutoff.
    tail_mass:
        Upper bound on the probability mass beyond the cutoff.
    """

    probs: np.ndarray
    tail_mass: float

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("photon-number distribution must be a non-empty vector")
        if np.any(probs < -PROBABILITY_ATOL):
            raise ValueError("negative probability in photon-number distribution")
        total = float(probs.sum()) + self.tail_mass
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(f"photon-number distribution sums to {total}, not 1")

    @property
    def cutoff(self) -> int:
        return self.probs.size - 1

    def prob(self, n: int) -> float:
        if n < 0:
            raise ValueError("photon number must be non-negative")
        if n > self.cutoff:
            return 0.0
        return float(self.probs[n])

    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)


@dataclass(frozen=True)
class SourceSpec:
    """One party's transmitter configuration.

    Intensities are mean photon numbers per pulse; o (vacuum) is fixed at 0.
    The send probabilities cover (signal, nu-decoy, omega-decoy) and leave the
    remainder to vacuum.
    """

    mu: float
    nu: float
    omega: float
    p_signal: float
    p_nu: float
    p_omega: float
    purity: float = 1.0
    signal_kind: SignalKind = SignalKind.CAT
    pnd_cutoff: int = DEFAULT_PND_CUTOFF

    def __post_init__(self) -> None:
        # accept the enum's string value so config-file input round-trips
        object.__setattr__(self, "signal_kind", SignalKind(self.signal_kind))
        if not (self.mu >= 0.0):
            raise ValueError("signal amplitude mu must be >= 0")
        if not (self.nu > self.omega > 0.0):
            raise ValueError("decoy intensities must satisfy nu > omega > 0")
        for name in ("p_signal", "p_nu", "p_omega"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.p_signal + self.p_nu + self.p_omega > 1.0 + PROBABILITY_ATOL:
            raise ValueError("send probabilities exceed 1")
        if not (0.0 <= self.purity <= 1.0):
            raise ValueError("purity must lie in [0, 1]")
        if self.pnd_cutoff < 1:
            raise ValueError("pnd_cutoff must be >= 1")

    @property
    def p_vacuum(self) -> float:
        return max(0.0, 1.0 - self.p_signal - self.p_nu - self.p_omega)


def _poisson_terms(mu: float, n_max: int) -> np.ndarray:
    """Array of mu^n/n! for n = 0..n_max, evaluated in log space."""
    n = np.arange(n_max + 1)
    return np.exp(n * math.log(mu) - gammaln(n + 1.0))


def _series_tail(weighted_terms: np.ndarray, mu: float, first_n: int) -> float:
    """Tail mass from explicit terms plus a geometric bound on the remainder.

    weighted_terms[k] is the probability of first_n + k photons; successive
    raw series terms shrink by at least mu/(n+1), so the mass past the last
    explicit term is bounded by a geometric series.
    """
    last_n = first_n + weighted_terms.size - 1
    ratio = mu / (last_n + 2.0)
    if ratio >= 0.5:
        raise ValueError("tail evaluation needs a higher cutoff for this intensity")
    remainder = float(weighted_terms[-1]) * ratio / (1.0 - ratio)
    return float(weighted_terms.sum() + remainder)


def poisson_pnd(mu: float, cutoff: int = DEFAULT_PND_CUTOFF) -> PhotonNumberDistribution:
    """Poisson photon-number distribution of a phase-randomized coherent pulse."""
    if mu < 0.0:
        raise ValueError("mean photon number must be >= 0")
    if mu == 0.0:
        probs = np.zeros(cutoff + 1)
        probs[0] = 1.0
        return PhotonNumberDistribution(probs=probs, tail_mass=0.0)
    terms = math.exp(-mu) * _poisson_terms(mu, cutoff + _TAIL_TERMS)
    probs = terms[: cutoff + 1]
    tail = _series_tail(terms[cutoff + 1 :], mu, cutoff + 1)
    return PhotonNumberDistribution(probs=probs, tail_mass=tail)


def cat_pnd(
    mu: float, purity: float = 1.0, cutoff: int = DEFAULT_PND_CUTOFF
) -> PhotonNumberDistribution:
    """Photon-number distribution of the phase-randomized cat signal.

    The odd branch carries weight `purity`, the even branch the remainder.
    mu = 0 returns all-vacuum by convention.
    """
    if mu < 0.0:
        raise ValueError("signal amplitude mu must be >= 0")
    if not (0.0 <= purity <= 1.0):
        raise ValueError("purity must lie in [0, 1]")
    if mu == 0.0:
        probs = np.zeros(cutoff + 1)
        probs[0] = 1.0
        return PhotonNumberDistribution(probs=probs, tail_mass=0.0)
    n_max = cutoff + _TAIL_TERMS
    raw = _poisson_terms(mu, n_max)
    weights = np.where(
        np.arange(n_max + 1) % 2 == 1,
        purity / math.sinh(mu),
        (1.0 - purity) / math.cosh(mu),
    )
    terms = weights * raw
    probs = terms[: cutoff + 1]
    # remainder past the explicit terms, bounded with the heavier branch weight
    heavier = max(purity / math.sinh(mu), (1.0 - purity) / math.cosh(mu))
    ratio = mu / (n_max + 2.0)
    if ratio >= 0.5:
        raise ValueError("tail evaluation needs a higher cutoff for this intensity")
    remainder = heavier * float(raw[-1]) * ratio / (1.0 - ratio)
    tail = float(terms[cutoff + 1 :].sum() + remainder)
    return PhotonNumberDistribution(probs=probs, tail_mass=tail)


def vacuum_pnd(cutoff: int = 0) -> PhotonNumberDistribution:
    """Deterministic zero-photon distribution."""
    probs = np.zeros(cutoff + 1)
    probs[0] = 1.0
    return PhotonNumberDistribution(probs=probs, tail_mass=0.0)


def signal_pnd(spec: SourceSpec) -> PhotonNumberDistribution:
    """Photon-number distribution of the configured signal pulse."""
    if spec.signal_kind is SignalKind.CAT:
        return cat_pnd(spec.mu, spec.purity, spec.pnd_cutoff)
    return poisson_pnd(spec.mu, spec.pnd_cutoff)


def single_photon_prob(spec: SourceSpec) -> float:
    """Probability that one signal pulse carries exactly one photon.

    Closed forms: purity * mu / sinh(mu) for the cat signal (continuity value
    purity at mu = 0), mu * exp(-mu) for the coherent baseline.
    """
    if spec.signal_kind is SignalKind.CAT:
        if spec.mu == 0.0:
            return spec.purity
        return spec.purity * spec.mu / math.sinh(spec.mu)
    return spec.mu * math.exp(-spec.mu)


def vacuum_prob(spec: SourceSpec) -> float:
    """Probability that one signal pulse carries zero photons."""
    if spec.signal_kind is SignalKind.CAT:
        return (1.0 - spec.purity) / math.cosh(spec.mu)
    return math.exp(-spec.mu)


def require_tail_within(pnd: PhotonNumberDistribution, tol: float = DEFAULT_PND_TAIL_TOL) -> None:
    """Raise if the truncation tail exceeds the configured tolerance."""
    if pnd.tail_mass > tol:
        raise ValueError(
            f"photon-number truncation tail {pnd.tail_mass:.3e} exceeds tolerance {tol:.3e}"
        )
