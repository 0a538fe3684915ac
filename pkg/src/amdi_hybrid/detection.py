"""Channel, detector and interference model.

Both parties' pulses travel half the total distance each and interfere on a
balanced beamsplitter at the middle node, which reports which of its two
threshold detectors fired.  Only rounds where exactly one detector fires are
kept.  Two complementary descriptions are implemented and cross-checked:

* coherent description: for two coherent pulses with relative phase theta the
  two detectors see Poissonian light of mean eta*(k_a+k_b)/2 +- eta*sqrt(k_a
  k_b)*cos(theta), giving closed-form single-click probabilities and, after
  phase averaging, a Bessel-function gain;
* Fock description: for photon-number inputs (i, j) the beamsplitter routes p
  photons left with probability P_ij(p) from the interference amplitudes, and
  each detector fires through loss and dark counts independently given p.

The Fock path is what makes non-Poissonian (cat) signal statistics tractable;
the coherent path provides fast closed forms for the decoy intensities.  For
Poissonian inputs the two paths agree, which the test suite asserts.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np
from scipy.special import i0

from .defaults import DEFAULT_PND_CUTOFF
from .sources import (
    PhotonNumberDistribution,
    SignalKind,
    SourceSpec,
    cat_pnd,
    poisson_pnd,
    vacuum_pnd,
)

# Single-bin pulse classes and the click-filter rules.  A coincidence whose
# announced classes mix a signal with a decoy, or the two decoy intensities
# with each other, is announced and dropped before pairing.
SIGNAL = "signal"
DECOY_NU = "nu"
DECOY_OMEGA = "omega"
VACUUM = "vac"
PULSE_CLASSES = (SIGNAL, DECOY_NU, DECOY_OMEGA, VACUUM)

FILTERED_COMBOS = frozenset(
    {
        (SIGNAL, DECOY_NU),
        (DECOY_NU, SIGNAL),
        (SIGNAL, DECOY_OMEGA),
        (DECOY_OMEGA, SIGNAL),
        (DECOY_NU, DECOY_OMEGA),
        (DECOY_OMEGA, DECOY_NU),
    }
)

RETAINED_COMBOS = tuple(
    (a, b)
    for a in PULSE_CLASSES
    for b in PULSE_CLASSES
    if (a, b) not in FILTERED_COMBOS
)


@dataclass(frozen=True)
class DetectorModel:
    """Fiber channel plus middle-node detector parameters.

    distance_km is the total transmitter-to-transmitter distance; the overall
    per-photon survival probability folds both half-arms and the detector
    efficiency into eta = eta_d * 10^(-alpha*l/20).
    """

    eta_d: float
    p_dark: float
    alpha_db_per_km: float
    distance_km: float

    def __post_init__(self) -> None:
        if not (0.0 < self.eta_d <= 1.0):
            raise ValueError("detector efficiency must lie in (0, 1]")
        if not (0.0 <= self.p_dark < 1.0):
            raise ValueError("dark count probability must lie in [0, 1)")
        if not (self.alpha_db_per_km > 0.0):
            raise ValueError("attenuation must be positive")
        if self.distance_km < 0.0:
            raise ValueError("distance must be non-negative")

    @property
    def eta(self) -> float:
        return transmittance(self)


def transmittance(model: DetectorModel) -> float:
    """Overall per-photon survival probability eta_d * 10^(-alpha*l/20)."""
    return model.eta_d * 10.0 ** (-model.alpha_db_per_km * model.distance_km / 20.0)


def click_probs_theta(k_a, k_b, theta, model: DetectorModel):
    """Single-click probabilities for coherent inputs at relative phase theta.

    Returns (q_L, q_R), the probabilities that only the left (right) detector
    fires.  Accepts scalar or ndarray theta; the return broadcasts with it.
    """
    if k_a < 0.0 or k_b < 0.0:
        raise ValueError("intensities must be non-negative")
    eta = model.eta
    half_sum = 0.5 * eta * (k_a + k_b)
    cross = eta * math.sqrt(k_a * k_b)
    cos_t = np.cos(theta)
    # single-float exponents plus expm1 keep the dark-count-limited port
    # (mean near zero) at full relative precision
    log_survive = math.log1p(-model.p_dark)
    mean_left = half_sum + cross * cos_t
    mean_right = half_sum - cross * cos_t
    silent_left = np.exp(log_survive - mean_left)
    silent_right = np.exp(log_survive - mean_right)
    fire_left = -np.expm1(log_survive - mean_left)
    fire_right = -np.expm1(log_survive - mean_right)
    return fire_left * silent_right, silent_left * fire_right


def gain_wcs(k_a: float, k_b: float, model: DetectorModel) -> float:
    """Phase-averaged single-click probability for two coherent intensities."""
    if k_a < 0.0 or k_b < 0.0:
        raise ValueError("intensities must be non-negative")
    eta = model.eta
    survive = 1.0 - model.p_dark
    half_sum = 0.5 * eta * (k_a + k_b)
    cross = eta * math.sqrt(k_a * k_b)
    return float(
        2.0 * survive * math.exp(-half_sum) * i0(cross)
        - 2.0 * survive**2 * math.exp(-2.0 * half_sum)
    )


@dataclass(frozen=True)
class FockOutcome:
    """One beamsplitter routing outcome: p_left photons left, rest right."""

    p_left: int
    prob: float


_LN2 = math.log(2.0)
_split_lock = threading.Lock()
_split_cache: Dict[Tuple[int, int], np.ndarray] = {}
_pascal_cache: Dict[int, np.ndarray] = {}
_lgamma_cache: Dict[int, np.ndarray] = {}


def _pascal(n_max: int) -> np.ndarray:
    """Binomial coefficient table C[n, k] for n, k <= n_max."""
    table = _pascal_cache.get(n_max)
    if table is None:
        table = np.zeros((n_max + 1, n_max + 1))
        table[:, 0] = 1.0
        for n in range(1, n_max + 1):
            table[n, 1 : n + 1] = table[n - 1, 1 : n + 1] + table[n - 1, 0:n]
        _pascal_cache[n_max] = table
    return table


def _log_factorials(n_max: int) -> np.ndarray:
    arr = _lgamma_cache.get(n_max)
    if arr is None:
        arr = np.array([math.lgamma(n + 1) for n in range(n_max + 1)])
        _lgamma_cache[n_max] = arr
    return arr


def _splitting_probs(i: int, j: int) -> np.ndarray:
    """P_ij(p) for p = 0..i+j, from the interference amplitudes."""
    key = (i, j)
    cached = _split_cache.get(key)
    if cached is not None:
        return cached
    total = i + j
    with _split_lock:
        cached = _split_cache.get(key)
        if cached is not None:
            return cached
        comb = _pascal(max(total, 1))
        lfact = _log_factorials(max(total, 1))
        p_idx = np.arange(total + 1)
        k_idx = np.arange(j + 1)
        from_i = p_idx[:, None] - k_idx[None, :]
        valid = (from_i >= 0) & (from_i <= i)
        choose_i = np.where(valid, comb[i, np.clip(from_i, 0, i)], 0.0)
        signs = np.where((j - k_idx) % 2 == 0, 1.0, -1.0)
        inner = choose_i @ (signs * comb[j, k_idx])
        log_scale = 0.5 * (
            lfact[p_idx] + lfact[total - p_idx] - lfact[i] - lfact[j] - total * _LN2
        )
        amps = inner * np.exp(log_scale)
        probs = amps * amps
        probs.setflags(write=False)
        _split_cache[key] = probs
        return probs


def fock_interference_distribution(i: int, j: int) -> Tuple[FockOutcome, ...]:
    """Routing distribution for Fock inputs (i photons, j photons).

    Outcome p means p photons reach the left detector and i+j-p the right one.
    """
    if i < 0 or j < 0:
        raise ValueError("photon counts must be non-negative")
    probs = _splitting_probs(i, j)
    return tuple(FockOutcome(p, float(probs[p])) for p in range(i + j + 1))


def fock_yields(i: int, j: int, model: DetectorModel) -> Tuple[float, float]:
    """Single-click yields (Y_L, Y_R) for Fock inputs (i, j).

    Given p photons on the left detector, it fires with probability
    1-(1-p_dark)(1-eta)^p; the right detector sees the remaining photons.
    Only exclusive clicks count.
    """
    if i < 0 or j < 0:
        raise ValueError("photon counts must be non-negative")
    probs = _splitting_probs(i, j)
    total = i + j
    p_idx = np.arange(total + 1)
    miss = (1.0 - model.p_dark) * (1.0 - model.eta) ** p_idx
    fire_left = 1.0 - miss
    fire_right = 1.0 - miss[::-1]
    y_left = float(np.sum(fire_left * (1.0 - fire_right) * probs))
    y_right = float(np.sum((1.0 - fire_left) * fire_right * probs))
    return y_left, y_right


_yield_lock = threading.Lock()
_yield_cache: Dict[Tuple[float, float, int], np.ndarray] = {}


def _padded_splitting_table(cutoff: int) -> np.ndarray:
    """Array P3[i, j, p] of routing probabilities, zero-padded past i+j."""
    key = ("padded", cutoff)
    cached = _split_cache.get(key)  # type: ignore[arg-type]
    if cached is not None:
        return cached
    size = cutoff + 1
    table = np.zeros((size, size, 2 * cutoff + 1))
    for i in range(size):
        for j in range(size):
            probs = _splitting_probs(i, j)
            table[i, j, : probs.size] = probs
    table.setflags(write=False)
    _split_cache[key] = table  # type: ignore[index]
    return table


def yield_sum_matrix(model: DetectorModel, cutoff: int) -> np.ndarray:
    """Matrix Y[i, j] = Y_L(i,j) + Y_R(i,j) for i, j <= cutoff.

    Memoized per (eta, p_dark, cutoff); entries are pure functions of those
    values, so the cache behaves as if recomputed.
    """
    key = (model.eta, model.p_dark, cutoff)
    cached = _yield_cache.get(key)
    if cached is not None:
        return cached
    with _yield_lock:
        cached = _yield_cache.get(key)
        if cached is not None:
            return cached
        table = _padded_splitting_table(cutoff)
        p_idx = np.arange(2 * cutoff + 1)
        miss_p = (1.0 - model.p_dark) * (1.0 - model.eta) ** p_idx
        totals = np.arange(cutoff + 1)[:, None] + np.arange(cutoff + 1)[None, :]
        # miss on the right detector depends on i+j-p; build it per (i, j, p)
        exponents = totals[:, :, None] - p_idx[None, None, :]
        miss_q = np.where(
            exponents >= 0,
            (1.0 - model.p_dark) * (1.0 - model.eta) ** np.maximum(exponents, 0),
            0.0,
        )
        fire_p = 1.0 - miss_p[None, None, :]
        fire_q = 1.0 - miss_q
        exclusive = fire_p * (1.0 - fire_q) + (1.0 - fire_p) * fire_q
        matrix = np.sum(exclusive * table, axis=2)
        matrix.setflags(write=False)
        _yield_cache[key] = matrix
        return matrix


@dataclass(frozen=True)
class TruncatedGain:
    """Gain value plus an upper bound on the photon-number truncation error."""

    value: float
    truncation_bound: float


def gain_generic(
    pnd_a: PhotonNumberDistribution,
    pnd_b: PhotonNumberDistribution,
    model: DetectorModel,
) -> TruncatedGain:
    """Single-click gain for arbitrary photon-number mixtures.

    Sums P_a(i) P_b(j) (Y_L + Y_R) over the truncated supports; the reported
    truncation bound is tail_mass_a + tail_mass_b (each missing term is a
    probability times a yield <= 1).
    """
    cutoff = max(DEFAULT_PND_CUTOFF, pnd_a.cutoff, pnd_b.cutoff)
    matrix = yield_sum_matrix(model, cutoff)
    la = pnd_a.probs.size
    lb = pnd_b.probs.size
    value = float(pnd_a.probs @ matrix[:la, :lb] @ pnd_b.probs)
    return TruncatedGain(value=value, truncation_bound=pnd_a.tail_mass + pnd_b.tail_mass)


@dataclass(frozen=True)
class GainTable:
    """Phase-averaged gains per announced pulse-class pair.

    Keys are (class_a, class_b) over {signal, nu, omega, vac}; filtered
    combinations are present only when built with include_filtered.  The
    detector model is kept alongside so phase-resolved quantities can be
    derived from the same table.
    """

    gains: Mapping[Tuple[str, str], float]
    truncation_bound: float
    model: DetectorModel

    def __getitem__(self, key: Tuple[str, str]) -> float:
        return self.gains[key]

    def __contains__(self, key: Tuple[str, str]) -> bool:
        return key in self.gains

    def items(self) -> Iterable[Tuple[Tuple[str, str], float]]:
        return self.gains.items()


def class_intensity(spec: SourceSpec, pulse_class: str) -> float:
    """Mean photon number announced for a pulse class."""
    if pulse_class == SIGNAL:
        return spec.mu
    if pulse_class == DECOY_NU:
        return spec.nu
    if pulse_class == DECOY_OMEGA:
        return spec.omega
    if pulse_class == VACUUM:
        return 0.0
    raise KeyError(pulse_class)


def class_send_prob(spec: SourceSpec, pulse_class: str) -> float:
    if pulse_class == SIGNAL:
        return spec.p_signal
    if pulse_class == DECOY_NU:
        return spec.p_nu
    if pulse_class == DECOY_OMEGA:
        return spec.p_omega
    if pulse_class == VACUUM:
        return spec.p_vacuum
    raise KeyError(pulse_class)


def class_pnd(spec: SourceSpec, pulse_class: str) -> PhotonNumberDistribution:
    """Photon-number distribution of one announced pulse class."""
    if pulse_class == SIGNAL:
        if spec.signal_kind is SignalKind.CAT:
            return cat_pnd(spec.mu, spec.purity, spec.pnd_cutoff)
        return poisson_pnd(spec.mu, spec.pnd_cutoff)
    if pulse_class == VACUUM:
        return vacuum_pnd()
    return poisson_pnd(class_intensity(spec, pulse_class), spec.pnd_cutoff)


def build_gain_table(
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    model: DetectorModel,
    include_filtered: bool = False,
) -> GainTable:
    """Gains for every retained pulse-class pair (optionally the filtered ones).

    Coherent-only pairs use the Bessel closed form; pairs involving a cat
    signal go through the Fock yields with the cat photon-number distribution.
    """
    gains: Dict[Tuple[str, str], float] = {}
    worst_truncation = 0.0
    combos = (
        tuple((a, b) for a in PULSE_CLASSES for b in PULSE_CLASSES)
        if include_filtered
        else RETAINED_COMBOS
    )
    for class_a, class_b in combos:
        cat_a = class_a == SIGNAL and spec_a.signal_kind is SignalKind.CAT
        cat_b = class_b == SIGNAL and spec_b.signal_kind is SignalKind.CAT
        if cat_a or cat_b:
            result = gain_generic(
                class_pnd(spec_a, class_a), class_pnd(spec_b, class_b), model
            )
            gains[(class_a, class_b)] = result.value
            worst_truncation = max(worst_truncation, result.truncation_bound)
        else:
            gains[(class_a, class_b)] = gain_wcs(
                class_intensity(spec_a, class_a),
                class_intensity(spec_b, class_b),
                model,
            )
    return GainTable(gains=gains, truncation_bound=worst_truncation, model=model)
