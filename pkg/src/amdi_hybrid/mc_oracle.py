"""Event-level Monte-Carlo simulation of the click-pairing protocol.

Pulse classes, phases, and photon numbers are drawn per time bin; click
outcomes follow the same primitives the analytic model uses (phase-resolved
closed forms for coherent inputs, Fock yields behind the photon-number
distribution for cat signals), so any disagreement between the two is a
genuine defect rather than a modeling difference.

Sampling is sharded into fixed-size blocks of bins with one RNG stream per
shard, keyed by (seed, shard index).  Results are therefore reproducible
for a seed no matter how the shards would be scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .detection import (
    DECOY_NU,
    DECOY_OMEGA,
    FILTERED_COMBOS,
    SIGNAL,
    VACUUM,
    DetectorModel,
    class_intensity,
    class_pnd,
    class_send_prob,
    click_probs_theta,
    fock_yields,
)
from .pairing_stats import (
    TOTAL_DECOMPS,
    Category,
    PairingStatistics,
    ProtocolTiming,
)
from .sources import SignalKind, SourceSpec

_CLASS_ORDER = (SIGNAL, DECOY_NU, DECOY_OMEGA, VACUUM)
_CHUNK = 1 << 17

# (early class, late class) -> announced per-party total; combinations
# absent here (two signals, signal with decoy) drop the pair
_TOTAL_OF_PAIR: Dict[Tuple[str, str], str] = {}
for _total, _arrangements in TOTAL_DECOMPS.items():
    for _early, _late in _arrangements:
        _TOTAL_OF_PAIR[(_early, _late)] = _total


@dataclass(frozen=True)
class EmpiricalStats:
    """Tallies of one simulated session.

    Counts are exact integers; `category_counts` covers only pairs whose
    announced totals survive the pair-level rules, so its values sum to
    `retained_pairs`, not to `pairs`.
    """

    sample_size: int
    rep_rate_hz: float
    clicks: int
    retained_clicks: int
    pairs: int
    retained_pairs: int
    category_counts: Mapping[Category, int]
    z_errors: int
    gap_histogram: Mapping[int, int]

    @property
    def z_pairs(self) -> int:
        return self.category_counts.get(("sig", "sig"), 0)

    def mean_gap_bins(self) -> float:
        if self.pairs == 0:
            return math.nan
        total = sum(gap * count for gap, count in self.gap_histogram.items())
        return total / self.pairs

    def gap_std_bins(self) -> float:
        if self.pairs < 2:
            return math.nan
        mean = self.mean_gap_bins()
        var = sum(count * (gap - mean) ** 2
                  for gap, count in self.gap_histogram.items())
        return math.sqrt(var / (self.pairs - 1))

    def standard_errors(self) -> Dict[str, float]:
        """Binomial standard errors of the headline counts."""
        out = {
            "clicks": _binomial_sigma(self.clicks, self.sample_size),
            "retained_clicks": _binomial_sigma(self.retained_clicks,
                                               self.sample_size),
            "pairs": _binomial_sigma(self.pairs, self.sample_size),
        }
        for category, count in self.category_counts.items():
            name = f"category[{category[0]},{category[1]}]"
            out[name] = _binomial_sigma(count, max(self.retained_pairs, 1))
        return out


def _binomial_sigma(count: float, trials: float) -> float:
    if trials <= 0:
        return math.nan
    p = min(max(count / trials, 0.0), 1.0)
    return math.sqrt(trials * p * (1.0 - p))


def _class_cdf(spec: SourceSpec) -> np.ndarray:
    probs = np.array([class_send_prob(spec, c) for c in _CLASS_ORDER])
    total = probs.sum()
    if total > 1.0 + 1e-9:
        raise ValueError("class probabilities exceed 1")
    return np.cumsum(probs)


def _pnd_cdfs(spec: SourceSpec) -> List[np.ndarray]:
    cdfs = []
    for cls in _CLASS_ORDER:
        pnd = class_pnd(spec, cls)
        cdfs.append(np.cumsum(pnd.probs))
    return cdfs


def _yield_tables(model: DetectorModel, cutoff: int
                  ) -> Tuple[np.ndarray, np.ndarray]:
    size = cutoff + 1
    left = np.zeros((size, size))
    right = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            left[i, j], right[i, j] = fock_yields(i, j, model)
    return left, right


def _involves_cat(cls: str, spec: SourceSpec) -> bool:
    return cls == SIGNAL and spec.signal_kind is SignalKind.CAT


@dataclass(frozen=True)
class _ClickRecord:
    bins: np.ndarray
    class_a: np.ndarray
    class_b: np.ndarray


def _simulate_shard(
    shard: int,
    n_bins: int,
    seed: int,
    spec_a: SourceSpec,
    spec_b: SourceSpec,
    model: DetectorModel,
    tables: Dict,
) -> Tuple[int, _ClickRecord]:
    rng = np.random.Generator(np.random.Philox(key=seed).jumped(shard))
    u_class_a = rng.random(n_bins)
    u_class_b = rng.random(n_bins)
    u_photon_a = rng.random(n_bins)
    u_photon_b = rng.random(n_bins)
    theta_a = rng.random(n_bins) * (2.0 * math.pi)
    theta_b = rng.random(n_bins) * (2.0 * math.pi)
    u_click = rng.random(n_bins)

    cls_a = np.searchsorted(tables["cdf_a"], u_class_a, side="right")
    cls_b = np.searchsorted(tables["cdf_b"], u_class_b, side="right")

    q_left = np.zeros(n_bins)
    q_right = np.zeros(n_bins)
    for ia, name_a in enumerate(_CLASS_ORDER):
        for ib, name_b in enumerate(_CLASS_ORDER):
            mask = (cls_a == ia) & (cls_b == ib)
            if not mask.any():
                continue
            if _involves_cat(name_a, spec_a) or _involves_cat(name_b, spec_b):
                n_a = np.searchsorted(tables["pnd_a"][ia],
                                      u_photon_a[mask], side="right")
                n_b = np.searchsorted(tables["pnd_b"][ib],
                                      u_photon_b[mask], side="right")
                q_left[mask] = tables["yield_left"][n_a, n_b]
                q_right[mask] = tables["yield_right"][n_a, n_b]
            else:
                theta = theta_a[mask] - theta_b[mask]
                ql, qr = click_probs_theta(
                    class_intensity(spec_a, name_a),
                    class_intensity(spec_b, name_b),
                    theta, model,
                )
                q_left[mask] = ql
                q_right[mask] = qr

    clicked = u_click < (q_left + q_right)
    raw_clicks = int(np.count_nonzero(clicked))

    retained = clicked.copy()
    for name_a, name_b in FILTERED_COMBOS:
        ia = _CLASS_ORDER.index(name_a)
        ib = _CLASS_ORDER.index(name_b)
        retained &= ~((cls_a == ia) & (cls_b == ib))

    idx = np.nonzero(retained)[0]
    record = _ClickRecord(
        bins=idx + shard * _CHUNK,
        class_a=cls_a[idx].astype(np.int8),
        class_b=cls_b[idx].astype(np.int8),
    )
    return raw_clicks, record


def simulate(
    specs: Tuple[SourceSpec, SourceSpec],
    model: DetectorModel,
    timing: ProtocolTiming,
    sample_size: int,
    seed: int,
) -> EmpiricalStats:
    """Sample the whole session and tally pairing outcomes.

    `sample_size` plays the role of the session pulse count; the pairing
    window length in bins comes from `timing`.
    """
    if sample_size < 10_000:
        raise ValueError("need at least 10^4 pulses for meaningful statistics")
    spec_a, spec_b = specs
    cutoff = max(spec_a.pnd_cutoff, spec_b.pnd_cutoff)
    yield_left, yield_right = _yield_tables(model, cutoff)
    tables = {
        "cdf_a": _class_cdf(spec_a),
        "cdf_b": _class_cdf(spec_b),
        "pnd_a": _pnd_cdfs(spec_a),
        "pnd_b": _pnd_cdfs(spec_b),
        "yield_left": yield_left,
        "yield_right": yield_right,
    }

    n_shards = (sample_size + _CHUNK - 1) // _CHUNK
    raw_clicks = 0
    records: List[_ClickRecord] = []
    for shard in range(n_shards):
        n_bins = min(_CHUNK, sample_size - shard * _CHUNK)
        clicks, record = _simulate_shard(
            shard, n_bins, seed, spec_a, spec_b, model, tables)
        raw_clicks += clicks
        records.append(record)

    bins = np.concatenate([r.bins for r in records])
    class_a = np.concatenate([r.class_a for r in records])
    class_b = np.concatenate([r.class_b for r in records])
    return _pair_and_tally(sample_size, raw_clicks, bins, class_a, class_b,
                           timing)


def _pair_and_tally(
    sample_size: int,
    raw_clicks: int,
    bins: np.ndarray,
    class_a: np.ndarray,
    class_b: np.ndarray,
    timing: ProtocolTiming,
) -> EmpiricalStats:
    window_bins = timing.n_window_bins
    category_counts: Dict[Category, int] = {}
    gap_histogram: Dict[int, int] = {}
    pairs = 0
    retained_pairs = 0
    z_errors = 0

    open_bin: Optional[int] = None
    open_idx = 0
    for i in range(bins.size):
        t = int(bins[i])
        if open_bin is None:
            open_bin = t
            open_idx = i
            continue
        gap = t - open_bin
        if gap > window_bins:
            # opener expired unmatched; this click starts the next window
            open_bin = t
            open_idx = i
            continue
        pairs += 1
        gap_histogram[gap] = gap_histogram.get(gap, 0) + 1
        early_a = _CLASS_ORDER[class_a[open_idx]]
        early_b = _CLASS_ORDER[class_b[open_idx]]
        late_a = _CLASS_ORDER[class_a[i]]
        late_b = _CLASS_ORDER[class_b[i]]
        total_a = _TOTAL_OF_PAIR.get((early_a, late_a))
        total_b = _TOTAL_OF_PAIR.get((early_b, late_b))
        if total_a is not None and total_b is not None:
            retained_pairs += 1
            key = (total_a, total_b)
            category_counts[key] = category_counts.get(key, 0) + 1
            if key == ("sig", "sig"):
                # bit = which bin carried the signal, Bob's flipped; the
                # two signals landing in the same bin decorrelates them
                if (early_a == SIGNAL) == (early_b == SIGNAL):
                    z_errors += 1
        open_bin = None
    return EmpiricalStats(
        sample_size=sample_size,
        rep_rate_hz=timing.rep_rate_hz,
        clicks=raw_clicks,
        retained_clicks=int(bins.size),
        pairs=pairs,
        retained_pairs=retained_pairs,
        category_counts=category_counts,
        z_errors=z_errors,
        gap_histogram=gap_histogram,
    )


# statistics with expected counts below this stay out of the z-score
# verdicts; the normal approximation is meaningless there
_MIN_EXPECTED = 10.0


def compare(
    analytic: PairingStatistics,
    empirical: EmpiricalStats,
    threshold: float = 3.0,
) -> Dict:
    """Per-statistic z-scores of the simulation against the expectations.

    The analytic record must have been computed with the session length
    equal to the empirical sample size; expected counts are used directly.
    """
    if empirical.sample_size <= 0 or empirical.pairs == 0:
        raise ValueError("empirical record is empty; nothing to compare")

    entries: List[Dict] = []

    def add_count(name: str, expected: float, observed: float,
                  trials: float) -> None:
        p = min(max(expected / trials, 0.0), 1.0) if trials > 0 else 0.0
        sigma = math.sqrt(trials * p * (1.0 - p)) if trials > 0 else math.nan
        if expected < _MIN_EXPECTED:
            entries.append({
                "statistic": name, "expected": expected, "observed": observed,
                "sigma": sigma, "z": None, "status": "insufficient",
            })
            return
        z = (observed - expected) / sigma
        entries.append({
            "statistic": name, "expected": expected, "observed": observed,
            "sigma": sigma, "z": z,
            "status": "pass" if abs(z) <= threshold else "fail",
        })

    n = float(empirical.sample_size)
    add_count("retained_clicks", analytic.click_prob * n,
              empirical.retained_clicks, n)
    add_count("pairs", analytic.pair_total, empirical.pairs, n)
    # category tests condition on the observed retained-pair total, so the
    # shared click-number fluctuation cancels instead of polluting every
    # per-category z-score
    ana_retained = sum(analytic.pair_category_counts.values())
    obs_retained = float(empirical.retained_pairs)
    if ana_retained > 0.0:
        for category, expected in sorted(analytic.pair_category_counts.items()):
            share = expected / ana_retained
            add_count(f"category[{category[0]},{category[1]}]",
                      share * obs_retained,
                      empirical.category_counts.get(category, 0),
                      obs_retained)
    ana_z_pairs = analytic.pair_category_counts.get(("sig", "sig"), 0.0)
    obs_z_pairs = float(empirical.z_pairs)
    if ana_z_pairs > 0.0 and obs_z_pairs > 0.0:
        err_share = analytic.z_errors / ana_z_pairs
        add_count("z_errors", err_share * obs_z_pairs, empirical.z_errors,
                  obs_z_pairs)

    observed_gap = empirical.mean_gap_bins() / empirical.rep_rate_hz
    gap_sd = empirical.gap_std_bins() / empirical.rep_rate_hz
    if empirical.pairs >= 2 and math.isfinite(gap_sd) and gap_sd > 0.0:
        sigma = gap_sd / math.sqrt(empirical.pairs)
        z = (observed_gap - analytic.mean_pair_time_s) / sigma
        entries.append({
            "statistic": "mean_pair_time_s",
            "expected": analytic.mean_pair_time_s,
            "observed": observed_gap, "sigma": sigma, "z": z,
            "status": "pass" if abs(z) <= threshold else "fail",
        })

    failures = [e["statistic"] for e in entries if e["status"] == "fail"]
    return {
        "threshold": threshold,
        "sample_size": empirical.sample_size,
        "statistics": entries,
        "failures": failures,
        "all_pass": not failures,
    }
