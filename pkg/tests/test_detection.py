"""Interference, click and gain model, checked against from-scratch oracles.

The coherent path is validated by numerical phase integration of an
independently coded integrand; the Fock path by exact rational arithmetic on
the interference amplitudes; and the two paths against each other on
Poissonian inputs, where they must agree.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amdi_hybrid.detection import (
    DECOY_NU,
    DECOY_OMEGA,
    FILTERED_COMBOS,
    PULSE_CLASSES,
    RETAINED_COMBOS,
    SIGNAL,
    VACUUM,
    DetectorModel,
    build_gain_table,
    click_probs_theta,
    fock_interference_distribution,
    fock_yields,
    gain_generic,
    gain_wcs,
    transmittance,
    yield_sum_matrix,
)
from amdi_hybrid.sources import SignalKind, SourceSpec, cat_pnd, poisson_pnd, vacuum_pnd

MODEL_100 = DetectorModel(eta_d=0.8, p_dark=1e-8, alpha_db_per_km=0.16,
                          distance_km=100.0)
MODEL_0 = DetectorModel(eta_d=0.8, p_dark=1e-8, alpha_db_per_km=0.16,
                        distance_km=0.0)
MODEL_NOISY = DetectorModel(eta_d=0.6, p_dark=1e-5, alpha_db_per_km=0.2,
                            distance_km=50.0)


def _oracle_click_probs(k_a, k_b, theta, model):
    """Exclusive-click probabilities built from the two detector means."""
    eta = model.eta_d * 10.0 ** (-model.alpha_db_per_km * model.distance_km / 20.0)
    lam_left = 0.5 * eta * (k_a + k_b) + eta * math.sqrt(k_a * k_b) * math.cos(theta)
    lam_right = 0.5 * eta * (k_a + k_b) - eta * math.sqrt(k_a * k_b) * math.cos(theta)
    log_survive = math.log1p(-model.p_dark)
    silent_left = math.exp(log_survive - lam_left)
    silent_right = math.exp(log_survive - lam_right)
    fire_left = -math.expm1(log_survive - lam_left)
    fire_right = -math.expm1(log_survive - lam_right)
    return fire_left * silent_right, silent_left * fire_right


def _oracle_phase_averaged_gain(k_a, k_b, model, points=4096):
    thetas = np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)
    both = [sum(_oracle_click_probs(k_a, k_b, t, model)) for t in thetas]
    return math.fsum(both) / points


def _split_prob_exact(i: int, j: int, p: int) -> Fraction:
    """Routing probability via exact integer combinatorics."""
    s = i + j
    amp = sum(
        (-1) ** (j - k) * math.comb(i, p - k) * math.comb(j, k)
        for k in range(max(0, p - i), min(j, p) + 1)
    )
    scale = Fraction(
        math.factorial(p) * math.factorial(s - p),
        2**s * math.factorial(i) * math.factorial(j),
    )
    return Fraction(amp * amp) * scale


@pytest.mark.parametrize(
    "distance,expected_digits",
    [(100.0, 0.126791), (400.0, 5.0464e-4)],
)
def test_transmittance_frozen(distance, expected_digits):
    model = DetectorModel(eta_d=0.8, p_dark=1e-8, alpha_db_per_km=0.16,
                          distance_km=distance)
    oracle = 0.8 * 10.0 ** (-0.16 * distance / 20.0)
    assert transmittance(model) == pytest.approx(oracle, rel=1e-15)
    # quoted reference figures carry rounding in the last digits
    assert transmittance(model) == pytest.approx(expected_digits, rel=1e-3)
    assert model.eta == transmittance(model)


@pytest.mark.parametrize("k_a,k_b", [(0.1, 0.1), (0.2, 0.05), (0.0, 0.3), (0.0, 0.0)])
@pytest.mark.parametrize("model", [MODEL_100, MODEL_0, MODEL_NOISY])
def test_click_probs_match_oracle(k_a, k_b, model):
    for theta in (0.0, 0.7, math.pi / 2, math.pi, 4.9):
        got = click_probs_theta(k_a, k_b, theta, model)
        want = _oracle_click_probs(k_a, k_b, theta, model)
        assert got[0] == pytest.approx(want[0], rel=1e-12, abs=1e-300)
        assert got[1] == pytest.approx(want[1], rel=1e-12, abs=1e-300)


def test_click_probs_vectorized_over_theta():
    thetas = np.linspace(0.0, 2 * math.pi, 17)
    q_left, q_right = click_probs_theta(0.15, 0.08, thetas, MODEL_100)
    assert q_left.shape == thetas.shape
    for idx, theta in enumerate(thetas):
        scalar = click_probs_theta(0.15, 0.08, float(theta), MODEL_100)
        assert q_left[idx] == pytest.approx(scalar[0], rel=1e-15)
        assert q_right[idx] == pytest.approx(scalar[1], rel=1e-15)


def test_click_probs_swap_under_phase_flip():
    q_left, q_right = click_probs_theta(0.1, 0.2, 0.4, MODEL_100)
    r_left, r_right = click_probs_theta(0.1, 0.2, 0.4 + math.pi, MODEL_100)
    assert q_left == pytest.approx(r_right, rel=1e-12)
    assert q_right == pytest.approx(r_left, rel=1e-12)


@pytest.mark.parametrize("k_a,k_b", [(0.1, 0.1), (0.2, 0.05), (0.5, 0.5), (0.0, 0.1)])
@pytest.mark.parametrize("model", [MODEL_100, MODEL_0, MODEL_NOISY])
def test_gain_wcs_matches_phase_quadrature(k_a, k_b, model):
    """Closed form vs trapezoid integration of the from-scratch integrand.

    The integrand is periodic and smooth, so the trapezoid rule at 4096
    points is far below the 1e-10 comparison level.
    """
    oracle = _oracle_phase_averaged_gain(k_a, k_b, model)
    assert gain_wcs(k_a, k_b, model) == pytest.approx(oracle, rel=1e-10)


def test_gain_wcs_vacuum_closed_form():
    # with both inputs empty only dark counts fire
    for model in (MODEL_100, MODEL_NOISY):
        expected = 2.0 * model.p_dark * (1.0 - model.p_dark)
        assert gain_wcs(0.0, 0.0, model) == pytest.approx(expected, rel=1e-12)


def test_fock_distribution_matches_exact_rationals():
    for i in range(9):
        for j in range(9):
            outcomes = fock_interference_distribution(i, j)
            assert len(outcomes) == i + j + 1
            for outcome in outcomes:
                exact = _split_prob_exact(i, j, outcome.p_left)
                assert outcome.prob == pytest.approx(float(exact), rel=1e-12,
                                                     abs=1e-15)


def test_fock_distribution_unitarity_wide():
    for i in range(0, 41):
        for j in range(0, 41 - i):
            total = math.fsum(o.prob for o in fock_interference_distribution(i, j))
            assert total == pytest.approx(1.0, abs=1e-9)


def test_single_photon_splits_evenly():
    outcomes = {o.p_left: o.prob for o in fock_interference_distribution(1, 0)}
    assert outcomes[0] == pytest.approx(0.5, rel=1e-15)
    assert outcomes[1] == pytest.approx(0.5, rel=1e-15)


def test_two_photon_bunching():
    """One photon per side never splits, the two-photon bunching dip."""
    outcomes = {o.p_left: o.prob for o in fock_interference_distribution(1, 1)}
    assert outcomes[1] == 0.0
    assert outcomes[0] == pytest.approx(0.5, rel=1e-15)
    assert outcomes[2] == pytest.approx(0.5, rel=1e-15)
    pairs = {o.p_left: o.prob for o in fock_interference_distribution(2, 2)}
    assert pairs[0] == pytest.approx(3.0 / 8.0, rel=1e-12)
    assert pairs[1] == pytest.approx(0.0, abs=1e-15)
    assert pairs[2] == pytest.approx(1.0 / 4.0, rel=1e-12)
    assert pairs[3] == pytest.approx(0.0, abs=1e-15)
    assert pairs[4] == pytest.approx(3.0 / 8.0, rel=1e-12)


def test_fock_yields_lossless_limit():
    # eta=1, no dark counts: an exclusive left click needs every photon left
    model = DetectorModel(eta_d=1.0, p_dark=0.0, alpha_db_per_km=0.16,
                          distance_km=0.0)
    for i, j in ((1, 0), (1, 1), (2, 1), (3, 2)):
        y_left, y_right = fock_yields(i, j, model)
        dist = {o.p_left: o.prob for o in fock_interference_distribution(i, j)}
        assert y_left == pytest.approx(dist[i + j], rel=1e-12, abs=1e-15)
        assert y_right == pytest.approx(dist[0], rel=1e-12, abs=1e-15)


def test_fock_yields_exchange_symmetry():
    for i in range(11):
        for j in range(11):
            y_left, y_right = fock_yields(i, j, MODEL_NOISY)
            mirrored = fock_yields(j, i, MODEL_NOISY)
            assert y_left == pytest.approx(mirrored[1], rel=1e-12, abs=1e-300)
            assert y_right == pytest.approx(mirrored[0], rel=1e-12, abs=1e-300)


def test_fock_yields_are_probabilities():
    for i in range(6):
        for j in range(6):
            y_left, y_right = fock_yields(i, j, MODEL_100)
            assert 0.0 <= y_left <= 1.0
            assert 0.0 <= y_right <= 1.0
            assert y_left + y_right <= 1.0


def test_vacuum_yields_are_dark_counts():
    y_left, y_right = fock_yields(0, 0, MODEL_NOISY)
    p_d = MODEL_NOISY.p_dark
    assert y_left == pytest.approx(p_d * (1.0 - p_d), rel=1e-12)
    assert y_right == pytest.approx(p_d * (1.0 - p_d), rel=1e-12)


def test_yield_sum_matrix_consistent_with_pointwise():
    matrix = yield_sum_matrix(MODEL_100, 12)
    assert matrix.shape == (13, 13)
    for i in (0, 1, 2, 5, 12):
        for j in (0, 1, 3, 12):
            assert matrix[i, j] == pytest.approx(sum(fock_yields(i, j, MODEL_100)),
                                                 rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("mu_a,mu_b", [(0.05, 0.05), (0.2, 0.1), (0.0, 0.15)])
@pytest.mark.parametrize("model", [MODEL_100, MODEL_0, MODEL_NOISY])
def test_generic_gain_agrees_with_coherent_form_on_poisson(mu_a, mu_b, model):
    """Fock-path gain on Poisson mixtures must reproduce the Bessel form."""
    result = gain_generic(poisson_pnd(mu_a, 40), poisson_pnd(mu_b, 40), model)
    assert result.truncation_bound < 1e-12
    assert result.value == pytest.approx(gain_wcs(mu_a, mu_b, model), abs=1e-10,
                                         rel=1e-8)


def test_generic_gain_vacuum_inputs():
    result = gain_generic(vacuum_pnd(), vacuum_pnd(), MODEL_NOISY)
    expected = 2.0 * MODEL_NOISY.p_dark * (1.0 - MODEL_NOISY.p_dark)
    assert result.value == pytest.approx(expected, rel=1e-12)
    assert result.truncation_bound == 0.0


def test_generic_gain_reports_truncation():
    loose = gain_generic(poisson_pnd(2.0, 4), poisson_pnd(0.1, 40), MODEL_100)
    tight = gain_generic(poisson_pnd(2.0, 40), poisson_pnd(0.1, 40), MODEL_100)
    assert loose.truncation_bound > tight.truncation_bound
    assert abs(loose.value - tight.value) <= loose.truncation_bound + 1e-15


SPEC_CAT = SourceSpec(mu=0.088, nu=0.087, omega=0.036, p_signal=0.333, p_nu=0.007,
                      p_omega=0.038)
SPEC_WCS = SourceSpec(mu=0.088, nu=0.087, omega=0.036, p_signal=0.333, p_nu=0.007,
                      p_omega=0.038, signal_kind=SignalKind.WCS)


def test_gain_table_retains_ten_combos():
    table = build_gain_table(SPEC_CAT, SPEC_CAT, MODEL_100)
    assert set(table.gains) == set(RETAINED_COMBOS)
    assert len(table.gains) == 10
    for combo in FILTERED_COMBOS:
        assert combo not in table
    full = build_gain_table(SPEC_CAT, SPEC_CAT, MODEL_100, include_filtered=True)
    assert len(full.gains) == 16
    assert set(full.gains) == {(a, b) for a in PULSE_CLASSES for b in PULSE_CLASSES}


def test_gain_table_decoy_entries_use_coherent_form():
    table = build_gain_table(SPEC_CAT, SPEC_CAT, MODEL_100)
    assert table[(DECOY_NU, DECOY_NU)] == pytest.approx(
        gain_wcs(0.087, 0.087, MODEL_100), rel=1e-15)
    assert table[(DECOY_OMEGA, VACUUM)] == pytest.approx(
        gain_wcs(0.036, 0.0, MODEL_100), rel=1e-15)
    assert table[(VACUUM, VACUUM)] == pytest.approx(
        gain_wcs(0.0, 0.0, MODEL_100), rel=1e-15)


def test_gain_table_signal_entries_use_fock_path():
    table = build_gain_table(SPEC_CAT, SPEC_CAT, MODEL_100)
    direct = gain_generic(cat_pnd(0.088, 1.0, 40), cat_pnd(0.088, 1.0, 40), MODEL_100)
    assert table[(SIGNAL, SIGNAL)] == pytest.approx(direct.value, rel=1e-15)
    assert table.truncation_bound <= 1e-9
    mixed = gain_generic(cat_pnd(0.088, 1.0, 40), vacuum_pnd(), MODEL_100)
    assert table[(SIGNAL, VACUUM)] == pytest.approx(mixed.value, rel=1e-15)


def test_gain_table_wcs_signal_matches_closed_form():
    table = build_gain_table(SPEC_WCS, SPEC_WCS, MODEL_100)
    assert table[(SIGNAL, SIGNAL)] == pytest.approx(
        gain_wcs(0.088, 0.088, MODEL_100), rel=1e-15)


def test_gain_table_purity_changes_signal_gain():
    pure = build_gain_table(SPEC_CAT, SPEC_CAT, MODEL_100)
    degraded_spec = SourceSpec(mu=0.088, nu=0.087, omega=0.036, p_signal=0.333,
                               p_nu=0.007, p_omega=0.038, purity=0.7)
    degraded = build_gain_table(degraded_spec, degraded_spec, MODEL_100)
    assert degraded[(SIGNAL, SIGNAL)] != pytest.approx(
        pure[(SIGNAL, SIGNAL)], rel=1e-6)
    assert degraded[(DECOY_NU, VACUUM)] == pytest.approx(
        pure[(DECOY_NU, VACUUM)], rel=1e-15)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(eta_d=0.0, p_dark=1e-8, alpha_db_per_km=0.16, distance_km=10.0),
        dict(eta_d=1.2, p_dark=1e-8, alpha_db_per_km=0.16, distance_km=10.0),
        dict(eta_d=0.8, p_dark=1.0, alpha_db_per_km=0.16, distance_km=10.0),
        dict(eta_d=0.8, p_dark=1e-8, alpha_db_per_km=0.0, distance_km=10.0),
        dict(eta_d=0.8, p_dark=1e-8, alpha_db_per_km=0.16, distance_km=-1.0),
    ],
)
def test_detector_model_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        DetectorModel(**kwargs)


@settings(max_examples=200, deadline=None)
@given(
    k_a=st.floats(min_value=0.0, max_value=5.0),
    k_b=st.floats(min_value=0.0, max_value=5.0),
    theta=st.floats(min_value=0.0, max_value=2 * math.pi),
    distance=st.floats(min_value=0.0, max_value=500.0),
)
def test_click_probs_are_probabilities(k_a, k_b, theta, distance):
    model = DetectorModel(eta_d=0.8, p_dark=1e-8, alpha_db_per_km=0.16,
                          distance_km=distance)
    q_left, q_right = click_probs_theta(k_a, k_b, theta, model)
    assert 0.0 <= q_left <= 1.0
    assert 0.0 <= q_right <= 1.0
    assert q_left + q_right <= 1.0


@settings(max_examples=100, deadline=None)
@given(
    k_a=st.floats(min_value=0.0, max_value=2.0),
    k_b=st.floats(min_value=0.0, max_value=2.0),
)
def test_gain_bounded_and_symmetric(k_a, k_b):
    value = gain_wcs(k_a, k_b, MODEL_100)
    assert 0.0 <= value <= 1.0
    assert value == pytest.approx(gain_wcs(k_b, k_a, MODEL_100), rel=1e-12)
