import math
from dataclasses import replace

import numpy as np
import pytest

from polarscat.channel import Scenario, derived_rng, tag_channel
from polarscat.config import build_scenario, preset
from polarscat.detectors import (
    ChannelEstimates,
    bit_error_rate,
    ed_ber_analytic,
    ed_detect,
    ed_noise_amplitude,
    lse_detect,
    lse_estimate,
    run_link,
    signal_contrast,
)
from polarscat.tags import build_tag, encode_bts, encode_pcs

# frozen from a 40-digit numerical integration of the Gaussian tail
HALF_ERFC = {
    0.5: 0.23975006109347674,
    1.0: 0.07864960352514257,
    2.0: 0.002338867490523633,
    3.0: 1.104524849929272e-05,
}


def gaussian_tail_oracle(x: float) -> float:
    # independent reference: integrate the Gaussian tail directly
    import mpmath as mp

    mp.mp.dps = 40
    integral = mp.quad(lambda t: mp.exp(-t * t), [x, mp.inf])
    return float(0.5 * 2 / mp.sqrt(mp.pi) * integral)


def test_signal_contrast():
    assert signal_contrast(2.0, 2.0) == 0.0
    assert signal_contrast(3.0, 1.0) == 2.0
    # synthetic channel amplitudes
    g1, g0, p = 0.4 + 0.3j, 0.1 - 0.2j, 2.5
    a_on, a_off = abs(g1) * math.sqrt(p), abs(g0) * math.sqrt(p)
    assert signal_contrast(a_on, a_off) == pytest.approx(abs(a_on - a_off))
    with pytest.raises(ValueError):
        signal_contrast(-0.1, 1.0)


def test_ed_ber_analytic_exact_and_oracle():
    assert ed_ber_analytic(0.0, 1.0) == 0.5
    for ratio, frozen in HALF_ERFC.items():
        assert ed_ber_analytic(ratio, 1.0) == pytest.approx(frozen, abs=1e-12)
        assert ed_ber_analytic(ratio, 1.0) == pytest.approx(gaussian_tail_oracle(ratio), abs=1e-10)
    # scale invariance in the ratio
    assert ed_ber_analytic(3.0, 1.5) == pytest.approx(ed_ber_analytic(2.0, 1.0))


def test_ed_ber_analytic_shape_and_monotonicity():
    ratios = np.linspace(0, 6, 200)
    values = ed_ber_analytic(ratios, 1.0)
    assert values.shape == ratios.shape
    assert np.all(np.diff(values) < 0)
    assert np.all(values > 0) and values[0] == 0.5
    with pytest.raises(ValueError):
        ed_ber_analytic(1.0, 0.0)
    with pytest.raises(ValueError):
        ed_ber_analytic(-1.0, 1.0)


def test_ed_noise_amplitude_matches_envelope_detection():
    assert ed_noise_amplitude(1.0) == 2.0
    assert ed_noise_amplitude(4.0) == 4.0
    with pytest.raises(ValueError):
        ed_noise_amplitude(0.0)


def test_ed_detect_noiseless_alternating():
    a_on, a_off = 2.0, 1.0
    samples = np.array([a_on, a_off, a_on, a_off], dtype=complex)
    bits = ed_detect(samples, threshold=1.5)
    np.testing.assert_array_equal(bits, [1, 0, 1, 0])
    inverted = ed_detect(samples, threshold=1.5, invert=True)
    np.testing.assert_array_equal(inverted, [0, 1, 0, 1])


def test_ed_detect_windowed_mean():
    samples = np.array([2.0, 2.0, 1.0, 1.0], dtype=complex)
    np.testing.assert_array_equal(ed_detect(samples, 1.5, samples_per_bit=2), [1, 0])


def test_ed_detect_validation():
    with pytest.raises(ValueError):
        ed_detect(np.ones(3, dtype=complex), 1.0, samples_per_bit=2)
    with pytest.raises(ValueError):
        ed_detect(np.ones(4, dtype=complex), 0.0)
    with pytest.raises(ValueError):
        ed_detect(np.array([], dtype=complex), 1.0)


def test_ed_detect_equal_amplitudes_is_coin_flip():
    rng = derived_rng(31)
    n = 100_000
    amplitude = 1.0
    bits = rng.integers(0, 2, n)
    noise = math.sqrt(0.005) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    y = amplitude + noise  # same amplitude either way
    detected = ed_detect(y, threshold=amplitude)
    assert bit_error_rate(detected, bits) == pytest.approx(0.5, abs=0.01)


def test_ed_detect_monte_carlo_matches_closed_form():
    # contrast three noise amplitudes above threshold: errors should be rare
    rng = derived_rng(77)
    n = 100_000
    noise_power = 1.0
    a_noise = ed_noise_amplitude(noise_power)
    delta = 3.0 * a_noise
    base = 60.0
    bits = rng.integers(0, 2, n)
    amp = np.where(bits, base + delta / 2, base - delta / 2)
    y = amp + math.sqrt(noise_power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    detected = ed_detect(y, threshold=base)
    expected = ed_ber_analytic(delta, a_noise)
    sigma = math.sqrt(expected * (1 - expected) / n)
    assert abs(bit_error_rate(detected, bits) - expected) <= 3 * sigma


def test_lse_estimate_noiseless_and_identical():
    p = 4.0
    g0, g1 = 0.2 + 0.1j, -0.3 + 0.4j
    est = lse_estimate(np.full(8, g0 * 2), np.full(8, g1 * 2), p)
    assert est.g0 == pytest.approx(g0)
    assert est.g1 == pytest.approx(g1)
    assert est.noise_amplitude == pytest.approx(0.0)

    same = lse_estimate(np.full(4, 1 + 1j), np.full(4, 1 + 1j), 1.0)
    assert same.g0 == same.g1

    with pytest.raises(ValueError):
        lse_estimate([], [1.0], 1.0)


def test_lse_estimate_error_variance_scales_inverse_n():
    # estimate error variance should fall as noise_power / (n_pilots * tx_power)
    tx_power, noise_power = 1.0, 1.0
    g = 0.5 - 0.25j
    trials = 3000
    sizes = [8, 64, 512]
    variances = []
    for i, n in enumerate(sizes):
        rng = derived_rng(55, i)
        noise = math.sqrt(noise_power / 2) * (
            rng.standard_normal((trials, n)) + 1j * rng.standard_normal((trials, n))
        )
        pilots = g * math.sqrt(tx_power) + noise
        estimates = pilots.mean(axis=1) / math.sqrt(tx_power)
        variances.append(np.mean(np.abs(estimates - g) ** 2))
    slope = np.polyfit(np.log(sizes), np.log(variances), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.1)
    assert variances[0] == pytest.approx(noise_power / (tx_power * sizes[0]), rel=0.1)


def test_lse_detect_trivial_and_tie():
    p = 4.0
    est = ChannelEstimates(g0=0.0 + 0.0j, g1=1.0 + 0.0j, noise_amplitude=0.1)
    np.testing.assert_array_equal(lse_detect([est.g1 * 2.0], est, p), [1])
    np.testing.assert_array_equal(lse_detect([est.g0 * 2.0], est, p), [0])
    # equidistant sample resolves to bit 0
    np.testing.assert_array_equal(lse_detect([1.0 + 5j], est, p), [0])


def test_lse_detect_global_phase_invariance():
    rng = derived_rng(8)
    est = ChannelEstimates(g0=0.1 + 0.2j, g1=-0.4 + 0.1j, noise_amplitude=0.3)
    y = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    rot = np.exp(1j * 1.234)
    base = lse_detect(y, est, 2.0)
    rotated = lse_detect(
        y * rot, ChannelEstimates(est.g0 * rot, est.g1 * rot, est.noise_amplitude), 2.0
    )
    np.testing.assert_array_equal(base, rotated)


def test_lse_detect_degenerate_estimates_warn():
    est = ChannelEstimates(g0=1.0 + 0.0j, g1=1.0 + 0.0j, noise_amplitude=0.1)
    with pytest.warns(RuntimeWarning):
        bits = lse_detect(np.ones(5, dtype=complex), est, 1.0)
    np.testing.assert_array_equal(bits, np.zeros(5))


def test_lse_detect_monte_carlo_matches_closed_form():
    from scipy.special import erfc

    rng = derived_rng(99)
    n = 100_000
    tx_power, noise_power = 4.0, 1.0
    g0, g1 = 0.3 + 0.1j, -0.2 + 0.5j
    est = ChannelEstimates(g0=g0, g1=g1, noise_amplitude=math.sqrt(noise_power))
    bits = rng.integers(0, 2, n)
    g = np.where(bits, g1, g0)
    y = g * math.sqrt(tx_power) + math.sqrt(noise_power / 2) * (
        rng.standard_normal(n) + 1j * rng.standard_normal(n)
    )
    detected = lse_detect(y, est, tx_power)
    expected = 0.5 * erfc(abs(g1 - g0) * math.sqrt(tx_power) / (2 * math.sqrt(noise_power)))
    sigma = math.sqrt(expected * (1 - expected) / n)
    assert abs(bit_error_rate(detected, bits) - expected) <= 3 * sigma


def test_bit_error_rate():
    assert bit_error_rate([0, 1, 1, 0], [0, 1, 0, 0]) == 0.25
    with pytest.raises(ValueError):
        bit_error_rate([0, 1], [0, 1, 1])


def scattering_scenario(seed=7, snr_tx_db=116.0):
    cfg = preset("scat-ipr")
    sc = build_scenario(cfg, seed=seed)
    sc = sc.with_tag_position([99.95, 0.12, 0.3])
    return replace(sc, tx_power_w=sc.noise_power_w * 10 ** (snr_tx_db / 10.0))


def test_run_link_noiseless_is_error_free():
    cfg = preset("los-4pr")
    sc = build_scenario(cfg, seed=0)
    sc = replace(sc, noise_power_w=1e-300)
    tag = build_tag("4pr")
    bits = derived_rng(1).integers(0, 2, 64)
    for detector in ("ed", "lse"):
        res = run_link(sc, tag, encode_bts(bits, tag), detector, derived_rng(2), bits)
        assert res.ber == 0.0

    pcs_plan = encode_pcs(bits, (1, 0))
    res = run_link(sc, tag, pcs_plan, "lse", derived_rng(3), bits)
    assert res.ber == 0.0


def test_run_link_worst_orientation_is_coin_flip():
    cfg = preset("los-nr-worst")
    sc = build_scenario(cfg, seed=0)
    sc = replace(sc, tx_power_w=sc.noise_power_w * 10 ** 11.6)
    tag = build_tag("nr", nr_preset="worst")
    bits = derived_rng(4).integers(0, 2, 2000)
    res = run_link(sc, tag, encode_bts(bits, tag), "ed", derived_rng(5), bits)
    assert res.ber == pytest.approx(0.5, abs=0.05)
    assert res.per_pattern_metric[0] == pytest.approx(0.0, abs=1e-6)


def test_run_link_lse_beats_ed_in_scattering():
    sc = scattering_scenario()
    tag = build_tag("ipr")
    bits = derived_rng(6).integers(0, 2, 2000)
    plan = encode_bts(bits, tag)
    ed = run_link(sc, tag, plan, "ed", derived_rng(7), bits)
    lse = run_link(sc, tag, plan, "lse", derived_rng(8), bits)
    slack = 3 * math.sqrt(0.25 / 2000)
    assert lse.ber <= ed.ber + slack
    assert 0.0 < ed.ber < 0.5  # the comparison point is informative


def test_run_link_selects_largest_separation_pattern():
    sc = scattering_scenario(seed=3)
    tag = build_tag("4pr")
    separations = [abs(tag_channel(sc, p)) for p in tag.patterns]
    bits = derived_rng(9).integers(0, 2, 256)
    res = run_link(sc, tag, encode_bts(bits, tag), "lse", derived_rng(10), bits, n_train=512)
    assert res.selected_pattern == int(np.argmax(separations))
    assert res.selected_pattern == int(np.argmax(res.per_pattern_metric))


def test_run_link_validation():
    sc = scattering_scenario()
    tag = build_tag("nr")
    bits = [1, 0, 1]
    plan = encode_bts(bits, tag)
    with pytest.raises(ValueError):
        run_link(sc, tag, plan, "mmse", derived_rng(0), bits)
    with pytest.raises(ValueError):
        run_link(sc, tag, plan, "ed", derived_rng(0), [1, 0])
