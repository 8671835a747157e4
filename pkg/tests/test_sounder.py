import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from midband.core import PowerDelayProfile, free_space_delay_ns, linear_to_db
from midband.sounder import (
    PRIMITIVE_TAPS,
    CorrelatorConfig,
    PathTap,
    channel_convolve,
    dilation_factor,
    free_space_pl,
    gen_pn,
    periodic_autocorrelation,
    power_calibrate,
    sliding_correlate,
    sound,
    time_calibrate,
    undilate,
)
from oracles import lfsr_period


@pytest.mark.parametrize("m", sorted(PRIMITIVE_TAPS))
def test_default_taps_are_maximal(m):
    assert lfsr_period(m, PRIMITIVE_TAPS[m]) == 2**m - 1


@pytest.mark.parametrize("m", range(2, 14))
def test_autocorrelation_two_valued(m):
    pn = gen_pn(m)
    L = 2**m - 1
    assert pn.length == L
    acf = periodic_autocorrelation(pn.chips)
    assert acf[0] == L
    assert np.all(acf[1:] == -1)
    # balance: the +1 and -1 counts differ by one
    assert abs(int(pn.chips.sum())) == 1


def test_non_primitive_taps_rejected():
    with pytest.raises(ValueError):
        gen_pn(4, taps=(4, 2))
    with pytest.raises(ValueError):
        gen_pn(1)


def test_processing_gain():
    assert gen_pn(11).processing_gain_dB == pytest.approx(10 * math.log10(2047))


def test_dilation_factor():
    assert dilation_factor(CorrelatorConfig(500.0, 499.9375)) == 8000.0
    assert CorrelatorConfig().slide_factor == 8000.0
    with pytest.raises(ValueError):
        dilation_factor(CorrelatorConfig(500.0, 500.0))


def test_dilated_time_axis():
    pn = gen_pn(9)
    cap = sliding_correlate(channel_convolve(pn, [PathTap(100.0, 0.0)], None), pn)
    # 100 ns of propagation delay is recorded 800 us after the origin
    peak = cap.dilated_time_us[int(np.argmax(cap.powers_mW))]
    assert peak == pytest.approx(800.0)
    assert undilate(cap).peak_delay_ns == pytest.approx(100.0)


def test_single_path_power_is_preserved():
    pn = gen_pn(11)
    pdp = sound(pn, [PathTap(37.3, -60.0)], tx_power_dBm=10.0)
    assert linear_to_db(pdp.total_power_mW) == pytest.approx(-50.0, abs=1e-6)


def test_two_paths_resolved():
    pn = gen_pn(11)
    pdp = sound(pn, [PathTap(20.0, -50.0), PathTap(45.0, -56.0)])
    p = pdp.powers_mW
    assert pdp.peak_delay_ns == pytest.approx(20.0)
    assert linear_to_db(p[45] / p[20]) == pytest.approx(-6.0, abs=0.5)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 4000.0), st.floats(20.0, 40.0), st.integers(0, 2**31))
def test_noisy_delay_within_half_chip(delay, snr, seed):
    pn = gen_pn(11)
    pdp = sound(pn, [PathTap(delay, -70.0)], snr, np.random.default_rng(seed))
    err = abs((pdp.peak_delay_ns - delay + pdp.span_ns / 2) % pdp.span_ns - pdp.span_ns / 2)
    assert err <= 1.0


def test_noise_floor_reported(rng):
    pn = gen_pn(11)
    pdp = sound(pn, [PathTap(50.0, -60.0)], 30.0, rng)
    # per-bin floor = strongest path power less the SNR and the processing gain (2 samples per chip)
    expected = -60.0 - 30.0 - 10 * math.log10(2 * 2047)
    assert pdp.noise_floor_dBm == pytest.approx(expected, abs=2.0)


def test_rate_mismatch_rejected():
    pn = gen_pn(7)
    rx = channel_convolve(pn, [PathTap(0.0, 0.0)], None)
    with pytest.raises(ValueError):
        sliding_correlate(rx, pn, CorrelatorConfig(400.0, 399.95))


def test_power_calibration_recovers_fspl():
    pn = gen_pn(11)
    d = 4.0
    pl = free_space_pl(6.75, d)
    pdp = sound(pn, [PathTap(free_space_delay_ns(d), 30.0 - pl)], tx_power_dBm=16.0)
    cal = power_calibrate(pdp, 16.0, 15.0, 15.0, 6.75)
    assert cal.recovered_pl_dB == pytest.approx(pl, abs=0.1)
    assert abs(cal.system_gain_dB) < 0.1 and not cal.nonlinear
    # a receiver 3 dB hot is corrected by -3 dB and flagged
    hot = power_calibrate(pdp.scaled(10 ** 0.3), 16.0, 15.0, 15.0, 6.75)
    assert hot.system_gain_dB == pytest.approx(cal.system_gain_dB - 3.0, abs=1e-9)
    assert hot.nonlinear


def test_power_calibration_rejects_reflections():
    pn = gen_pn(11)
    pdp = sound(pn, [PathTap(13.3, -30.0), PathTap(30.0, -33.0)])
    with pytest.raises(ValueError):
        power_calibrate(pdp, 0.0, 15.0, 15.0, 6.75)


def test_time_calibration():
    pdp = PowerDelayProfile(0.0, 1.0, np.r_[np.zeros(20), 1.0, np.zeros(79)] + 1e-12, -120.0)
    tc = time_calibrate(pdp)
    assert tc.shift_bins == -7
    assert tc.pdp.peak_delay_ns == 13.0
    flat = PowerDelayProfile(0.0, 1.0, np.full(10, 1e-12), -120.0)
    with pytest.raises(ValueError):
        time_calibrate(flat)
