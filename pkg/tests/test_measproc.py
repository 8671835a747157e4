import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from midband.core import FR1C, FR3, MeasurementRecord, PowerDelayProfile, db_to_linear, linear_to_db
from midband.measproc import (
    DirectionalCaptureSet,
    PowerAngularSpectrum,
    angular_spread,
    build_pas,
    estimate_noise_floor,
    extract_mpcs,
    grid_spread_batch,
    group_records,
    has_signal,
    location_stats,
    mean_excess_delay,
    pas_spread,
    rms_delay_spread,
    segment_lobes,
    synthesize_omni_pdp,
    threshold_pdp,
)
from oracles import rotation_scan_spread, threshold_filter, two_moment_spread


def _pdp(powers, start=0.0, bw=1.0, floor=-120.0):
    return PowerDelayProfile(start, bw, np.asarray(powers, dtype=float), floor)


def test_two_path_delay_spread():
    # equal powers 10 ns apart: spread is half the separation
    pdp = _pdp([1.0] + [0.0] * 9 + [1.0], start=5.0)
    assert rms_delay_spread(pdp) == pytest.approx(5.0)
    assert mean_excess_delay(pdp) == pytest.approx(5.0)
    assert rms_delay_spread(_pdp([0.0, 2.0, 0.0])) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 400), st.floats(0.0, 500.0), st.sampled_from([0.5, 1.0, 2.0]), st.integers(0, 2**31))
def test_delay_spread_matches_two_moment_oracle(n, start, bw, seed):
    p = np.random.default_rng(seed).exponential(1.0, n)
    pdp = _pdp(p, start, bw)
    assert rms_delay_spread(pdp) == pytest.approx(two_moment_spread(pdp.delays_ns, p), abs=1e-9, rel=1e-9)


def test_zero_pdp_rejected():
    with pytest.raises(ValueError):
        rms_delay_spread(_pdp([0.0, 0.0]))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 300), st.floats(-140.0, -60.0), st.integers(0, 2**31))
def test_threshold_matches_filter(n, floor, seed):
    p = db_to_linear(np.random.default_rng(seed).uniform(-130.0, -50.0, n))
    pdp = _pdp(p, floor=floor)
    if not has_signal(pdp):
        with pytest.raises(ValueError):
            threshold_pdp(pdp)
        return
    assert list(threshold_pdp(pdp).powers_mW) == threshold_filter(list(p), floor)


def test_threshold_rules():
    peak = -40.0
    p = db_to_linear(np.array([peak, peak - 24.9, peak - 25.1, -200.0]))
    kept = threshold_pdp(_pdp(p, floor=-100.0)).powers_mW
    assert list(kept > 0) == [True, True, False, False]
    # a high floor takes over from the 25 dB window
    kept = threshold_pdp(_pdp(p, floor=-62.0)).powers_mW
    assert list(kept > 0) == [True, False, False, False]


def test_extract_mpcs_plateau_reports_earliest():
    m = extract_mpcs(_pdp([0.0, 1.0, 1.0, 0.2, 0.5, 0.0]))
    assert [x.delay_ns for x in m] == [1.0, 4.0]


def test_noise_floor_estimate(rng):
    noise = db_to_linear(-110.0) * rng.exponential(1.0, 400)
    noise[120:125] += db_to_linear(-60.0)
    nf = estimate_noise_floor(_pdp(noise))
    # median of exponential noise sits ln 2 below its mean
    assert nf.dBm == pytest.approx(-110.0 + linear_to_db(math.log(2)), abs=1.0)
    assert not nf.noiseless
    early = noise.copy()
    early[10] += 1e-6
    with pytest.raises(ValueError):
        estimate_noise_floor(_pdp(early))
    assert estimate_noise_floor(_pdp(np.r_[np.zeros(60), 1.0])).noiseless


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 24), st.integers(0, 2**31))
def test_angular_spread_matches_rotation_scan(k, seed):
    r = np.random.default_rng(seed)
    a = r.uniform(0.0, 360.0, k)
    w = r.exponential(1.0, k)
    assert angular_spread(a, w) == pytest.approx(rotation_scan_spread(a, w), abs=0.05)


def test_angular_spread_wraps():
    assert angular_spread([350.0, 10.0], [1.0, 1.0]) == pytest.approx(10.0)
    assert angular_spread([0.0, 90.0, 180.0, 270.0], [1, 1, 1, 1]) == pytest.approx(math.sqrt(10125.0))
    with pytest.raises(ValueError):
        angular_spread([0.0], [0.0])


def test_grid_batch_matches_scalar(rng):
    p = rng.exponential(1.0, (50, 24)) * (rng.random((50, 24)) < 0.4)
    p[:, 0] += 0.01
    batch = grid_spread_batch(p, 15.0)
    ref = [angular_spread(np.arange(24) * 15.0, row) for row in p]
    assert np.allclose(batch, ref, atol=1e-9)


def test_slt_and_lobes():
    az = np.arange(12) * 30.0
    p = np.zeros(12)
    p[[11, 0, 1]] = [0.5, 1.0, 0.5]
    p[6] = 0.05  # 13 dB down: outside the lobe threshold
    pas = PowerAngularSpectrum(az, p)
    lobes = segment_lobes(pas)
    assert len(lobes) == 1
    assert sorted(lobes[0].member_azimuths_deg) == [0.0, 30.0, 330.0]
    assert lobes[0].peak_azimuth_deg == 0.0
    assert pas_spread(pas) == pytest.approx(angular_spread([330, 0, 30], [0.5, 1, 0.5]))
    assert pas_spread(pas, None) > pas_spread(pas)
    p[6] = 0.2
    assert len(segment_lobes(PowerAngularSpectrum(az, p))) == 2


def _records(band, cells, location="L1", env="LOS", d=20.0):
    """cells: {(tx_az, rx_az): (delay_bin, power_mW)}; every RX direction present at TX 0."""
    out = []
    floor = -130.0
    for j in range(band.azimuth_steps):
        cells.setdefault((0.0, j * band.hpbw_deg), None)
    for (tx, rx), v in sorted(cells.items()):
        p = np.full(200, db_to_linear(floor - 3.0))
        if v is not None:
            p[v[0]] += v[1]
        out.append(MeasurementRecord(location, "VV", tx, 0, rx, 0, _pdp(p, floor=floor), env, d))
    return out


def test_omni_synthesis_removes_both_gains():
    g = db_to_linear(2 * FR1C.antenna_gain_dBi)
    recs = _records(FR1C, {(0.0, 0.0): (60, 1e-6 * g), (0.0, 90.0): (80, 5e-8 * g)})
    cs = DirectionalCaptureSet("L1", "VV", FR1C, tuple(recs))
    omni = synthesize_omni_pdp(cs)
    assert omni.total_power_mW == pytest.approx(1.05e-6, rel=1e-3)
    assert omni.powers_mW[60] == pytest.approx(1e-6, rel=1e-3)
    st_ = location_stats(cs, tx_power_dBm=0.0)
    assert st_.omni_pl_dB == pytest.approx(-linear_to_db(1.05e-6), abs=0.01)
    assert len(st_.directional_pl_dB) == 2
    assert min(st_.directional_pl_dB) == pytest.approx(60.0, abs=0.01)
    assert st_.omni_as_deg == 0.0  # second direction is 13 dB down, below the lobe threshold
    assert st_.omni_rms_ds_ns == pytest.approx(two_moment_spread([60, 80], [1.0, 0.05]), abs=1e-3)


def test_duplicate_cells_keep_strongest():
    recs = _records(FR3, {(0.0, 0.0): (50, 1e-6)})
    weaker = MeasurementRecord("L1", "VV", 0.0, 0, 0.0, 0, _pdp(np.full(200, 1e-14), floor=-130.0))
    cs = DirectionalCaptureSet("L1", "VV", FR3, tuple(recs + [weaker]))
    assert len(cs.records) == FR3.azimuth_steps
    assert build_pas(cs).powers_mW[0] > 0


def test_pas_requires_full_coverage():
    recs = _records(FR3, {})[:-1]
    cs = DirectionalCaptureSet("L1", "VV", FR3, tuple(recs))
    with pytest.raises(ValueError):
        build_pas(cs, "AOA")


def test_group_records():
    recs = _records(FR1C, {(0.0, 0.0): (60, 1e-6)}) + _records(FR1C, {(0.0, 0.0): (60, 1e-6)}, location="L2")
    groups = group_records(recs, FR1C)
    assert sorted(groups) == [("L1", "VV"), ("L2", "VV")]
