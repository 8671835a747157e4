import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from midband.campaign import (
    CampaignFile,
    CampaignFormatError,
    DuplicateRecordError,
    GridError,
    VersionError,
    dumps_campaign,
    load_campaign,
    loads_campaign,
    quantize_records,
    save_campaign,
)
from midband.core import FR1C, FR3, MeasurementRecord, PowerDelayProfile
from midband.report import build_report, dumps_report


def random_campaign(seed, n_records=None):
    r = np.random.default_rng(seed)
    band = FR1C if r.random() < 0.5 else FR3
    n = int(r.integers(1, 12)) if n_records is None else n_records
    cells = r.choice(band.azimuth_steps**2, size=n, replace=False)
    bw = float(r.choice([0.5, 1.0, 2.0]))
    records = []
    for c in cells:
        tx, rx = divmod(int(c), band.azimuth_steps)
        p = r.exponential(1e-9, int(r.integers(1, 80)))
        p[r.random(p.size) < 0.2] = 0.0
        pdp = PowerDelayProfile(bw * int(r.integers(0, 50)), bw, p, float(r.uniform(-140, -90)))
        records.append(MeasurementRecord(
            f"L{int(r.integers(3))}", "VV", tx * band.hpbw_deg, int(r.integers(-1, 1)), rx * band.hpbw_deg,
            int(r.integers(-1, 2)), pdp, ["LOS", "NLOS"][int(r.integers(2))], float(r.uniform(11, 97)), float(r.uniform(0, 1e3)),
        ))
    return CampaignFile(band, records, site=f"site-{seed}", tx_power_dBm=band.tx_power_dBm, calibration={"system_gain_dB": float(r.normal())})


def _same(a: CampaignFile, b: CampaignFile):
    assert a.band == b.band and a.site == b.site and a.calibration == b.calibration
    assert (a.tx_height_m, a.rx_height_m, a.tx_power_dBm) == (b.tx_height_m, b.rx_height_m, b.tx_power_dBm)
    assert len(a.records) == len(b.records)
    for x, y in zip(a.records, b.records):
        assert (x.location_id, x.polarization, x.pointing, x.environment, x.distance_m, x.wall_time_s) == (
            y.location_id, y.polarization, y.pointing, y.environment, y.distance_m, y.wall_time_s)
        assert (x.pdp.start_delay_ns, x.pdp.bin_width_ns) == (y.pdp.start_delay_ns, y.pdp.bin_width_ns)
        assert np.allclose(x.pdp.powers_mW, y.pdp.powers_mW, rtol=1e-9, atol=0)
        assert x.pdp.noise_floor_dBm == pytest.approx(y.pdp.noise_floor_dBm, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_round_trip(seed):
    c = random_campaign(seed)
    text = dumps_campaign(c)
    back = loads_campaign(text)
    _same(c, back)
    assert dumps_campaign(back) == text


def test_save_and_load(tmp_path):
    c = random_campaign(1)
    path = tmp_path / "sub" / "c.jsonl"
    save_campaign(c, path)
    _same(c, load_campaign(path))
    assert not [p for p in path.parent.iterdir() if p.name.endswith(".tmp")]


def test_file_layout():
    lines = dumps_campaign(random_campaign(2, n_records=3)).splitlines()
    head, *body, foot = [json.loads(ln) for ln in lines]
    assert head["type"] == "header" and head["format_version"] == 1
    assert head["tx_height_m"] == 2.4 and head["rx_height_m"] == 1.5
    assert [b["type"] for b in body] == ["record"] * 3
    assert foot["type"] == "calibration" and "system_gain_dB" in foot


def test_minimal_file_loads():
    c = CampaignFile(FR3, [MeasurementRecord("L", "VV", 0.0, 0, 15.0, 0, PowerDelayProfile(0.0, 1.0, [1e-9]))])
    assert len(loads_campaign(dumps_campaign(c)).records) == 1


def _text_with(mutate):
    lines = [json.loads(ln) for ln in dumps_campaign(random_campaign(3, n_records=2)).splitlines()]
    mutate(lines)
    return "\n".join(json.dumps(o) for o in lines)


def test_error_codes_are_distinct():
    def bad_version(ls):
        ls[0]["format_version"] = 2

    def off_grid(ls):
        ls[1]["rx_azimuth_deg"] = 17.0

    def duplicate(ls):
        ls.insert(2, ls[1])

    errors = []
    for mutate, kind in [(bad_version, VersionError), (off_grid, GridError), (duplicate, DuplicateRecordError)]:
        with pytest.raises(kind) as info:
            loads_campaign(_text_with(mutate))
        errors.append(info.value.code)
    assert len(set(errors)) == 3
    with pytest.raises(CampaignFormatError):
        loads_campaign("")
    with pytest.raises(CampaignFormatError):
        loads_campaign("{not json")


def test_fr3_grid_violation():
    c = CampaignFile(FR3, [MeasurementRecord("L", "VV", 0.0, 0, 17.0, 0, PowerDelayProfile(0.0, 1.0, [1e-9]))])
    with pytest.raises(GridError):
        dumps_campaign(c)


def test_report_is_stable_through_files(tmp_path):
    from midband.changen import DropConfig, drop_records, generate_drops

    drops = generate_drops(DropConfig(FR1C, "LOS"), 4, seed=1)
    recs = [r for i, d in enumerate(drops) for r in drop_records(d, f"D{i}")]
    c = CampaignFile(FR1C, recs, tx_power_dBm=FR1C.tx_power_dBm)
    save_campaign(c, tmp_path / "a.jsonl")
    r1 = dumps_report(build_report(load_campaign(tmp_path / "a.jsonl")))
    save_campaign(load_campaign(tmp_path / "a.jsonl"), tmp_path / "b.jsonl")
    r2 = dumps_report(build_report(load_campaign(tmp_path / "b.jsonl")))
    assert r1 == r2
    # quantized in-memory records give the same report as the file
    q = CampaignFile(FR1C, quantize_records(recs), tx_power_dBm=FR1C.tx_power_dBm)
    assert dumps_report(build_report(q)) == r1
