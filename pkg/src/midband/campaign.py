"""Campaign files: one JSON header line, one line per directional record, one calibration footer.

Powers are written in dBm rounded to 1e-9 dB (zero power as ``null``) so
save(load(save(x))) reproduces the same bytes.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import FrequencyBand, MeasurementRecord, PowerDelayProfile, linear_to_db
from .params import RX_HEIGHT_M, TX_HEIGHT_M

FORMAT_VERSION = 1
DB_DECIMALS = 9


class CampaignFormatError(ValueError):
    code = "format"


class VersionError(CampaignFormatError):
    code = "version"


class GridError(CampaignFormatError):
    code = "grid"


class DuplicateRecordError(CampaignFormatError):
    code = "duplicate"


@dataclass
class CampaignFile:
    band: FrequencyBand
    records: list = field(default_factory=list)
    site: str = ""
    tx_height_m: float = TX_HEIGHT_M
    rx_height_m: float = RX_HEIGHT_M
    tx_power_dBm: float = 0.0
    calibration: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def polarizations(self) -> list:
        return sorted({r.polarization for r in self.records})

    def validate(self) -> None:
        seen = set()
        for r in self.records:
            for az in (r.tx_azimuth_deg, r.rx_azimuth_deg):
                try:
                    self.band.grid_index(az)
                except ValueError as exc:
                    raise GridError(str(exc)) from None
            key = (r.location_id, r.polarization) + r.pointing
            if key in seen:
                raise DuplicateRecordError(f"duplicate record {key}")
            seen.add(key)


def _db_list(powers: np.ndarray) -> list:
    db = linear_to_db(powers)
    return [None if math.isinf(v) else round(float(v), DB_DECIMALS) for v in db]


def _round(x: float) -> float:
    return round(float(x), DB_DECIMALS)


def pdp_to_dict(pdp: PowerDelayProfile) -> dict:
    return {
        "start_delay_ns": pdp.start_delay_ns,
        "bin_width_ns": pdp.bin_width_ns,
        "noise_floor_dBm": _round(pdp.noise_floor_dBm),
        "powers_dBm": _db_list(pdp.powers_mW),
    }


def pdp_from_dict(d: dict) -> PowerDelayProfile:
    powers = np.array([0.0 if v is None else 10.0 ** (v / 10.0) for v in d["powers_dBm"]])
    return PowerDelayProfile(float(d["start_delay_ns"]), float(d["bin_width_ns"]), powers, float(d["noise_floor_dBm"]))


def record_to_dict(r: MeasurementRecord) -> dict:
    return {
        "type": "record",
        "location_id": r.location_id,
        "environment": r.environment,
        "distance_m": None if math.isnan(r.distance_m) else r.distance_m,
        "polarization": r.polarization,
        "tx_azimuth_deg": r.tx_azimuth_deg,
        "tx_tilt": r.tx_tilt,
        "rx_azimuth_deg": r.rx_azimuth_deg,
        "rx_tilt": r.rx_tilt,
        "wall_time_s": r.wall_time_s,
        "pdp": pdp_to_dict(r.pdp),
    }


def record_from_dict(d: dict) -> MeasurementRecord:
    return MeasurementRecord(
        location_id=d["location_id"],
        polarization=d["polarization"],
        tx_azimuth_deg=float(d["tx_azimuth_deg"]),
        tx_tilt=int(d["tx_tilt"]),
        rx_azimuth_deg=float(d["rx_azimuth_deg"]),
        rx_tilt=int(d["rx_tilt"]),
        pdp=pdp_from_dict(d["pdp"]),
        environment=d.get("environment", "LOS"),
        distance_m=float("nan") if d.get("distance_m") is None else float(d["distance_m"]),
        wall_time_s=float(d.get("wall_time_s", 0.0)),
    )


def campaign_lines(c: CampaignFile):
    header = {
        "type": "header",
        "format_version": c.format_version,
        "band": c.band.to_dict(),
        "site": c.site,
        "tx_height_m": c.tx_height_m,
        "rx_height_m": c.rx_height_m,
        "tx_power_dBm": c.tx_power_dBm,
        "polarization": c.polarizations,
    }
    yield json.dumps(header, sort_keys=True)
    for r in c.records:
        yield json.dumps(record_to_dict(r), sort_keys=True)
    yield json.dumps({"type": "calibration", **c.calibration}, sort_keys=True)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_campaign(c: CampaignFile) -> str:
    c.validate()
    return "\n".join(campaign_lines(c)) + "\n"


def save_campaign(c: CampaignFile, path) -> None:
    atomic_write_text(path, dumps_campaign(c))


def loads_campaign(text: str) -> CampaignFile:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CampaignFormatError("empty campaign file")
    try:
        objs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise CampaignFormatError(f"malformed JSON line: {exc}") from None
    head = objs[0]
    if head.get("type") != "header":
        raise CampaignFormatError("first line must be the header")
    if head.get("format_version") != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {head.get('format_version')!r}")
    b = head["band"]
    band = FrequencyBand(
        b["label"], float(b["carrier_GHz"]), float(b["hpbw_deg"]), float(b["antenna_gain_dBi"]),
        float(b.get("eirp_dBm", 31.0)), float(b.get("link_margin_dB", float("nan"))),
    )
    records, calibration = [], {}
    for o in objs[1:]:
        kind = o.get("type")
        if kind == "record":
            try:
                records.append(record_from_dict(o))
            except (KeyError, TypeError) as exc:
                raise CampaignFormatError(f"bad record: {exc}") from None
        elif kind == "calibration":
            calibration = {k: v for k, v in o.items() if k != "type"}
        else:
            raise CampaignFormatError(f"unknown line type {kind!r}")
    c = CampaignFile(
        band=band,
        records=records,
        site=head.get("site", ""),
        tx_height_m=float(head.get("tx_height_m", TX_HEIGHT_M)),
        rx_height_m=float(head.get("rx_height_m", RX_HEIGHT_M)),
        tx_power_dBm=float(head.get("tx_power_dBm", 0.0)),
        calibration=calibration,
    )
    c.validate()
    return c


def load_campaign(path) -> CampaignFile:
    with open(path, encoding="utf-8") as fh:
        return loads_campaign(fh.read())


def quantize_records(records):
    """Records as they will read back from a file (dB rounding applied)."""
    return [record_from_dict(json.loads(json.dumps(record_to_dict(r)))) for r in records]
