"""End-to-end measurement simulation: calibration, rapid scan, stepped sweeps, drift correction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import params
from .campaign import CampaignFile
from .changen import plan_sweeps, select_aods, select_xpol_aods, xpd_dB
from .core import (
    FrequencyBand,
    MeasurementRecord,
    PowerDelayProfile,
    db_to_linear,
    free_space_delay_ns,
    get_band,
    linear_to_db,
    wrap_azimuth,
)
from .drift import CaptureEvent, ClockModel, apply_drift, drift_correct
from .sounder import (
    CorrelatorConfig,
    PathTap,
    channel_convolve,
    free_space_pl,
    gen_pn,
    noise_only,
    power_calibrate,
    sliding_correlate,
    time_calibrate,
    undilate,
    _pulse_energy,
)


@dataclass(frozen=True)
class ScenarioPath:
    delay_ns: float
    power_dB: float  # isotropic path gain, negative for loss
    aod_deg: float
    aoa_deg: float
    phase_rad: float = 0.0
    aod_el_deg: float = 0.0
    aoa_el_deg: float = 0.0


@dataclass
class Scenario:
    band: FrequencyBand
    paths: list
    location_id: str = "TX1-RX1"
    environment: str = "LOS"
    distance_m: float = float("nan")
    seed: int = 0
    pn_order: int = 11
    correlator: CorrelatorConfig = field(default_factory=CorrelatorConfig)
    clock: ClockModel = field(default_factory=ClockModel)
    pdp_noise_floor_dBm: float | None = None
    aods_deg: list | None = None
    polarizations: tuple = ("VV",)
    dwell_s: float = 0.5
    record_window_ns: float = 1000.0
    site: str = "simulated"

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        loc = d.get("location", {})
        corr = d.get("correlator", {})
        clk = d.get("clock", {})
        return cls(
            band=get_band(d["band"]),
            paths=[ScenarioPath(**p) for p in d["paths"]],
            location_id=loc.get("id", "TX1-RX1"),
            environment=loc.get("environment", "LOS"),
            distance_m=float(loc.get("distance_m", float("nan"))),
            seed=int(d.get("seed", 0)),
            pn_order=int(d.get("pn_order", 11)),
            correlator=CorrelatorConfig(float(corr.get("fast_rate_Mcps", 500.0)), float(corr.get("slow_rate_Mcps", 499.9375))),
            clock=ClockModel(
                float(clk.get("frequency_offset_ppb", 0.0)),
                float(clk.get("initial_phase_offset_ns", 0.0)),
                float(clk.get("jitter_ns_per_sqrt_s", 0.0)),
            ),
            pdp_noise_floor_dBm=d.get("pdp_noise_floor_dBm"),
            aods_deg=d.get("aods_deg"),
            polarizations=tuple(d.get("polarizations", ["VV"])),
            dwell_s=float(d.get("dwell_s", 0.5)),
            record_window_ns=float(d.get("record_window_ns", 1000.0)),
            site=d.get("site", "simulated"),
        )

    @property
    def noise_floor_dBm(self) -> float:
        """Per-bin PDP noise floor; by default a path at the link margin sits 5 dB above it."""
        if self.pdp_noise_floor_dBm is not None:
            return float(self.pdp_noise_floor_dBm)
        b = self.band
        return b.tx_power_dBm + 2 * b.antenna_gain_dBi - b.link_margin_dB - params.PDP_FLOOR_MARGIN_DB


def _in_sector(angle_deg: float, pointing_deg: float, hpbw: float) -> bool:
    diff = (angle_deg - pointing_deg + 180.0) % 360.0 - 180.0
    return -hpbw / 2 <= diff < hpbw / 2


def pointing_taps(scn: Scenario, tx_az, tx_tilt, rx_az, rx_tilt, polarization="VV") -> list:
    """Paths seen through both horns (flat-top sectors) with antenna gains applied."""
    b = scn.band
    h = b.hpbw_deg
    extra = 2 * b.antenna_gain_dBi - (xpd_dB(b) if polarization == "VH" else 0.0)
    taps = []
    for p in scn.paths:
        if (_in_sector(p.aod_deg, tx_az, h) and _in_sector(p.aoa_deg, rx_az, h)
                and _in_sector(p.aod_el_deg, tx_tilt * h, h) and _in_sector(p.aoa_el_deg, rx_tilt * h, h)):
            taps.append(PathTap(p.delay_ns, p.power_dB + extra, p.phase_rad))
    return taps


class _Sounder:
    def __init__(self, scn: Scenario, rng):
        self.scn = scn
        self.rng = rng
        self.pn = gen_pn(scn.pn_order, chip_rate_Mcps=scn.correlator.fast_rate_Mcps)
        spc = 2
        energy = _pulse_energy(self.pn.order, self.pn.taps, spc)
        # per-sample noise giving the requested per-bin floor after correlation
        self.noise_mW = db_to_linear(scn.noise_floor_dBm) * self.pn.length * spc * energy

    def capture(self, taps) -> PowerDelayProfile:
        tx = self.scn.band.tx_power_dBm
        if taps:
            rx = channel_convolve(self.pn, taps, None, self.rng, tx_power_dBm=tx, noise_power_mW=self.noise_mW)
        else:
            rx = noise_only(self.pn, self.noise_mW, self.rng)
        return undilate(sliding_correlate(rx, self.pn, self.scn.correlator))


def _rapid_scan(scn: Scenario) -> dict:
    """Strongest in-beam power (dBm) over a continuous RX scan, per TX boresight AOD."""
    b = scn.band
    peaks = {}
    for i in range(b.azimuth_steps):
        tx_az = i * b.hpbw_deg
        best = 0.0
        for j in range(b.azimuth_steps):
            taps = pointing_taps(scn, tx_az, 0, j * b.hpbw_deg, 0)
            if taps:
                best = max(best, max(db_to_linear(b.tx_power_dBm + t.gain_dB) for t in taps))
        peaks[tx_az] = linear_to_db(best) if best > 0 else scn.noise_floor_dBm
    return peaks


def _reference_pair(scn: Scenario) -> tuple[float, float]:
    b = scn.band
    best, pair = -np.inf, (0.0, 0.0)
    for i in range(b.azimuth_steps):
        for j in range(b.azimuth_steps):
            taps = pointing_taps(scn, i * b.hpbw_deg, 0, j * b.hpbw_deg, 0)
            if taps:
                p = linear_to_db(sum(db_to_linear(t.gain_dB) for t in taps))
                if p > best:
                    best, pair = p, (i * b.hpbw_deg, j * b.hpbw_deg)
    if best == -np.inf:
        raise ValueError("no path is visible from any pointing direction")
    return pair


def _truncate(pdp: PowerDelayProfile, window_ns: float) -> PowerDelayProfile:
    n = int(math.ceil((window_ns - pdp.start_delay_ns) / pdp.bin_width_ns))
    n = max(1, min(n, len(pdp)))
    return replace(pdp, powers_mW=pdp.powers_mW[:n])


def simulate_sounder(scn: Scenario) -> CampaignFile:
    """Run the full measurement procedure for one location and return a campaign."""
    rng = np.random.default_rng(scn.seed)
    band = scn.band
    snd = _Sounder(scn, rng)
    t = 0.0

    # power and time calibration at 4 m, boresight to boresight
    cal_d = params.CALIBRATION_DISTANCE_M
    cal_tap = PathTap(free_space_delay_ns(cal_d), -free_space_pl(band.carrier_GHz, cal_d) + 2 * band.antenna_gain_dBi)
    cal_event = CaptureEvent(t, 0.0, 0.0, snd.capture([cal_tap]), is_reference_mpc_recapture=True)
    cal_event = apply_drift([cal_event], scn.clock, rng)[0]
    pcal = power_calibrate(cal_event.pdp, band.tx_power_dBm, band.antenna_gain_dBi, band.antenna_gain_dBi, band.carrier_GHz)
    tcal = time_calibrate(cal_event.pdp.to_grid())
    t += scn.dwell_s

    peaks = _rapid_scan(scn)
    if scn.aods_deg is not None:
        aods = [wrap_azimuth(a) for a in scn.aods_deg]
    else:
        aods = sorted(select_aods(peaks, scn.noise_floor_dBm), key=lambda a: -peaks[a])
    ref_tx, ref_rx = _reference_pair(scn)
    plan = plan_sweeps(band)

    events = []

    def capture(tx_az, tx_tilt, rx_az, rx_tilt, pol, sweep, ref=False):
        nonlocal t
        taps = pointing_taps(scn, tx_az, tx_tilt, rx_az, rx_tilt, pol)
        events.append(CaptureEvent(t, tx_az, rx_az, snd.capture(taps), tx_tilt, rx_tilt, ref, sweep, pol))
        t += scn.dwell_s

    capture(ref_tx, 0, ref_rx, 0, "VV", 0, ref=True)
    sweep_no = 0
    for pol in scn.polarizations:
        pol_aods = aods if pol == "VV" else [a for a in aods if a in select_xpol_aods(peaks, scn.noise_floor_dBm)]
        for tx_az in pol_aods:
            for sw in plan.sweeps:
                sweep_no += 1
                for k in range(sw.rx_azimuth_steps):
                    capture(tx_az, sw.tx_tilt, k * band.hpbw_deg, sw.rx_tilt, pol, sweep_no)
                capture(ref_tx, 0, ref_rx, 0, "VV", sweep_no, ref=True)

    drifted = apply_drift(events, scn.clock, rng)
    # the system timing offset measured at calibration applies to every capture
    drifted = [replace(e, pdp=e.pdp.to_grid().rolled(tcal.shift_bins)) for e in drifted]
    corrected, report = drift_correct(drifted, anchor_time_s=cal_event.wall_time_s)

    gain = db_to_linear(pcal.system_gain_dB)
    records = []
    for e in corrected:
        if e.is_reference_mpc_recapture:
            continue
        pdp = _truncate(e.pdp.to_grid(), scn.record_window_ns).scaled(gain)
        records.append(
            MeasurementRecord(scn.location_id, e.polarization, e.tx_azimuth_deg, e.tx_tilt, e.rx_azimuth_deg, e.rx_tilt,
                              pdp, scn.environment, scn.distance_m, e.wall_time_s)
        )
    calibration = {
        "system_gain_dB": pcal.system_gain_dB,
        "nonlinear": pcal.nonlinear,
        "time_shift_bins": tcal.shift_bins,
        "selected_aods_deg": aods,
        "reference_pair_deg": [ref_tx, ref_rx],
        **report.to_dict(),
    }
    return CampaignFile(band, records, scn.site, tx_power_dBm=band.tx_power_dBm, calibration=calibration)
