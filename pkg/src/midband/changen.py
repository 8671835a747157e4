"""Sweep planning, AOD selection and drop-based statistical channel generation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize, special

from . import params
from .core import (
    NOISELESS_FLOOR_DBM,
    FrequencyBand,
    MeasurementRecord,
    PowerDelayProfile,
    db_to_linear,
    free_space_delay_ns,
    get_band,
)
from .measproc import (
    ChannelStats,
    PowerAngularSpectrum,
    grid_spread_batch,
    lobe_spread,
    mean_excess_delay,
    pas_spread,
    rms_delay_spread,
    segment_lobes,
    threshold_pdp,
)
from .pathloss import ci_predict, sample_shadowing, embedded_ci_params

# (tx_tilt, rx_tilt) in HPBW units for sweeps 1..5
SWEEP_TILTS = ((0, 0), (0, -1), (0, 1), (-1, 0), (-1, -1))


@dataclass(frozen=True)
class Sweep:
    sweep_index: int
    tx_tilt: int
    rx_tilt: int
    rx_azimuth_steps: int


@dataclass(frozen=True)
class SweepPlan:
    hpbw_deg: float
    sweeps: tuple

    @property
    def pointing_count(self) -> int:
        return sum(s.rx_azimuth_steps for s in self.sweeps)

    def to_dict(self) -> dict:
        return {
            "hpbw_deg": self.hpbw_deg,
            "sweeps": [
                {
                    "sweep": s.sweep_index,
                    "tx_tilt_deg": s.tx_tilt * self.hpbw_deg,
                    "rx_tilt_deg": s.rx_tilt * self.hpbw_deg,
                    "rx_azimuth_steps": s.rx_azimuth_steps,
                    "rx_azimuths_deg": [i * self.hpbw_deg for i in range(s.rx_azimuth_steps)],
                }
                for s in self.sweeps
            ],
            "pointings_per_aod": self.pointing_count,
        }


def plan_sweeps(band) -> SweepPlan:
    """The five RX azimuth sweeps performed for every selected TX AOD."""
    hpbw = band.hpbw_deg if isinstance(band, FrequencyBand) else float(band)
    k = 360.0 / hpbw
    if abs(k - round(k)) > 1e-9:
        raise ValueError(f"360 deg is not a whole number of {hpbw} deg steps")
    steps = int(round(k))
    return SweepPlan(hpbw, tuple(Sweep(i + 1, tx, rx, steps) for i, (tx, rx) in enumerate(SWEEP_TILTS)))


def aod_threshold_dBm(peaks_dBm: Sequence[float], noise_floor_dBm: float) -> float:
    return min(max(peaks_dBm) - params.AOD_PEAK_WINDOW_DB, noise_floor_dBm + params.AOD_FLOOR_MARGIN_DB)


def select_aods(rapid_scan_peaks: dict, noise_floor_dBm: float) -> list:
    """AODs whose rapid-scan peak exceeds min(max - 30 dB, floor + 10 dB)."""
    if not rapid_scan_peaks:
        raise ValueError("no rapid-scan peaks")
    thr = aod_threshold_dBm(list(rapid_scan_peaks.values()), noise_floor_dBm)
    return [aod for aod, peak in rapid_scan_peaks.items() if peak > thr]


def select_xpol_aods(vv_peaks: dict, noise_floor_dBm: float) -> list:
    """AODs strong enough in co-polarization to be re-measured cross-polarized."""
    return [aod for aod, peak in vv_peaks.items() if peak >= noise_floor_dBm + params.XPOL_FLOOR_MARGIN_DB]


def xpd_dB(band) -> float:
    return params.XPD_DB[params.lookup_freq(get_band(band).carrier_GHz, params.XPD_DB)]


def apply_xpd(power_dBm, band):
    return np.asarray(power_dBm) - xpd_dB(band)


# -- drop generation ---------------------------------------------------------------------

# Delay model: a first arrival plus K-1 later taps with excess delays uniform on
# [0, DELAY_SPAN * decay], powers exp(-excess/decay) with a 3 dB lognormal spread.
TAP_COUNT = 30
DELAY_SPAN = 6.5
TAP_SIGMA_DB = 3.0
LOBE_COUNTS = {"LOS": (1, 3), "NLOS": (2, 5)}
CALIBRATION_DRAWS = 2000


@dataclass(frozen=True)
class DropConfig:
    band: FrequencyBand
    environment: str
    distance_m: float | None = None
    seed: int | None = None
    tx_power_dBm: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "band", get_band(self.band))
        if self.environment not in ("LOS", "NLOS"):
            raise ValueError("environment must be LOS or NLOS")
        if self.distance_m is not None and not self.distance_m > 1.0:
            raise ValueError("distance must exceed 1 m")

    @property
    def extrapolated(self) -> bool:
        lo, hi = params.MEASURED_RANGE_M
        return self.distance_m is not None and not lo <= self.distance_m <= hi

    @property
    def conducted_power_dBm(self) -> float:
        return self.band.tx_power_dBm if self.tx_power_dBm is None else self.tx_power_dBm

    @classmethod
    def from_dict(cls, d: dict) -> "DropConfig":
        return cls(get_band(d["band"]), d["environment"], d.get("distance_m"), d.get("seed"), d.get("tx_power_dBm"))

    def to_dict(self) -> dict:
        return {
            "band": self.band.label,
            "environment": self.environment,
            "distance_m": self.distance_m,
            "seed": self.seed,
            "tx_power_dBm": self.tx_power_dBm,
        }


@dataclass(frozen=True, eq=False)
class SyntheticDrop:
    config: DropConfig
    distance_m: float
    path_loss_dB: float
    shadowing_dB: float
    pdp: PowerDelayProfile
    pas: PowerAngularSpectrum
    lobes: tuple
    stats: ChannelStats
    target_rms_ds_ns: float
    target_omni_as_deg: float


def target_stats(band: FrequencyBand, environment: str) -> tuple[float, float]:
    f = params.lookup_freq(band.carrier_GHz, params.MEASURED_FREQS_GHZ)
    return params.RMS_DS_TABLE[(f, "omni", environment)], params.OMNI_ASA_DEG[(f, environment)]


def _unit_taps(rng: np.random.Generator, size=None) -> tuple[np.ndarray, np.ndarray]:
    shape = (TAP_COUNT,) if size is None else (size, TAP_COUNT)
    v = rng.uniform(0.0, DELAY_SPAN, shape)
    v[..., 0] = 0.0
    p = np.exp(-v) * db_to_linear(rng.normal(0.0, TAP_SIGMA_DB, shape))
    return v, p


@lru_cache(maxsize=None)
def _ds_per_unit_decay() -> float:
    """Expected thresholded RMS delay spread for a unit decay constant."""
    rng = np.random.default_rng(20240601)
    v, p = _unit_taps(rng, CALIBRATION_DRAWS * 5)
    p = np.where(p >= p.max(axis=1, keepdims=True) * db_to_linear(-params.PDP_PEAK_WINDOW_DB), p, 0.0)
    w = p / p.sum(axis=1, keepdims=True)
    mean = (w * v).sum(axis=1)
    var = (w * (v - mean[:, None]) ** 2).sum(axis=1)
    return float(np.sqrt(var).mean())


def _draw_pdp(rng, first_arrival_ns: float, decay_ns: float, bin_width_ns: float = 1.0) -> PowerDelayProfile:
    v, p = _unit_taps(rng)
    delays = first_arrival_ns + decay_ns * v
    start = math.floor(first_arrival_ns / bin_width_ns)
    idx = np.rint(delays / bin_width_ns).astype(int) - start
    powers = np.zeros(idx.max() + 1)
    np.add.at(powers, idx, p)
    return PowerDelayProfile(start * bin_width_ns, bin_width_ns, powers / powers.sum())


def _sector_masses(centers, widths, grid_deg, hpbw):
    """Mass of wrapped Gaussians (deg) falling in each flat-top sector of the grid."""
    centers = np.asarray(centers)[..., None]
    widths = np.maximum(np.asarray(widths)[..., None], 1e-6)
    out = 0.0
    for k in (-2, -1, 0, 1, 2):
        lo = grid_deg - hpbw / 2 + 360.0 * k
        hi = grid_deg + hpbw / 2 + 360.0 * k
        out = out + 0.5 * (special.erf((hi - centers) / (widths * math.sqrt(2))) - special.erf((lo - centers) / (widths * math.sqrt(2))))
    return out


def _lobe_draws(rng, environment: str, size=None):
    lo, hi = LOBE_COUNTS[environment]
    m = 5
    shape = (m,) if size is None else (size, m)
    count = rng.integers(lo, hi + 1, size=None if size is None else size)
    main = rng.uniform(0.0, 360.0, size=None if size is None else size)
    offsets = rng.standard_normal(shape)
    offsets[..., 0] = 0.0
    widths = rng.uniform(0.2, 0.6, shape)
    rel_db = -rng.uniform(0.0, 12.0, shape)
    rel_db[..., 0] = 0.0
    active = np.arange(m) < np.asarray(count)[..., None]
    return main, offsets, widths, np.where(active, db_to_linear(rel_db), 0.0)


def _pas_from_draws(draws, scale_deg: float, band: FrequencyBand) -> np.ndarray:
    main, offsets, widths, powers = draws
    grid = np.arange(band.azimuth_steps) * band.hpbw_deg
    centers = np.asarray(main)[..., None] + scale_deg * offsets
    masses = _sector_masses(centers, scale_deg * widths, grid, band.hpbw_deg)  # (..., lobe, dir)
    return np.einsum("...l,...ld->...d", powers, masses)


@lru_cache(maxsize=None)
def _angular_scale(label: str, hpbw: float, environment: str, target_deg: float) -> float:
    """Lobe scale (deg) whose expected omni spread hits the target, by common-random-number root finding."""
    band = FrequencyBand(label, 1.0, hpbw, 0.0)
    draws = _lobe_draws(np.random.default_rng(1729), environment, CALIBRATION_DRAWS)

    def mean_spread(scale):
        pas = _pas_from_draws(draws, scale, band)
        pas = np.where(pas >= pas.max(axis=1, keepdims=True) * 0.1 * (1 - 1e-12), pas, 0.0)
        return float(grid_spread_batch(pas, hpbw).mean()) - target_deg

    return float(optimize.brentq(mean_spread, 0.5, 400.0, xtol=1e-3))


def generate_drop(cfg: DropConfig, rng: np.random.Generator | None = None) -> SyntheticDrop:
    """One synthetic omni PDP + AOA PAS drop for the configured band and environment."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    band = cfg.band
    try:
        pl_params = embedded_ci_params(band.carrier_GHz, cfg.environment, "omni")
        target_ds, target_as = target_stats(band, cfg.environment)
    except (KeyError, ValueError):
        raise ValueError(f"unsupported band/environment ({band.label}, {cfg.environment})") from None

    d = cfg.distance_m if cfg.distance_m is not None else float(rng.uniform(*params.MEASURED_RANGE_M))
    shadow = float(sample_shadowing(pl_params.sigma_dB, rng))
    pl = float(ci_predict(pl_params, d, shadow))
    rx_dBm = cfg.conducted_power_dBm - pl

    decay = target_ds / _ds_per_unit_decay()
    # drops are channel realizations, so they carry no receiver noise
    unit = _draw_pdp(rng, free_space_delay_ns(d), decay)
    pdp = PowerDelayProfile(unit.start_delay_ns, unit.bin_width_ns, unit.powers_mW * db_to_linear(rx_dBm), NOISELESS_FLOOR_DBM)

    scale = _angular_scale(band.label, band.hpbw_deg, cfg.environment, target_as)
    pas_p = _pas_from_draws(_lobe_draws(rng, cfg.environment), scale, band)
    pas = PowerAngularSpectrum(np.arange(band.azimuth_steps) * band.hpbw_deg, pas_p / pas_p.sum() * pdp.total_power_mW)

    kept = threshold_pdp(pdp)
    lobes = tuple(segment_lobes(pas))
    stats = ChannelStats(
        location_id="",
        polarization="VV",
        environment=cfg.environment,
        distance_m=d,
        omni_rms_ds_ns=rms_delay_spread(kept),
        mean_excess_delay_ns=mean_excess_delay(kept),
        lobe_as_deg=[lobe_spread(lb) for lb in lobes],
        omni_as_deg=pas_spread(pas),
        omni_pl_dB=pl,
    )
    return SyntheticDrop(cfg, d, pl, shadow, pdp, pas, lobes, stats, target_ds, target_as)


def generate_drops(cfg: DropConfig, n: int, seed: int | None = None) -> list[SyntheticDrop]:
    """``n`` drops from independent child streams of one seed."""
    seed = cfg.seed if seed is None else seed
    streams = np.random.SeedSequence(seed).spawn(n)
    return [generate_drop(cfg, np.random.default_rng(s)) for s in streams]


def drop_records(drop: SyntheticDrop, location_id: str, polarization: str = "VV") -> list[MeasurementRecord]:
    """Split a drop into directional AOA captures (TX at boresight) with antenna gains applied.

    Summing the captures and removing both horn gains gives back the drop's omni PDP.
    """
    band = drop.config.band
    gain = db_to_linear(2.0 * band.antenna_gain_dBi)
    frac = drop.pas.powers_mW / drop.pas.powers_mW.sum()
    pdp = drop.pdp
    floor = pdp.noise_floor_dBm
    if floor > NOISELESS_FLOOR_DBM:
        floor += 2.0 * band.antenna_gain_dBi
    out = []
    for az, f in zip(drop.pas.azimuths_deg, frac):
        dpdp = PowerDelayProfile(pdp.start_delay_ns, pdp.bin_width_ns, pdp.powers_mW * (f * gain), floor)
        out.append(
            MeasurementRecord(location_id, polarization, 0.0, 0, float(az), 0, dpdp, drop.config.environment, drop.distance_m)
        )
    return out


# -- ensembles ---------------------------------------------------------------------------


def summarize(values: Sequence[float]) -> dict:
    """Mean, population s.d. and empirical CDF of one statistic."""
    x = np.sort(np.asarray([v for v in values if np.isfinite(v)], dtype=float))
    if x.size == 0:
        raise ValueError("no values to summarize")
    return {
        "count": int(x.size),
        "mean": float(x.mean()),
        "sd": float(x.std()),
        "cdf": {"x": x.tolist(), "p": (np.arange(1, x.size + 1) / x.size).tolist()},
    }


def ensemble_stats(items) -> dict:
    """Per-statistic summaries over drops or :class:`ChannelStats` objects."""
    stats = [getattr(it, "stats", it) for it in items]
    if not stats:
        raise ValueError("empty ensemble")
    out = {
        "omni_rms_ds_ns": summarize([s.omni_rms_ds_ns for s in stats]),
        "omni_as_deg": summarize([s.omni_as_deg for s in stats]),
        "omni_pl_dB": summarize([s.omni_pl_dB for s in stats]),
        "mean_excess_delay_ns": summarize([s.mean_excess_delay_ns for s in stats]),
    }
    lobes = [a for s in stats for a in s.lobe_as_deg]
    if lobes:
        out["lobe_as_deg"] = summarize(lobes)
    dirs = [s.mean_directional_rms_ds_ns for s in stats if s.directional_rms_ds_ns]
    if dirs:
        out["directional_rms_ds_ns"] = summarize(dirs)
    return out
