"""Measurement post-processing: PDP thresholding, omni synthesis, spatial lobes and spreads."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import (
    NOISELESS_FLOOR_DBM,
    FrequencyBand,
    MeasurementRecord,
    PowerDelayProfile,
    common_bin_width,
    db_to_linear,
    linear_to_db,
)
from .params import PDP_FLOOR_MARGIN_DB, PDP_PEAK_WINDOW_DB, SPATIAL_LOBE_THRESHOLD_DB


class NoiseFloor(NamedTuple):
    dBm: float
    noiseless: bool


class Mpc(NamedTuple):
    delay_ns: float
    power_mW: float


def estimate_noise_floor(pdp: PowerDelayProfile, min_leading_bins: int = 50) -> NoiseFloor:
    """Median power of the noise-only bins ahead of the first arrival.

    The first arrival is the first bin more than 10 dB above the median of the
    whole profile.
    """
    p = pdp.powers_mW
    if p.size < min_leading_bins + 1:
        raise ValueError("PDP too short to estimate a noise floor")
    overall = float(np.median(p))
    if overall > 0:
        above = np.flatnonzero(p > overall * 10.0)
        first = int(above[0]) if above.size else p.size
    else:
        first = int(np.flatnonzero(p > 0)[0]) if np.any(p > 0) else p.size
    if first < min_leading_bins:
        raise ValueError(f"first arrival at bin {first}; need {min_leading_bins} noise-only leading bins")
    med = float(np.median(p[:first]))
    if med <= 0:
        return NoiseFloor(NOISELESS_FLOOR_DBM, True)
    return NoiseFloor(linear_to_db(med), False)


def pdp_threshold_dBm(pdp: PowerDelayProfile) -> float:
    """The larger of (noise floor + 5 dB) and (peak - 25 dB)."""
    return max(pdp.noise_floor_dBm + PDP_FLOOR_MARGIN_DB, pdp.peak_power_dBm - PDP_PEAK_WINDOW_DB)


def has_signal(pdp: PowerDelayProfile) -> bool:
    return pdp.powers_mW.max() > 0 and pdp.peak_power_dBm >= pdp.noise_floor_dBm + PDP_FLOOR_MARGIN_DB


def threshold_pdp(pdp: PowerDelayProfile) -> PowerDelayProfile:
    """Zero every bin below the processing threshold."""
    if not has_signal(pdp):
        raise ValueError("no PDP bin exceeds the noise floor by 5 dB")
    thr = db_to_linear(pdp_threshold_dBm(pdp))
    p = pdp.powers_mW
    return pdp.with_powers(np.where(p >= thr * (1 - 1e-12), p, 0.0))


def extract_mpcs(pdp: PowerDelayProfile) -> list[Mpc]:
    """Local maxima of a thresholded PDP; a flat plateau reports its earliest bin."""
    p = pdp.powers_mW
    if p.size == 0:
        return []
    left = np.concatenate(([-np.inf], p[:-1]))
    right = np.concatenate((p[1:], [-np.inf]))
    idx = np.flatnonzero((p > 0) & (p > left) & (p >= right))
    d = pdp.delays_ns
    return [Mpc(float(d[i]), float(p[i])) for i in idx]


def _moments(pdp: PowerDelayProfile) -> tuple[float, float, float]:
    p = pdp.powers_mW
    total = float(p.sum())
    if total <= 0:
        raise ValueError("PDP has zero total power")
    d = pdp.delays_ns
    mean = float(np.dot(p, d) / total)
    var = float(np.dot(p, (d - mean) ** 2) / total)
    return total, mean, var


def rms_delay_spread(pdp: PowerDelayProfile) -> float:
    """Square root of the second central moment of the (thresholded) PDP."""
    _, _, var = _moments(pdp)
    return math.sqrt(max(var, 0.0))


def mean_excess_delay(pdp: PowerDelayProfile) -> float:
    _, mean, _ = _moments(pdp)
    first = pdp.delays_ns[np.flatnonzero(pdp.powers_mW > 0)[0]]
    return mean - float(first)


# -- directional capture sets ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DirectionalCaptureSet:
    """Directional captures of one location and polarization on a band's azimuth grid.

    Captures of the same (AOD, AOA, TX tilt, RX tilt) cell are collapsed to the
    strongest one.
    """

    location_id: str
    polarization: str
    band: FrequencyBand
    records: tuple = ()

    def __post_init__(self):
        cells: dict[tuple, MeasurementRecord] = {}
        for r in self.records:
            key = (self.band.grid_index(r.tx_azimuth_deg), r.tx_tilt, self.band.grid_index(r.rx_azimuth_deg), r.rx_tilt)
            prev = cells.get(key)
            if prev is None or r.pdp.total_power_mW > prev.pdp.total_power_mW:
                cells[key] = r
        object.__setattr__(self, "records", tuple(cells[k] for k in sorted(cells)))

    @property
    def environment(self) -> str:
        return self.records[0].environment if self.records else "LOS"

    @property
    def distance_m(self) -> float:
        return self.records[0].distance_m if self.records else float("nan")


def group_records(records: Iterable[MeasurementRecord], band: FrequencyBand) -> dict[tuple, DirectionalCaptureSet]:
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.location_id, r.polarization), []).append(r)
    return {k: DirectionalCaptureSet(k[0], k[1], band, tuple(v)) for k, v in groups.items()}


def _records(capture_set) -> Sequence[MeasurementRecord]:
    return capture_set.records if isinstance(capture_set, DirectionalCaptureSet) else tuple(capture_set)


def _lattice(pdps: Sequence[PowerDelayProfile]) -> tuple[float, np.ndarray, int]:
    bw = common_bin_width(pdps)
    starts = np.array([p.start_delay_ns for p in pdps]) / bw
    k = np.rint(starts)
    if np.any(np.abs(starts - k) > 1e-6):
        raise ValueError("PDPs are not on a common delay lattice")
    k = k.astype(int)
    n = int(max(k[i] + len(p) for i, p in enumerate(pdps)) - k.min())
    return bw, k, n


def synthesize_omni_pdp(capture_set, threshold: bool = True) -> PowerDelayProfile:
    """Sum thresholded directional PDPs over unique pointing cells with antenna gains removed.

    Both TX and RX horn gains are divided out (flat-top sector pattern).
    Directions with nothing above the noise rule contribute nothing.
    """
    recs = _records(capture_set)
    if not recs:
        raise ValueError("empty capture set")
    gain_db = 2.0 * capture_set.band.antenna_gain_dBi if isinstance(capture_set, DirectionalCaptureSet) else 0.0
    pdps = [r.pdp for r in recs]
    bw, k, n = _lattice(pdps)
    k0 = int(k.min())
    acc = np.zeros(n)
    for ki, pdp in zip(k, pdps):
        if threshold:
            if not has_signal(pdp):
                continue
            pdp = threshold_pdp(pdp)
        acc[ki - k0 : ki - k0 + len(pdp)] += pdp.powers_mW
    floors = [p.noise_floor_dBm for p in pdps]
    floor = max(floors) - gain_db if max(floors) > NOISELESS_FLOOR_DBM else NOISELESS_FLOOR_DBM
    return PowerDelayProfile(k0 * bw, bw, acc / db_to_linear(gain_db), floor)


def path_loss_from_pdp(pdp: PowerDelayProfile, tx_power_dBm: float) -> float:
    total = pdp.total_power_mW
    if total <= 0:
        raise ValueError("PDP has zero total power")
    return tx_power_dBm - linear_to_db(total)


def omni_path_loss(capture_set, tx_power_dBm: float) -> float:
    return path_loss_from_pdp(synthesize_omni_pdp(capture_set), tx_power_dBm)


# -- angular processing ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PowerAngularSpectrum:
    azimuths_deg: np.ndarray
    powers_mW: np.ndarray
    side: str = "AOA"

    def __post_init__(self):
        a = np.asarray(self.azimuths_deg, dtype=float)
        p = np.asarray(self.powers_mW, dtype=float)
        if a.shape != p.shape or a.ndim != 1:
            raise ValueError("azimuths and powers must be 1-D arrays of equal length")
        if np.any(p < 0):
            raise ValueError("PAS powers must be non-negative")
        object.__setattr__(self, "azimuths_deg", a)
        object.__setattr__(self, "powers_mW", p)

    @property
    def step_deg(self) -> float:
        return 360.0 / self.azimuths_deg.size

    def above_slt(self, slt_dB: float = SPATIAL_LOBE_THRESHOLD_DB) -> "PowerAngularSpectrum":
        """Zero the directions more than ``slt_dB`` below the PAS peak."""
        p = self.powers_mW
        cut = p.max() * db_to_linear(-slt_dB)
        return PowerAngularSpectrum(self.azimuths_deg, np.where(p >= cut * (1 - 1e-12), p, 0.0), self.side)


def build_pas(capture_set: DirectionalCaptureSet, side: str = "AOA") -> PowerAngularSpectrum:
    """Total thresholded received power per azimuth on one link side."""
    if side not in ("AOA", "AOD"):
        raise ValueError("side must be AOA or AOD")
    band = capture_set.band
    steps = band.azimuth_steps
    pas = np.zeros(steps)
    seen = np.zeros(steps, dtype=bool)
    for r in capture_set.records:
        az = r.rx_azimuth_deg if side == "AOA" else r.tx_azimuth_deg
        i = band.grid_index(az)
        seen[i] = True
        if has_signal(r.pdp):
            pas[i] += threshold_pdp(r.pdp).total_power_mW
    if side == "AOA" and not seen.all():
        missing = [float(i * band.hpbw_deg) for i in np.flatnonzero(~seen)]
        raise ValueError(f"incomplete azimuth coverage; missing {missing}")
    return PowerAngularSpectrum(np.arange(steps) * band.hpbw_deg, pas, side)


@dataclass(frozen=True, eq=False)
class SpatialLobe:
    member_azimuths_deg: np.ndarray
    powers_mW: np.ndarray

    @property
    def peak_azimuth_deg(self) -> float:
        return float(self.member_azimuths_deg[int(np.argmax(self.powers_mW))])

    @property
    def total_power_mW(self) -> float:
        return float(self.powers_mW.sum())


def segment_lobes(pas: PowerAngularSpectrum, slt_dB: float = SPATIAL_LOBE_THRESHOLD_DB) -> list[SpatialLobe]:
    """Group circularly contiguous directions at or above the spatial lobe threshold."""
    p = pas.powers_mW
    if p.max() <= 0:
        return []
    above = pas.above_slt(slt_dB).powers_mW > 0
    n = p.size
    if above.all():
        return [SpatialLobe(pas.azimuths_deg.copy(), p.copy())]
    # start scanning just after a gap so a run across 0 deg stays whole
    start = int(np.flatnonzero(~above)[0])
    lobes, run = [], []
    for j in range(1, n + 1):
        i = (start + j) % n
        if above[i]:
            run.append(i)
        elif run:
            lobes.append(run)
            run = []
    if run:
        lobes.append(run)
    return [SpatialLobe(pas.azimuths_deg[r], p[r]) for r in lobes]


def angular_spread(angles_deg, powers) -> float:
    """Circular RMS angular spread in degrees.

    The power-weighted standard deviation of the angles is evaluated for every
    placement of the +-180 deg wrap point between adjacent angles and the
    smallest value is returned.
    """
    a = np.mod(np.asarray(angles_deg, dtype=float), 360.0)
    w = np.asarray(powers, dtype=float)
    if w.sum() <= 0:
        raise ValueError("zero total power")
    keep = w > 0
    a, w = a[keep], w[keep]
    order = np.argsort(a)
    a, w = a[order], w[order]
    if a.size == 1:
        return 0.0
    w = w / w.sum()
    # cut before element c: angles below the cut move up by 360
    shifted = a[None, :] + 360.0 * (np.arange(a.size)[None, :] < np.arange(a.size)[:, None])
    mean = shifted @ w
    var = ((shifted - mean[:, None]) ** 2) @ w
    return float(math.sqrt(max(var.min(), 0.0)))


def pas_spread(pas: PowerAngularSpectrum, slt_dB: float | None = SPATIAL_LOBE_THRESHOLD_DB) -> float:
    """Omnidirectional angular spread; directions below the SLT are ignored by default."""
    src = pas if slt_dB is None else pas.above_slt(slt_dB)
    return angular_spread(src.azimuths_deg, src.powers_mW)


def lobe_spread(lobe: SpatialLobe) -> float:
    return angular_spread(lobe.member_azimuths_deg, lobe.powers_mW)


def grid_spread_batch(powers: np.ndarray, step_deg: float) -> np.ndarray:
    """Vectorised :func:`angular_spread` for many spectra on the same uniform grid."""
    p = np.atleast_2d(np.asarray(powers, dtype=float))
    g = p.shape[1]
    w = p / p.sum(axis=1, keepdims=True)
    base = np.arange(g) * step_deg
    # cut c places the wrap point just before grid index c
    shifted = base[None, :] + 360.0 * (np.arange(g)[None, :] < np.arange(g)[:, None])  # (cut, dir)
    mean = w @ shifted.T  # (batch, cut)
    second = w @ (shifted.T**2)
    var = np.maximum(second - mean**2, 0.0)
    return np.sqrt(var.min(axis=1))


# -- per-location statistics ---------------------------------------------------------------


@dataclass
class ChannelStats:
    location_id: str
    polarization: str
    environment: str
    distance_m: float
    directional_rms_ds_ns: list = field(default_factory=list)
    omni_rms_ds_ns: float = float("nan")
    mean_excess_delay_ns: float = float("nan")
    lobe_as_deg: list = field(default_factory=list)
    omni_as_deg: float = float("nan")
    omni_pl_dB: float = float("nan")
    directional_pl_dB: list = field(default_factory=list)

    @property
    def mean_directional_rms_ds_ns(self) -> float:
        return float(np.mean(self.directional_rms_ds_ns)) if self.directional_rms_ds_ns else float("nan")

    def to_dict(self) -> dict:
        return {
            "location_id": self.location_id,
            "polarization": self.polarization,
            "environment": self.environment,
            "distance_m": self.distance_m,
            "omni_pl_dB": self.omni_pl_dB,
            "omni_rms_ds_ns": self.omni_rms_ds_ns,
            "mean_excess_delay_ns": self.mean_excess_delay_ns,
            "omni_as_deg": self.omni_as_deg,
            "lobe_as_deg": list(self.lobe_as_deg),
            "directional_rms_ds_ns": list(self.directional_rms_ds_ns),
            "directional_pl_dB": list(self.directional_pl_dB),
        }


def location_stats(capture_set: DirectionalCaptureSet, tx_power_dBm: float) -> ChannelStats:
    """Full statistics for one location; empty beams are skipped, not counted as zero."""
    gain_db = 2.0 * capture_set.band.antenna_gain_dBi
    dir_ds, dir_pl = [], []
    for r in capture_set.records:
        if not has_signal(r.pdp):
            continue
        kept = threshold_pdp(r.pdp)
        dir_ds.append(rms_delay_spread(kept))
        dir_pl.append(tx_power_dBm + gain_db - linear_to_db(kept.total_power_mW))
    omni = synthesize_omni_pdp(capture_set)
    stats = ChannelStats(
        capture_set.location_id,
        capture_set.polarization,
        capture_set.environment,
        capture_set.distance_m,
        directional_rms_ds_ns=dir_ds,
        directional_pl_dB=dir_pl,
    )
    if omni.total_power_mW > 0:
        kept = threshold_pdp(omni) if has_signal(omni) else omni
        stats.omni_rms_ds_ns = rms_delay_spread(kept)
        stats.mean_excess_delay_ns = mean_excess_delay(kept)
        stats.omni_pl_dB = path_loss_from_pdp(omni, tx_power_dBm)
        try:
            pas = build_pas(capture_set, "AOA")
        except ValueError:
            return stats  # incomplete RX sweep: no angular statistics
        if pas.powers_mW.max() > 0:
            stats.omni_as_deg = pas_spread(pas)
            stats.lobe_as_deg = [lobe_spread(lobe) for lobe in segment_lobes(pas)]
    return stats
