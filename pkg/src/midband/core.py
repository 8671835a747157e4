"""Shared domain types, unit conversions and angle/delay helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Stand-in for the noise floor of a noiseless profile (dBm).
NOISELESS_FLOOR_DBM = -300.0


def db_to_linear(x_db):
    """Convert dB (or dBm) to linear power (or mW)."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0) if np.ndim(x_db) else 10.0 ** (float(x_db) / 10.0)


def linear_to_db(x_lin):
    """Convert linear power to dB. Zero maps to ``-inf``; negatives are rejected."""
    arr = np.asarray(x_lin, dtype=float)
    if np.any(arr < 0):
        raise ValueError("linear power must be non-negative")
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(arr)
    return out if np.ndim(x_lin) else float(out)


def wrap_azimuth(a: float) -> float:
    """Wrap an angle in degrees onto [0, 360)."""
    a = float(a)
    if not math.isfinite(a):
        raise ValueError(f"azimuth must be finite, got {a}")
    w = a % 360.0
    # tiny negative inputs round up to exactly 360.0
    return 0.0 if w >= 360.0 else w


def free_space_delay_ns(distance_m: float) -> float:
    """Line-of-sight propagation delay in ns for a separation in metres."""
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return distance_m / SPEED_OF_LIGHT * 1e9


@dataclass(frozen=True)
class FrequencyBand:
    label: str
    carrier_GHz: float
    hpbw_deg: float
    antenna_gain_dBi: float
    eirp_dBm: float = 31.0
    link_margin_dB: float = float("nan")

    def __post_init__(self):
        if not self.carrier_GHz > 0:
            raise ValueError("carrier_GHz must be positive")
        if not 0 < self.hpbw_deg <= 360:
            raise ValueError("hpbw_deg must lie in (0, 360]")

    @property
    def sweepable(self) -> bool:
        k = 360.0 / self.hpbw_deg
        return abs(k - round(k)) < 1e-9

    @property
    def azimuth_steps(self) -> int:
        if not self.sweepable:
            raise ValueError(f"360 is not a multiple of HPBW {self.hpbw_deg}")
        return int(round(360.0 / self.hpbw_deg))

    @property
    def tx_power_dBm(self) -> float:
        """Conducted power at the TX horn input."""
        return self.eirp_dBm - self.antenna_gain_dBi

    def grid_index(self, azimuth_deg: float) -> int:
        """Index of ``azimuth_deg`` on the HPBW grid; raises if off-grid."""
        k = wrap_azimuth(azimuth_deg) / self.hpbw_deg
        idx = int(round(k))
        if abs(k - idx) > 1e-6:
            raise ValueError(f"azimuth {azimuth_deg} is not on the {self.hpbw_deg} deg grid")
        return idx % self.azimuth_steps

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "carrier_GHz": self.carrier_GHz,
            "hpbw_deg": self.hpbw_deg,
            "antenna_gain_dBi": self.antenna_gain_dBi,
            "eirp_dBm": self.eirp_dBm,
            "link_margin_dB": self.link_margin_dB,
        }


FR1C = FrequencyBand("FR1C", 6.75, 30.0, 15.0, 31.0, 156.0)
FR3 = FrequencyBand("FR3", 16.95, 15.0, 20.0, 31.0, 159.0)
BANDS = {"FR1C": FR1C, "FR3": FR3}


def get_band(key) -> FrequencyBand:
    """Look up an embedded band by label ("FR1C"/"FR3") or carrier in GHz."""
    if isinstance(key, FrequencyBand):
        return key
    if isinstance(key, str) and key.upper() in BANDS:
        return BANDS[key.upper()]
    try:
        f = float(key)
    except (TypeError, ValueError):
        raise ValueError(f"unknown band {key!r}") from None
    for band in BANDS.values():
        if abs(band.carrier_GHz - f) < 1e-9:
            return band
    raise ValueError(f"unknown band {key!r}")


@dataclass(frozen=True, eq=False)
class PowerDelayProfile:
    """Received power (mW) on a uniform delay grid starting at ``start_delay_ns``.

    ``delays_ns`` are bin centres. The power array is stored read-only.
    """

    start_delay_ns: float
    bin_width_ns: float
    powers_mW: np.ndarray
    noise_floor_dBm: float = NOISELESS_FLOOR_DBM

    def __post_init__(self):
        p = np.array(self.powers_mW, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("powers_mW must be a non-empty 1-D array")
        if np.any(~np.isfinite(p)) or np.any(p < 0):
            raise ValueError("powers_mW must be finite and non-negative")
        if not self.bin_width_ns > 0:
            raise ValueError("bin_width_ns must be positive")
        if not math.isfinite(self.start_delay_ns) or self.start_delay_ns < 0:
            raise ValueError("start_delay_ns must be finite and >= 0")
        p.flags.writeable = False
        object.__setattr__(self, "powers_mW", p)

    @classmethod
    def from_delays(cls, delays_ns, powers_mW, noise_floor_dBm=NOISELESS_FLOOR_DBM):
        d = np.asarray(delays_ns, dtype=float)
        if d.size > 1:
            steps = np.diff(d)
            if np.any(steps <= 0):
                raise ValueError("delays must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-9):
                raise ValueError("bin width must be constant")
            bw = float(steps[0])
        else:
            bw = 1.0
        return cls(float(d[0]), bw, powers_mW, noise_floor_dBm)

    def __len__(self):
        return self.powers_mW.size

    @property
    def delays_ns(self) -> np.ndarray:
        return self.start_delay_ns + self.bin_width_ns * np.arange(self.powers_mW.size)

    @property
    def span_ns(self) -> float:
        return self.bin_width_ns * self.powers_mW.size

    @property
    def total_power_mW(self) -> float:
        return float(self.powers_mW.sum())

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.powers_mW))

    @property
    def peak_delay_ns(self) -> float:
        return float(self.delays_ns[self.peak_index])

    @property
    def peak_power_dBm(self) -> float:
        return linear_to_db(float(self.powers_mW.max()))

    def with_powers(self, powers_mW) -> "PowerDelayProfile":
        return replace(self, powers_mW=powers_mW)

    def scaled(self, factor: float) -> "PowerDelayProfile":
        """Multiply powers by ``factor``; the noise floor moves with them."""
        floor = self.noise_floor_dBm
        if floor > NOISELESS_FLOOR_DBM:
            floor = floor + linear_to_db(factor)
        return replace(self, powers_mW=self.powers_mW * factor, noise_floor_dBm=floor)

    def delay_shifted(self, offset_ns: float) -> "PowerDelayProfile":
        """Relabel every bin as ``delay + offset_ns``, treating the profile as periodic.

        Labels are wrapped modulo the profile span and the bins rotated so the
        axis stays increasing and non-negative.
        """
        span = self.span_ns
        new_start = (self.start_delay_ns + offset_ns) % span
        if new_start >= span:
            new_start = 0.0
        k = int(math.floor(new_start / self.bin_width_ns + 1e-12))
        # bins labelled in [span - k*bw, span) wrap to the front
        powers = np.roll(self.powers_mW, k)
        start = new_start - k * self.bin_width_ns
        if start < 0:
            start = 0.0
        return replace(self, start_delay_ns=start, powers_mW=powers)

    def rolled(self, shift_bins: int) -> "PowerDelayProfile":
        """Circularly move the content by ``shift_bins`` on a fixed grid."""
        return replace(self, powers_mW=np.roll(self.powers_mW, int(shift_bins)))

    def to_grid(self, bin_width_ns: float | None = None) -> "PowerDelayProfile":
        """Snap the axis onto the lattice of integer multiples of the bin width."""
        bw = self.bin_width_ns if bin_width_ns is None else bin_width_ns
        if not math.isclose(bw, self.bin_width_ns, rel_tol=1e-9):
            raise ValueError("re-binning to a different width is not supported")
        k = self.start_delay_ns / bw
        return replace(self, start_delay_ns=round(k) * bw if round(k) >= 0 else 0.0)


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """One directional capture at a TX-RX location."""

    location_id: str
    polarization: str
    tx_azimuth_deg: float
    tx_tilt: int
    rx_azimuth_deg: float
    rx_tilt: int
    pdp: PowerDelayProfile
    environment: str = "LOS"
    distance_m: float = float("nan")
    wall_time_s: float = 0.0

    def __post_init__(self):
        if self.polarization not in ("VV", "VH"):
            raise ValueError(f"polarization must be VV or VH, got {self.polarization!r}")
        object.__setattr__(self, "tx_azimuth_deg", wrap_azimuth(self.tx_azimuth_deg))
        object.__setattr__(self, "rx_azimuth_deg", wrap_azimuth(self.rx_azimuth_deg))
        object.__setattr__(self, "tx_tilt", int(self.tx_tilt))
        object.__setattr__(self, "rx_tilt", int(self.rx_tilt))

    @property
    def pointing(self) -> tuple:
        return (self.tx_azimuth_deg, self.rx_azimuth_deg, self.tx_tilt, self.rx_tilt)


def common_bin_width(pdps: Iterable[PowerDelayProfile]) -> float:
    widths = {round(p.bin_width_ns, 9) for p in pdps}
    if len(widths) != 1:
        raise ValueError(f"inconsistent bin widths: {sorted(widths)}")
    return widths.pop()
