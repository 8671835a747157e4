"""Sliding-correlation channel sounder model.

The transmitter repeats a maximal-length PN sequence at the fast chip rate;
the receiver correlates against the same sequence clocked slightly slower.
The relative slip sweeps the correlation lag, so a lag of ``tau`` appears at
dilated time ``tau * slide_factor`` in the recorded output.

Simulation runs at complex baseband, one period of the sequence at a time,
sampled at ``samples_per_chip`` samples per fast chip (2 by default, giving
1 ns delay bins at 500 Mcps). Fractional path delays are applied as ideal
band-limited phase ramps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import NOISELESS_FLOOR_DBM, PowerDelayProfile, db_to_linear, free_space_delay_ns, linear_to_db
from .params import CALIBRATION_DISTANCE_M, PDP_FLOOR_MARGIN_DB, PDPS_AVERAGED
from .pathloss import fspl_1m

# Fibonacci LFSR feedback taps of known primitive polynomials, per register order.
PRIMITIVE_TAPS = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 6, 4, 1),
    13: (13, 4, 3, 1),
    14: (14, 5, 3, 1),
    15: (15, 14),
    16: (16, 15, 13, 4),
    17: (17, 14),
    18: (18, 11),
}

DEFAULT_ORDER = 11


@dataclass(frozen=True, eq=False)
class PnSequence:
    chips: np.ndarray  # +1/-1, read-only
    order: int
    taps: tuple
    chip_rate_Mcps: float = 500.0

    @property
    def length(self) -> int:
        return self.chips.size

    @property
    def processing_gain_dB(self) -> float:
        return 10.0 * math.log10(self.length)


def _lfsr_bits(order: int, taps: Sequence[int]) -> tuple[list[int], int]:
    mask = (1 << order) - 1
    state = start = mask
    tap_shifts = [t - 1 for t in taps]
    bits = []
    full = mask  # 2^m - 1
    for _ in range(full):
        bits.append((state >> (order - 1)) & 1)
        fb = 0
        for s in tap_shifts:
            fb ^= (state >> s) & 1
        state = ((state << 1) | fb) & mask
        if state == start:
            break
    return bits, len(bits)


@lru_cache(maxsize=32)
def _cached_pn(order: int, taps: tuple) -> np.ndarray:
    bits, period = _lfsr_bits(order, taps)
    if period != (1 << order) - 1:
        raise ValueError(
            f"taps {taps} are not primitive for order {order}: period {period} < {(1 << order) - 1}"
        )
    chips = 1.0 - 2.0 * np.array(bits, dtype=float)
    chips.flags.writeable = False
    return chips


def gen_pn(order: int = DEFAULT_ORDER, taps: Sequence[int] | None = None, chip_rate_Mcps: float = 500.0) -> PnSequence:
    """Maximal-length sequence of 2**order - 1 chips mapped 0 -> +1, 1 -> -1."""
    if order < 2:
        raise ValueError("register order must be >= 2")
    if taps is None:
        if order not in PRIMITIVE_TAPS:
            raise ValueError(f"no default taps for order {order}")
        taps = PRIMITIVE_TAPS[order]
    taps = tuple(sorted({int(t) for t in taps}, reverse=True))
    if taps[0] != order or taps[-1] < 1:
        raise ValueError(f"taps must lie in 1..{order} and include {order}")
    return PnSequence(_cached_pn(order, taps), order, taps, chip_rate_Mcps)


def periodic_autocorrelation(chips) -> np.ndarray:
    c = np.asarray(chips, dtype=float)
    spec = np.fft.fft(c)
    return np.rint(np.fft.ifft(spec * np.conj(spec)).real)


@dataclass(frozen=True)
class CorrelatorConfig:
    fast_rate_Mcps: float = 500.0
    slow_rate_Mcps: float = 499.9375

    @property
    def slide_factor(self) -> float:
        return dilation_factor(self)


def dilation_factor(cfg: CorrelatorConfig) -> float:
    if not cfg.slow_rate_Mcps < cfg.fast_rate_Mcps:
        raise ValueError("slow chip rate must be below the fast chip rate")
    return cfg.fast_rate_Mcps / (cfg.fast_rate_Mcps - cfg.slow_rate_Mcps)


@dataclass(frozen=True)
class PathTap:
    delay_ns: float
    gain_dB: float
    phase_rad: float = 0.0


@dataclass(frozen=True, eq=False)
class ReceivedSignal:
    """Baseband samples, one row per received period of the sequence."""

    samples: np.ndarray
    samples_per_chip: int
    chip_rate_Mcps: float
    noise_power_mW: float = 0.0

    @property
    def sample_period_ns(self) -> float:
        return 1e3 / (self.chip_rate_Mcps * self.samples_per_chip)


def _waveform(pn: PnSequence, samples_per_chip: int) -> np.ndarray:
    return np.repeat(pn.chips, samples_per_chip)


def channel_convolve(
    pn: PnSequence,
    taps: Sequence[PathTap],
    snr_dB: float | None,
    rng: np.random.Generator | None = None,
    *,
    tx_power_dBm: float = 0.0,
    noise_power_mW: float | None = None,
    samples_per_chip: int = 2,
    n_periods: int = PDPS_AVERAGED,
) -> ReceivedSignal:
    """Superpose delayed, scaled copies of the periodic sounding waveform and add AWGN.

    Noise power per sample is ``noise_power_mW`` when given, otherwise it sits
    ``snr_dB`` below the strongest tap; ``snr_dB=None`` (or inf) gives a
    noiseless capture.
    """
    if len(taps) == 0:
        raise ValueError("at least one channel tap is required")
    x = _waveform(pn, samples_per_chip)
    n = x.size
    ts_ns = 1e3 / (pn.chip_rate_Mcps * samples_per_chip)
    freqs = np.fft.fftfreq(n, d=ts_ns)  # cycles per ns
    spec = np.fft.fft(x)
    acc = np.zeros(n, dtype=complex)
    strongest = 0.0
    for tap in taps:
        if tap.delay_ns < 0:
            raise ValueError("tap delays must be non-negative")
        p = db_to_linear(tx_power_dBm + tap.gain_dB)
        strongest = max(strongest, p)
        acc += math.sqrt(p) * np.exp(1j * tap.phase_rad) * np.exp(-2j * np.pi * freqs * tap.delay_ns)
    clean = np.fft.ifft(spec * acc)
    rows = np.tile(clean, (n_periods, 1))
    if noise_power_mW is None:
        noise_power_mW = 0.0 if snr_dB is None or math.isinf(snr_dB) else strongest / db_to_linear(snr_dB)
    if noise_power_mW > 0:
        if rng is None:
            raise ValueError("an rng is required for a noisy capture")
        rows = rows + awgn(rows.shape, noise_power_mW, rng)
    return ReceivedSignal(rows, samples_per_chip, pn.chip_rate_Mcps, float(noise_power_mW))


def awgn(shape, power_mW: float, rng: np.random.Generator) -> np.ndarray:
    scale = math.sqrt(power_mW / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def noise_only(pn: PnSequence, noise_power_mW: float, rng: np.random.Generator, *, samples_per_chip: int = 2,
               n_periods: int = PDPS_AVERAGED) -> ReceivedSignal:
    shape = (n_periods, pn.length * samples_per_chip)
    return ReceivedSignal(awgn(shape, noise_power_mW, rng), samples_per_chip, pn.chip_rate_Mcps, noise_power_mW)


@lru_cache(maxsize=16)
def _pulse_energy(order: int, taps: tuple, samples_per_chip: int) -> float:
    # Sum of squared normalized autocorrelation of the oversampled waveform:
    # a single path of power P then spreads exactly P over all lags.
    x = np.repeat(_cached_pn(order, taps), samples_per_chip)
    spec = np.fft.fft(x)
    acf = np.fft.ifft(np.abs(spec) ** 2).real / x.size
    return float(np.sum(acf**2))


@dataclass(frozen=True, eq=False)
class DilatedCapture:
    """Correlator output on the dilated (recorded) time axis."""

    dilated_time_us: np.ndarray
    powers_mW: np.ndarray
    noise_floor_dBm: float
    slide_factor: float


def sliding_correlate(rx: ReceivedSignal, pn: PnSequence, cfg: CorrelatorConfig = CorrelatorConfig()) -> DilatedCapture:
    """Correlate every received period against the local sequence and average the power."""
    if not math.isclose(pn.chip_rate_Mcps, cfg.fast_rate_Mcps) or not math.isclose(rx.chip_rate_Mcps, cfg.fast_rate_Mcps):
        raise ValueError("chip rate of the capture does not match the correlator configuration")
    x = _waveform(pn, rx.samples_per_chip)
    n = x.size
    if rx.samples.shape[-1] != n:
        raise ValueError("capture length does not match one period of the sequence")
    ref = np.conj(np.fft.fft(x))
    corr = np.fft.ifft(np.fft.fft(rx.samples, axis=-1) * ref, axis=-1) / n
    energy = _pulse_energy(pn.order, pn.taps, rx.samples_per_chip)
    power = np.mean(np.abs(corr) ** 2, axis=0) / energy
    if rx.noise_power_mW > 0:
        floor = linear_to_db(rx.noise_power_mW / (n * energy))
    else:
        floor = NOISELESS_FLOOR_DBM
    slide = dilation_factor(cfg)
    lag_ns = np.arange(n) * rx.sample_period_ns
    return DilatedCapture(lag_ns * slide / 1e3, power, floor, slide)


def undilate(capture: DilatedCapture) -> PowerDelayProfile:
    """Compress the dilated time axis back to absolute propagation delay."""
    delays = capture.dilated_time_us * 1e3 / capture.slide_factor
    return PowerDelayProfile.from_delays(delays, capture.powers_mW, capture.noise_floor_dBm)


def sound(pn, taps, snr_dB=None, rng=None, cfg=CorrelatorConfig(), **kwargs) -> PowerDelayProfile:
    """Convenience: channel -> correlator -> absolute-delay PDP."""
    return undilate(sliding_correlate(channel_convolve(pn, taps, snr_dB, rng, **kwargs), pn, cfg))


@dataclass(frozen=True)
class PowerCalibration:
    system_gain_dB: float  # correction added to measured powers
    measured_power_dBm: float
    recovered_pl_dB: float
    expected_pl_dB: float
    nonlinear: bool


def free_space_pl(carrier_GHz: float, distance_m: float) -> float:
    return fspl_1m(carrier_GHz) + 20.0 * math.log10(distance_m)


def _dominant_path_power(pdp: PowerDelayProfile, dominance_dB: float) -> float:
    from .measproc import extract_mpcs, threshold_pdp

    kept = threshold_pdp(pdp)
    mpcs = extract_mpcs(kept)
    if len(mpcs) > 1:
        powers = sorted((m.power_mW for m in mpcs), reverse=True)
        if linear_to_db(powers[0] / powers[1]) < dominance_dB:
            raise ValueError("calibration capture has more than one path within "
                             f"{dominance_dB:g} dB of the peak")
    return kept.total_power_mW


def power_calibrate(
    pdp: PowerDelayProfile,
    tx_power_dBm: float,
    tx_gain_dBi: float,
    rx_gain_dBi: float,
    carrier_GHz: float,
    distance_m: float = CALIBRATION_DISTANCE_M,
    nominal_system_gain_dB: float = 0.0,
    dominance_dB: float = 10.0,
) -> PowerCalibration:
    """Derive the receiver gain correction from a free-space capture.

    The received path power is the thresholded PDP area. ``system_gain_dB`` is
    the correction that makes that power agree with Friis at ``distance_m``;
    the capture is flagged nonlinear when, with the nominal gain, the
    recovered path loss misses free space by more than 1 dB.
    """
    measured = linear_to_db(_dominant_path_power(pdp, dominance_dB))
    expected_pl = free_space_pl(carrier_GHz, distance_m)
    expected_rx = tx_power_dBm + tx_gain_dBi + rx_gain_dBi - expected_pl
    recovered_pl = tx_power_dBm + tx_gain_dBi + rx_gain_dBi - (measured + nominal_system_gain_dB)
    return PowerCalibration(
        system_gain_dB=expected_rx - measured,
        measured_power_dBm=measured,
        recovered_pl_dB=recovered_pl,
        expected_pl_dB=expected_pl,
        nonlinear=abs(recovered_pl - expected_pl) > 1.0,
    )


@dataclass(frozen=True, eq=False)
class TimeCalibration:
    shift_bins: int
    shift_ns: float
    pdp: PowerDelayProfile


def time_calibrate(pdp: PowerDelayProfile, expected_delay_ns: float | None = None) -> TimeCalibration:
    """Circularly shift the PDP so its peak lands on the free-space delay."""
    if expected_delay_ns is None:
        expected_delay_ns = free_space_delay_ns(CALIBRATION_DISTANCE_M)
    if pdp.peak_power_dBm < pdp.noise_floor_dBm + PDP_FLOOR_MARGIN_DB:
        raise ValueError("no peak above the noise threshold in the calibration capture")
    shift = int(round((expected_delay_ns - pdp.peak_delay_ns) / pdp.bin_width_ns))
    return TimeCalibration(shift, shift * pdp.bin_width_ns, pdp.rolled(shift))
