"""Rubidium clock drift injection and successive drift correction against a reference MPC."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import PowerDelayProfile


@dataclass(frozen=True)
class ClockModel:
    """Delay offset of the RX timebase relative to TX.

    offset(t) = initial_phase_offset_ns + frequency_offset_ppb * t  [ns, t in s]
    plus an optional Brownian term with ``jitter_ns_per_sqrt_s`` diffusion.
    """

    frequency_offset_ppb: float = 0.0
    initial_phase_offset_ns: float = 0.0
    jitter_ns_per_sqrt_s: float = 0.0

    def offsets_ns(self, times_s, rng: np.random.Generator | None = None) -> np.ndarray:
        t = np.asarray(times_s, dtype=float)
        out = self.initial_phase_offset_ns + self.frequency_offset_ppb * t
        if self.jitter_ns_per_sqrt_s > 0:
            if rng is None:
                raise ValueError("an rng is required for a jittered clock")
            dt = np.diff(np.concatenate(([0.0], t)))
            if np.any(dt < 0):
                raise ValueError("times must be non-decreasing from 0")
            out = out + np.cumsum(rng.normal(0.0, 1.0, t.size) * self.jitter_ns_per_sqrt_s * np.sqrt(dt))
        return out


@dataclass(frozen=True, eq=False)
class CaptureEvent:
    wall_time_s: float
    tx_azimuth_deg: float
    rx_azimuth_deg: float
    pdp: PowerDelayProfile
    tx_tilt: int = 0
    rx_tilt: int = 0
    is_reference_mpc_recapture: bool = False
    sweep_index: int = 0
    polarization: str = "VV"
    clock_offset_ns: float = 0.0  # injected offset, kept for bookkeeping


def _check_ordered(events: Sequence[CaptureEvent]) -> None:
    times = [e.wall_time_s for e in events]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("capture events are not in time order")


def apply_drift(events: Sequence[CaptureEvent], clock: ClockModel, rng: np.random.Generator | None = None) -> list[CaptureEvent]:
    """Offset each capture's delay axis by the clock error at its wall time."""
    _check_ordered(events)
    if not events:
        return []
    offsets = clock.offsets_ns([e.wall_time_s for e in events], rng)
    return [
        replace(e, pdp=e.pdp.delay_shifted(float(o)), clock_offset_ns=e.clock_offset_ns + float(o))
        for e, o in zip(events, offsets)
    ]


def refined_peak_delay_ns(pdp: PowerDelayProfile) -> float:
    """Peak delay with three-point parabolic refinement (circular neighbours)."""
    p = pdp.powers_mW
    i = int(np.argmax(p))
    n = p.size
    if n < 3:
        return pdp.peak_delay_ns
    a, b, c = p[(i - 1) % n], p[i], p[(i + 1) % n]
    denom = a - 2 * b + c
    frac = 0.5 * (a - c) / denom if denom < 0 else 0.0
    return pdp.peak_delay_ns + float(np.clip(frac, -0.5, 0.5)) * pdp.bin_width_ns


def _wrapped_diff(x: float, span: float) -> float:
    return (x + span / 2.0) % span - span / 2.0


@dataclass
class DriftReport:
    reference_times_s: list = field(default_factory=list)
    observed_delays_ns: list = field(default_factory=list)
    displacements_ns: list = field(default_factory=list)
    corrected_reference_delays_ns: list = field(default_factory=list)
    corrections_ns: list = field(default_factory=list)

    @property
    def max_reference_residual_ns(self) -> float:
        d0 = self.corrected_reference_delays_ns[0]
        return max(abs(d - d0) for d in self.corrected_reference_delays_ns)

    def to_dict(self) -> dict:
        return {
            "drift_recaptures": [
                {"wall_time_s": t, "observed_delay_ns": d, "displacement_ns": s}
                for t, d, s in zip(self.reference_times_s, self.observed_delays_ns, self.displacements_ns)
            ],
            "max_reference_residual_ns": self.max_reference_residual_ns,
        }


def _check_recaptures(events: Sequence[CaptureEvent]) -> None:
    if not events or not events[0].is_reference_mpc_recapture:
        raise ValueError("schedule must open with a reference MPC capture")
    pending = None  # sweep awaiting its closing recapture
    for e in events:
        if e.is_reference_mpc_recapture:
            pending = None
        elif pending is None:
            pending = e.sweep_index
        elif e.sweep_index != pending:
            raise ValueError(f"sweep {pending} is not followed by a reference recapture")
    if pending is not None:
        raise ValueError(f"sweep {pending} is not followed by a reference recapture")


def drift_correct(events: Sequence[CaptureEvent], anchor_time_s: float | None = None) -> tuple[list[CaptureEvent], DriftReport]:
    """Undo clock drift using the reference-MPC recaptures.

    The delay displacement of the reference peak is measured at every
    recapture relative to the opening capture and interpolated linearly in
    wall time for the captures in between. Each new displacement is resolved
    modulo the sequence period against the drift rate of the previous
    interval, so only the first interval has to stay under half a period.

    With ``anchor_time_s`` (e.g. the time of the timing calibration) the
    displacement is taken relative to that instant instead of the opening
    capture, extrapolating the first interval's rate backwards.
    """
    _check_ordered(events)
    _check_recaptures(events)
    refs = [e for e in events if e.is_reference_mpc_recapture]
    times = np.array([e.wall_time_s for e in refs])
    observed = [refined_peak_delay_ns(e.pdp) for e in refs]
    disp = [0.0]
    rate = 0.0  # ns per s over the previous interval, used to resolve period aliasing
    for i in range(1, len(refs)):
        dt = times[i] - times[i - 1]
        predicted = disp[-1] + rate * dt
        step = _wrapped_diff(observed[i] - observed[0] - predicted, refs[i].pdp.span_ns)
        disp.append(predicted + step)
        rate = (disp[-1] - disp[-2]) / dt if dt > 0 else rate
    disp_arr = np.array(disp)
    anchor = 0.0
    if anchor_time_s is not None and len(refs) > 1 and times[1] > times[0]:
        anchor = (disp[1] - disp[0]) / (times[1] - times[0]) * (anchor_time_s - times[0])
    report = DriftReport(list(times), observed, disp)
    out = []
    for e in events:
        shift = float(np.interp(e.wall_time_s, times, disp_arr)) - anchor
        corrected = replace(e, pdp=e.pdp.delay_shifted(-shift), clock_offset_ns=e.clock_offset_ns - shift)
        report.corrections_ns.append(-shift)
        out.append(corrected)
    d0 = None
    for e in out:
        if e.is_reference_mpc_recapture:
            d = refined_peak_delay_ns(e.pdp)
            d0 = d if d0 is None else d0
            report.corrected_reference_delays_ns.append(d0 + _wrapped_diff(d - d0, e.pdp.span_ns))
    return out, report
