"""Close-in (CI) free-space reference distance path-loss model.

PL(f, d) = FSPL(f, 1 m) + 10 n log10(d / 1 m) + X_sigma, with
FSPL(f, 1 m) = 32.4 + 20 log10(f / 1 GHz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import params

ENVIRONMENTS = ("LOS", "NLOS", "NLOS_Best")
AGGREGATIONS = ("directional", "omni")


@dataclass(frozen=True)
class CIParams:
    carrier_GHz: float
    environment: str
    aggregation: str
    n: float
    sigma_dB: float
    d0_m: float = 1.0

    def __post_init__(self):
        if not self.carrier_GHz > 0:
            raise ValueError("carrier_GHz must be positive")
        if self.environment not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.environment!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if not self.n > 0:
            raise ValueError("path loss exponent must be positive")
        if not self.sigma_dB >= 0:
            raise ValueError("sigma_dB must be non-negative")
        if self.d0_m != 1.0:
            raise ValueError("the CI reference distance is fixed at 1 m")

    def to_dict(self) -> dict:
        return {
            "freq_GHz": self.carrier_GHz,
            "env": self.environment,
            "aggregation": self.aggregation,
            "n": self.n,
            "sigma_dB": self.sigma_dB,
        }


@dataclass(frozen=True)
class PathLossSample:
    distance_m: float
    path_loss_dB: float
    environment: str = "LOS"
    aggregation: str = "omni"

    def __post_init__(self):
        if not self.distance_m > 1.0:
            raise ValueError(f"sample distance must exceed 1 m, got {self.distance_m}")
        if not self.path_loss_dB > 0:
            raise ValueError("path loss must be positive")


def fspl_1m(carrier_GHz: float) -> float:
    if not carrier_GHz > 0:
        raise ValueError(f"carrier frequency must be positive, got {carrier_GHz}")
    return 32.4 + 20.0 * math.log10(carrier_GHz)


def ci_predict(p: CIParams, distance_m, shadowing_dB=0.0):
    """Path loss in dB. Accepts scalars or arrays for distance and shadowing."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < p.d0_m):
        raise ValueError("CI model is undefined below the 1 m reference distance")
    pl = fspl_1m(p.carrier_GHz) + 10.0 * p.n * np.log10(d / p.d0_m) + np.asarray(shadowing_dB, dtype=float)
    return float(pl) if pl.ndim == 0 else pl


def ci_fit(samples: Sequence[PathLossSample], carrier_GHz: float) -> CIParams:
    """Closed-form MMSE fit of the PLE through the FSPL 1 m anchor.

    sigma_dB is the RMS of the residuals (no Bessel correction).
    """
    if len(samples) == 0:
        raise ValueError("no path loss samples")
    if len(samples) < 2:
        raise ValueError("at least two samples are required")
    d = np.array([s.distance_m for s in samples], dtype=float)
    pl = np.array([s.path_loss_dB for s in samples], dtype=float)
    big_d = 10.0 * np.log10(d)
    denom = float(np.dot(big_d, big_d))
    if denom == 0.0:
        raise ValueError("all samples at the reference distance; slope is undetermined")
    excess = pl - fspl_1m(carrier_GHz)
    n = float(np.dot(excess, big_d) / denom)
    resid = excess - n * big_d
    sigma = float(np.sqrt(np.mean(resid**2)))
    return CIParams(carrier_GHz, samples[0].environment, samples[0].aggregation, n, sigma)


def sample_shadowing(sigma_dB: float, rng: np.random.Generator, size=None):
    if sigma_dB < 0:
        raise ValueError("sigma_dB must be non-negative")
    if sigma_dB == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sigma_dB, size=size)


def max_range_m(p: CIParams, max_path_loss_dB: float) -> float:
    """Largest distance whose mean path loss stays within ``max_path_loss_dB``."""
    excess = max_path_loss_dB - fspl_1m(p.carrier_GHz)
    if excess < 0:
        raise ValueError("maximum path loss is below the 1 m free-space loss")
    return p.d0_m * 10.0 ** (excess / (10.0 * p.n))


def embedded_ci_params(carrier_GHz: float, environment: str, aggregation: str) -> CIParams:
    try:
        f = params.lookup_freq(carrier_GHz, params.all_freqs())
        n, sigma = params.CI_TABLE[(f, environment, aggregation)]
    except KeyError:
        raise ValueError(f"no CI parameters for ({carrier_GHz}, {environment}, {aggregation})") from None
    return CIParams(f, environment, aggregation, n, sigma)


def parameter_table() -> list[dict]:
    """The embedded CI parameters as JSON-ready rows."""
    return params.export_all()["ci_params"]
