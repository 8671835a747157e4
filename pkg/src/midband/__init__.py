"""Indoor mid-band (6.75 / 16.95 GHz) channel measurement and modeling toolkit."""

from .core import FR1C, FR3, FrequencyBand, MeasurementRecord, PowerDelayProfile, get_band
from .pathloss import CIParams, ci_fit, ci_predict, fspl_1m

__all__ = [
    "FR1C",
    "FR3",
    "FrequencyBand",
    "MeasurementRecord",
    "PowerDelayProfile",
    "get_band",
    "CIParams",
    "ci_fit",
    "ci_predict",
    "fspl_1m",
]
