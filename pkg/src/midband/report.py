"""Campaign-level statistics report."""

from __future__ import annotations

import json
import math

from . import params
from .campaign import CampaignFile
from .changen import summarize
from .measproc import group_records, location_stats
from .pathloss import PathLossSample, ci_fit

PROVENANCE = {
    "pdp_threshold": "max(noise_floor + 5 dB, pdp_peak - 25 dB)",
    "spatial_lobe_threshold": "pas_peak - 10 dB",
    "aod_selection": "peak > min(max_aod_peak - 30 dB, noise_floor + 10 dB)",
    "xpol_aod_selection": "vv_peak >= noise_floor + 30 dB",
    "omni_synthesis": "sum of thresholded directional PDPs over unique pointing cells, TX and RX horn gains removed",
    "angular_spread": "power-weighted RMS azimuth, minimised over wrap placement; directions below the SLT ignored",
    "ci_fit": "MMSE slope through FSPL(f, 1 m); sigma = RMS residual",
}


ENSEMBLE_FIELDS = ("omni_rms_ds_ns", "omni_as_deg", "omni_pl_dB", "mean_excess_delay_ns", "mean_directional_rms_ds_ns")


def _clean(x):
    if isinstance(x, float):
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def _fit(samples, carrier):
    usable = [s for s in samples if s.distance_m > 1.0]
    if len(usable) < 2:
        return None
    try:
        return ci_fit(usable, carrier).to_dict() | {"samples": len(usable)}
    except ValueError:
        return None


def ci_fits(stats, carrier_GHz: float) -> list:
    """Omni and directional CI fits per environment class.

    Directional LOS and NLOS_Best use the strongest beam per location;
    directional NLOS pools every non-empty beam at NLOS locations.
    """
    groups: dict[tuple, list] = {}

    def add(env, agg, d, pl):
        if d is not None and not math.isnan(d) and d > 1.0 and not math.isnan(pl):
            groups.setdefault((env, agg), []).append(PathLossSample(d, pl, env, agg))

    for s in stats:
        if s.polarization != "VV":
            continue
        add(s.environment, "omni", s.distance_m, s.omni_pl_dB)
        if s.directional_pl_dB:
            best = min(s.directional_pl_dB)
            if s.environment == "LOS":
                add("LOS", "directional", s.distance_m, best)
            else:
                add("NLOS_Best", "directional", s.distance_m, best)
                for pl in s.directional_pl_dB:
                    add("NLOS", "directional", s.distance_m, pl)
    out = []
    for key in sorted(groups):
        fit = _fit(groups[key], carrier_GHz)
        if fit is not None:
            out.append(fit)
    return out


def build_report(campaign: CampaignFile) -> dict:
    sets = group_records(campaign.records, campaign.band)
    stats = [location_stats(sets[k], campaign.tx_power_dBm) for k in sorted(sets)]
    report = {
        "format_version": 1,
        "band": campaign.band.to_dict(),
        "site": campaign.site,
        "provenance": {"thresholds": params.export_all()["thresholds"], "rules": PROVENANCE},
        "locations": [s.to_dict() for s in stats],
        "ci_fits": ci_fits(stats, campaign.band.carrier_GHz),
    }
    ens = {}
    for env in sorted({s.environment for s in stats}):
        members = [s for s in stats if s.environment == env and s.polarization == "VV" and not math.isnan(s.omni_rms_ds_ns)]
        block = {}
        for key in ENSEMBLE_FIELDS:
            values = [getattr(m, key) for m in members]
            if any(math.isfinite(v) for v in values):
                summary = summarize(values)
                block[key] = {k: summary[k] for k in ("count", "mean", "sd")}
        if block:
            ens[env] = block
    report["ensemble"] = ens
    return _clean(report)


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"
