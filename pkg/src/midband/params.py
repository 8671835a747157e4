"""Embedded measurement constants for the 6.75 / 16.95 GHz indoor hotspot campaign.

Reference campaigns at 28, 73 and 142 GHz are carried for comparison only.
"""

# CI path-loss parameters (n, sigma_dB) keyed by (carrier_GHz, environment, aggregation).
CI_TABLE = {
    (6.75, "LOS", "directional"): (1.55, 2.52),
    (6.75, "NLOS_Best", "directional"): (2.74, 7.14),
    (6.75, "NLOS", "directional"): (3.05, 9.71),
    (6.75, "LOS", "omni"): (1.40, 3.41),
    (6.75, "NLOS", "omni"): (2.42, 7.87),
    (16.95, "LOS", "directional"): (1.45, 1.87),
    (16.95, "NLOS_Best", "directional"): (3.52, 9.28),
    (16.95, "NLOS", "directional"): (3.93, 14.90),
    (16.95, "LOS", "omni"): (1.32, 2.66),
    (16.95, "NLOS", "omni"): (3.07, 9.03),
    (28.0, "LOS", "directional"): (1.70, 2.90),
    (28.0, "NLOS_Best", "directional"): (3.30, 10.80),
    (28.0, "NLOS", "directional"): (4.4, 12.10),
    (28.0, "LOS", "omni"): (1.2, 1.80),
    (28.0, "NLOS", "omni"): (2.7, 9.70),
    (73.0, "LOS", "directional"): (1.63, 3.06),
    (73.0, "NLOS_Best", "directional"): (3.30, 8.76),
    (73.0, "NLOS", "directional"): (5.51, 8.94),
    (73.0, "LOS", "omni"): (1.36, 2.30),
    (73.0, "NLOS", "omni"): (2.81, 8.71),
    (142.0, "LOS", "directional"): (2.05, 2.89),
    (142.0, "NLOS_Best", "directional"): (3.21, 6.03),
    (142.0, "NLOS", "directional"): (4.60, 13.80),
    (142.0, "LOS", "omni"): (1.74, 3.62),
    (142.0, "NLOS", "omni"): (2.83, 6.07),
}

# Mean RMS delay spread (ns) keyed by (carrier_GHz, aggregation, environment).
RMS_DS_TABLE = {
    (6.75, "directional", "LOS"): 19.3,
    (6.75, "directional", "NLOS"): 21.7,
    (6.75, "omni", "LOS"): 33.7,
    (6.75, "omni", "NLOS"): 43.5,
    (16.95, "directional", "LOS"): 19.5,
    (16.95, "directional", "NLOS"): 14.9,
    (16.95, "omni", "LOS"): 22.1,
    (16.95, "omni", "NLOS"): 40.7,
    (28.0, "directional", "LOS"): 3.9,
    (28.0, "directional", "NLOS"): 14.5,
    (28.0, "omni", "LOS"): 10.8,
    (28.0, "omni", "NLOS"): 17.1,
    (73.0, "directional", "LOS"): 3.5,
    (73.0, "directional", "NLOS"): 10.0,
    (73.0, "omni", "LOS"): 6.2,
    (73.0, "omni", "NLOS"): 12.3,
    (142.0, "directional", "LOS"): 2.7,
    (142.0, "directional", "NLOS"): 7.2,
    (142.0, "omni", "LOS"): 3.0,
    (142.0, "omni", "NLOS"): 9.2,
}

# Mean omnidirectional azimuth spread of arrival (deg).
OMNI_ASA_DEG = {
    (6.75, "LOS"): 34.0,
    (6.75, "NLOS"): 58.0,
    (16.95, "LOS"): 18.0,
    (16.95, "NLOS"): 43.0,
}

# Cross-polarization discrimination (dB).
XPD_DB = {6.75: 35.7, 16.95: 38.4}

CAMPAIGN_INFO = {
    6.75: {"distance_m": (11.0, 97.0), "hpbw_deg": 30.0},
    16.95: {"distance_m": (11.0, 97.0), "hpbw_deg": 15.0},
    28.0: {"distance_m": (4.0, 46.0), "hpbw_deg": 30.0},
    73.0: {"distance_m": (4.0, 46.0), "hpbw_deg": 15.0},
    142.0: {"distance_m": (4.0, 39.0), "hpbw_deg": 8.0},
}

MEASURED_FREQS_GHZ = (6.75, 16.95)
REFERENCE_FREQS_GHZ = (28.0, 73.0, 142.0)

TX_HEIGHT_M = 2.4
RX_HEIGHT_M = 1.5
CALIBRATION_DISTANCE_M = 4.0
MEASURED_RANGE_M = (11.0, 97.0)

# Processing thresholds.
PDP_FLOOR_MARGIN_DB = 5.0
PDP_PEAK_WINDOW_DB = 25.0
SPATIAL_LOBE_THRESHOLD_DB = 10.0
AOD_PEAK_WINDOW_DB = 30.0
AOD_FLOOR_MARGIN_DB = 10.0
XPOL_FLOOR_MARGIN_DB = 30.0
PDPS_AVERAGED = 20


def lookup_freq(freq_GHz: float, table_freqs) -> float:
    for f in table_freqs:
        if abs(f - float(freq_GHz)) < 1e-6:
            return f
    raise KeyError(f"no embedded data for {freq_GHz} GHz")


def all_freqs():
    return sorted({k[0] for k in CI_TABLE})


def export_all() -> dict:
    """Every embedded constant as plain JSON-ready structures."""
    return {
        "ci_params": [
            {"freq_GHz": f, "env": env, "aggregation": agg, "n": n, "sigma_dB": s}
            for (f, env, agg), (n, s) in CI_TABLE.items()
        ],
        "rms_ds_ns": [
            {"freq_GHz": f, "aggregation": agg, "env": env, "mean_ns": v}
            for (f, agg, env), v in RMS_DS_TABLE.items()
        ],
        "omni_asa_deg": [{"freq_GHz": f, "env": env, "mean_deg": v} for (f, env), v in OMNI_ASA_DEG.items()],
        "xpd_dB": [{"freq_GHz": f, "xpd_dB": v} for f, v in XPD_DB.items()],
        "thresholds": {
            "pdp_floor_margin_dB": PDP_FLOOR_MARGIN_DB,
            "pdp_peak_window_dB": PDP_PEAK_WINDOW_DB,
            "spatial_lobe_threshold_dB": SPATIAL_LOBE_THRESHOLD_DB,
            "aod_peak_window_dB": AOD_PEAK_WINDOW_DB,
            "aod_floor_margin_dB": AOD_FLOOR_MARGIN_DB,
            "xpol_floor_margin_dB": XPOL_FLOOR_MARGIN_DB,
        },
    }
