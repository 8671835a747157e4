"""Command-line workflows.

Exit codes: 0 success, 2 usage, 3 invalid input, 4 computation failure.
Outputs go to ``--output`` when given, else to ``$MIDBAND_OUTPUT_DIR/<default
name>`` when that variable is set, else to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import params
from .campaign import CampaignFile, CampaignFormatError, atomic_write_text, dumps_campaign, load_campaign, loads_campaign
from .changen import DropConfig, drop_records, ensemble_stats, generate_drops, plan_sweeps
from .core import get_band, linear_to_db
from .measproc import build_pas, group_records, synthesize_omni_pdp
from .pathloss import PathLossSample, ci_fit
from .report import build_report, dumps_report
from .simulate import Scenario, simulate_sounder

OUTPUT_DIR_ENV = "MIDBAND_OUTPUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_COMPUTE = 0, 2, 3, 4


class InputError(ValueError):
    """Bad user input, reported with exit code 3."""


def _emit(text: str, output: str | None, default_name: str) -> None:
    if output is None and os.environ.get(OUTPUT_DIR_ENV):
        output = str(Path(os.environ[OUTPUT_DIR_ENV]) / default_name)
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(output, text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _load(path: str) -> CampaignFile:
    try:
        return load_campaign(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _band(key):
    try:
        return get_band(key)
    except (KeyError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return "" if x == float("-inf") else repr(round(float(x), 9))


# -- subcommands ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    samples = []
    try:
        with open(args.input, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                samples.append(PathLossSample(float(row["distance_m"]), float(row["path_loss_dB"]), args.env, args.agg))
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad path-loss sample in {args.input}: {exc}") from None
    fit = ci_fit(samples, args.freq)
    _emit(_json(fit.to_dict() | {"samples": len(samples)}), args.output, "ci_fit.json")
    return EXIT_OK


def cmd_stats(args) -> int:
    campaign = _load(args.campaign)
    report = build_report(campaign)
    _emit(dumps_report(report), args.output, "stats.json")
    if args.pas_csv:
        sets = group_records(campaign.records, campaign.band)
        rows = []
        for (loc, pol), cs in sorted(sets.items()):
            for side in ("AOA", "AOD"):
                try:
                    pas = build_pas(cs, side)
                except ValueError:
                    continue
                for az, p in zip(pas.azimuths_deg, pas.powers_mW):
                    rows.append([loc, pol, side, repr(float(az)), _fmt(linear_to_db(p))])
        atomic_write_text(args.pas_csv, _csv(rows, ["location_id", "polarization", "side", "azimuth_deg", "power_dBm"]))
    return EXIT_OK


def cmd_synth_omni(args) -> int:
    campaign = _load(args.campaign)
    sets = group_records(campaign.records, campaign.band)
    key = (args.location, args.pol)
    if key not in sets:
        raise InputError(f"no {args.pol} records for location {args.location!r}")
    pdp = synthesize_omni_pdp(sets[key], threshold=not args.raw)
    rows = [[repr(float(d)), _fmt(linear_to_db(p))] for d, p in zip(pdp.delays_ns, pdp.powers_mW)]
    _emit(_csv(rows, ["delay_ns", "power_dBm"]), args.output, f"omni_{args.location}_{args.pol}.csv")
    return EXIT_OK


def cmd_sweep_plan(args) -> int:
    plan = plan_sweeps(_band(args.band))
    _emit(_json(plan.to_dict()), args.output, "sweep_plan.json")
    return EXIT_OK


def cmd_simulate_sounder(args) -> int:
    cfg = _read_json(args.scenario)
    try:
        scn = Scenario.from_dict(cfg)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad scenario: {exc}") from None
    if args.seed is not None:
        scn.seed = args.seed
    _emit(dumps_campaign(simulate_sounder(scn)), args.output, "campaign.jsonl")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        cfg = DropConfig(_band(args.band), args.env, args.distance, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.n < 1:
        raise InputError("--n must be at least 1")
    drops = generate_drops(cfg, args.n)
    width = len(str(args.n))
    records = [r for i, d in enumerate(drops) for r in drop_records(d, f"D{i:0{width}d}")]
    campaign = CampaignFile(cfg.band, records, site="synthetic", tx_power_dBm=cfg.conducted_power_dBm,
                            calibration={"generator": cfg.to_dict(), "drops": args.n})
    text = dumps_campaign(campaign)
    if args.output:
        atomic_write_text(args.output, text)
    summary = {k: {kk: v[kk] for kk in ("count", "mean", "sd")} for k, v in ensemble_stats(drops).items()}
    summary["target"] = {"omni_rms_ds_ns": drops[0].target_rms_ds_ns, "omni_as_deg": drops[0].target_omni_as_deg}
    summary["config"] = cfg.to_dict() | {"n": args.n}
    _emit(_json(summary), args.summary, "ensemble.json")
    if args.stats:
        atomic_write_text(args.stats, dumps_report(build_report(loads_campaign(text))))
    return EXIT_OK


def cmd_export_params(args) -> int:
    picked = [args.freq is not None, args.env is not None, args.agg is not None]
    if any(picked):
        if not all(picked):
            raise InputError("--freq, --env and --agg must be given together")
        try:
            f = params.lookup_freq(args.freq, params.all_freqs())
        except KeyError as exc:
            raise InputError(exc.args[0]) from None
        key = (f, args.env, args.agg)
        if key not in params.CI_TABLE:
            raise InputError(f"no path-loss parameters for {key}")
        n, sigma = params.CI_TABLE[key]
        out = {"n": n, "sigma_dB": sigma}
    else:
        out = params.export_all()
    _emit(_json(out), args.output, "params.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="midband", description="Indoor mid-band channel measurement toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fit", help="fit CI path-loss parameters to samples")
    s.add_argument("input", help="CSV with distance_m,path_loss_dB columns")
    s.add_argument("--freq", type=float, required=True, help="carrier frequency in GHz")
    s.add_argument("--env", default="LOS", choices=("LOS", "NLOS", "NLOS_Best"))
    s.add_argument("--agg", default="omni", choices=("omni", "directional"))
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("stats", help="channel statistics report for a campaign file")
    s.add_argument("campaign")
    s.add_argument("-o", "--output")
    s.add_argument("--pas-csv", help="also write every PAS as CSV")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("synth-omni", help="omnidirectional PDP of one location as CSV")
    s.add_argument("campaign")
    s.add_argument("--location", required=True)
    s.add_argument("--pol", default="VV", choices=("VV", "VH"))
    s.add_argument("--raw", action="store_true", help="skip per-direction thresholding")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_synth_omni)

    s = sub.add_parser("sweep-plan", help="RX sweep schedule for one band")
    s.add_argument("--band", required=True, help="FR1C, FR3 or a carrier in GHz")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sweep_plan)

    s = sub.add_parser("simulate-sounder", help="simulate a measured campaign from a scenario JSON")
    s.add_argument("scenario")
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate_sounder)

    s = sub.add_parser("generate", help="generate synthetic drops")
    s.add_argument("--band", required=True)
    s.add_argument("--env", required=True, choices=("LOS", "NLOS"))
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--distance", type=float, help="T-R distance in m (default: uniform over the measured range)")
    s.add_argument("-o", "--output", help="campaign file for the drops")
    s.add_argument("--summary", help="ensemble summary JSON (default stdout)")
    s.add_argument("--stats", help="also write the stats report of the generated campaign")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("export-params", help="embedded measurement constants as JSON")
    s.add_argument("--freq", type=float)
    s.add_argument("--env", choices=("LOS", "NLOS", "NLOS_Best"))
    s.add_argument("--agg", choices=("omni", "directional"))
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_export_params)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)  # exits 2 on usage errors
    try:
        return args.func(args)
    except (InputError, CampaignFormatError) as exc:
        print(f"midband: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, ArithmeticError) as exc:
        print(f"midband: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
