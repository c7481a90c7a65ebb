"""Command-line entry points: baseline, simulate, campaign, table1.

Exit codes
----------
0 success; 2 usage error; 3 config file missing; 4 config unparseable;
5 config invalid; 6 numerical instability; 7 output I/O failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import io as sio
from .campaign import Baseline, CampaignContext, compute_baseline, run_campaign, run_table1_suite
from .config import ScenarioConfig, load_config
from .errors import ConfigError, ConfigParseError, NumericalInstabilityError, SequencingError
from .simulation import SimulationSettings, run_batch
from .thermal import KELVIN

EXIT_OK = 0
EXIT_CONFIG_MISSING = 3
EXIT_CONFIG_PARSE = 4
EXIT_CONFIG_INVALID = 5
EXIT_NUMERICAL = 6
EXIT_IO = 7


def _parse_k_range(text):
    a, sep, b = text.partition("..")
    try:
        lo = int(a)
        hi = int(b) if sep else lo
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    return [lo, hi]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario YAML file (defaults used if omitted)")
    common.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="master seed (overrides campaign.master_seed)")
    common.add_argument("--workers", type=int, help="worker processes (overrides campaign.workers)")
    common.add_argument("--dt", type=float, help="plant step in seconds")
    common.add_argument("--horizon", type=float, help="simulated horizon in hours")
    common.add_argument("--no-outer-loop", action="store_true", help="inner relay loops only")
    common.add_argument("--quiet", action="store_true", help="do not echo the resolved config")

    parser = argparse.ArgumentParser(prog="shellclear", description="Turbine shell clearance-control simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("baseline", parents=[common], help="uncontrolled cooldown and normalization constant")
    sub.add_parser("simulate", parents=[common], help="controlled cooldown trajectory")
    p = sub.add_parser("campaign", parents=[common], help="failed-heater combinations with variability")
    p.add_argument("--k-range", type=_parse_k_range, help="failure counts, e.g. 1..4")
    p = sub.add_parser("table1", parents=[common], help="fault-case summary table")
    p.add_argument("--five-limit", type=int, help="only the first N five-failure combinations")
    return parser


def resolve_config(args):
    cfg = load_config(args.config)
    data = cfg.to_dict()
    if args.out is not None:
        data["output"]["dir"] = str(args.out)
    if args.seed is not None:
        data["campaign"]["master_seed"] = args.seed
    if args.workers is not None:
        data["campaign"]["workers"] = args.workers
    if args.dt is not None:
        key = "campaign" if args.command in ("campaign", "table1") else "simulation"
        data[key]["coarse_dt" if key == "campaign" else "dt"] = args.dt
    if args.horizon is not None:
        data["simulation"]["horizon_h"] = args.horizon
    if args.no_outer_loop:
        data["controller"]["outer_loop"] = False
    if getattr(args, "k_range", None) is not None:
        data["campaign"]["k_range"] = args.k_range
    if getattr(args, "five_limit", None) is not None:
        data["campaign"]["five_failed_limit"] = args.five_limit
    return ScenarioConfig.from_dict(data)


def run_settings(cfg, command):
    """Simulation settings for a command; campaigns use the coarse step."""
    s = cfg.settings()
    if command in ("campaign", "table1"):
        dt = float(cfg.campaign["coarse_dt"])
        return SimulationSettings(dt=dt, controller_period=max(s.controller_period, dt), horizon_h=s.horizon_h,
                                  baseline_horizon_h=s.baseline_horizon_h, profile=s.profile)
    return s


def _baseline_key(cfg, settings):
    blob = json.dumps(
        {"plant": cfg.plant, "simulation": cfg.simulation, "hold": cfg.controller["hold_min_c"],
         "dt": settings.dt, "period": settings.period},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _baseline_path(out, settings):
    return out / f"baseline_dt{settings.dt:g}.json"


def obtain_baseline(cfg, settings, out, log):
    """Reuse a matching baseline artifact from ``out`` or compute one inline."""
    path = _baseline_path(out, settings)
    key = _baseline_key(cfg, settings)
    if path.exists():
        data = json.loads(path.read_text())
        if data.get("key") == key:
            log(f"using baseline {path}")
            return Baseline(data["norm_m"], data["peak_time_h"], data["peak_to_peak_m"],
                            np.array(data["natural_profile_k"]), data["hold_time_h"])
    log("computing uncontrolled baseline")
    base, _ = compute_baseline(cfg.plant_params(), settings, cfg.controller_config().hold_min)
    _write_baseline(path, base, key)
    return base


def _write_baseline(path, base, key):
    sio.write_json(path, {
        "key": key,
        "norm_m": base.norm,
        "peak_time_h": base.peak_time_h,
        "peak_to_peak_m": base.peak_to_peak,
        "peak_to_peak_pct": base.peak_to_peak_pct,
        "natural_profile_k": [float(v) for v in base.natural_profile],
        "hold_time_h": base.hold_time_h,
    })


def controller_for(cfg, base):
    ctrl = cfg.controller_config()
    changes = {}
    if cfg.auto_norm:
        changes["deflection_norm"] = base.norm
    if cfg.auto_profile:
        changes["natural_profile"] = base.natural_profile
    return ctrl.replace(**changes) if changes else ctrl


def _emit_trajectory(cfg, result, norm, out, stem, log):
    if cfg.output["trajectory"]:
        path = sio.write_trajectory(out / f"{stem}.csv", result, norm)
        log(f"wrote {path}")
        if cfg.output["plot_data"]:
            log(f"wrote {sio.write_plot_data(path, out / f'{stem}_plot.csv')}")
        if cfg.output["svg"]:
            log(f"wrote {sio.render_svg(path, out / f'{stem}.svg', title=stem)}")


def cmd_baseline(cfg, out, log):
    settings = run_settings(cfg, "baseline")
    params = cfg.plant_params()
    base, res = compute_baseline(params, settings, cfg.controller_config().hold_min)
    _write_baseline(_baseline_path(out, settings), base, _baseline_key(cfg, settings))
    _emit_trajectory(cfg, res, base.norm, out, "baseline", log)
    log(f"baseline peak |y_mid| = {base.norm * 1e3:.4f} mm at {base.peak_time_h:.1f} h; "
        f"peak-to-peak = {base.peak_to_peak_pct:.1f} %")
    return EXIT_OK


def cmd_simulate(cfg, out, log):
    settings = run_settings(cfg, "simulate")
    base = obtain_baseline(cfg, settings, out, log)
    params = cfg.plant_params()
    ctrl = controller_for(cfg, base) if cfg.controller["heaters_enabled"] else None
    res = run_batch([params], settings, ctrl, record=True)
    stem = "controlled" if ctrl is not None else "heaters_off"
    _emit_trajectory(cfg, res, base.norm, out, stem, log)
    p2p = 100.0 * res.peak_to_peak[0] / base.norm
    sio.write_json(out / f"{stem}_summary.json", {"peak_to_peak_pct": p2p, "baseline_norm_m": base.norm,
                                                  "zone_min_c": float(res.zone_min[0] - KELVIN),
                                                  "zone_max_c": float(res.zone_max[0] - KELVIN)})
    log(f"peak-to-peak midspan deflection = {p2p:.1f} % of baseline")
    return EXIT_OK


def _context(cfg, command, out, log, variability):
    settings = run_settings(cfg, command)
    base = obtain_baseline(cfg, settings, out, log)
    c = cfg.campaign
    return CampaignContext(cfg.plant_params(), settings, controller_for(cfg, base), base,
                           master_seed=int(c["master_seed"]), variability=variability, draws=int(c["draws"]))


def cmd_campaign(cfg, out, log):
    c = cfg.campaign
    ctx = _context(cfg, "campaign", out, log, bool(c["variability"]))
    lo, hi = c["k_range"]
    ks = [k for k in range(lo, hi + 1)]
    log(f"campaign over k = {ks} with {c['workers']} worker(s)")
    result = run_campaign(ctx, ks, workers=int(c["workers"]), chunk_size=int(c["chunk_size"]), progress=True)
    sio.write_campaign(out / "campaign.csv", result)
    sio.write_densities(out / "density.csv", out / "histogram.csv", result)
    base_p2p = result.baseline.peak_to_peak_pct
    for name, g in result.groups.items():
        frac = float(np.mean(result.values(name) <= 0.2 * base_p2p))
        log(f"{name}: n={g.count} worst={g.worst:.1f}% mean={g.mean:.1f}% q95={g.q95:.1f}% "
            f"reduction>=80%: {100 * frac:.1f}% of runs")
    return EXIT_OK


def cmd_table1(cfg, out, log):
    c = cfg.campaign
    ctx = _context(cfg, "table1", out, log, bool(c["table1_variability"]))
    report = run_table1_suite(ctx, workers=int(c["workers"]), five_failed_limit=c["five_failed_limit"],
                              airgap_zones=tuple(c["airgap_zones"]), chunk_size=int(c["chunk_size"]),
                              progress=True)
    sio.write_table1(out / "table1.csv", report, ctx.baseline.norm)
    text = report.format()
    checks = report.ordering_checks()
    text += "\n\n" + "\n".join(f"{'PASS' if ok else 'FAIL'}  {name}" for name, ok in checks.items())
    (out / "table1.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


COMMANDS = {"baseline": cmd_baseline, "simulate": cmd_simulate, "campaign": cmd_campaign, "table1": cmd_table1}


def main(argv=None):
    args = build_parser().parse_args(argv)

    def log(msg):
        print(msg, file=sys.stderr, flush=True)

    try:
        cfg = resolve_config(args)
    except FileNotFoundError as exc:
        log(f"config error: {exc}")
        return EXIT_CONFIG_MISSING
    except ConfigParseError as exc:
        log(f"config error: {exc}")
        return EXIT_CONFIG_PARSE
    except ConfigError as exc:
        log(f"config error: {exc}")
        return EXIT_CONFIG_INVALID
    except OSError as exc:
        log(f"config error: {exc}")
        return EXIT_CONFIG_MISSING

    out = Path(cfg.output["dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved_config.yaml").write_text(cfg.dump(), encoding="utf-8")
    except OSError as exc:
        log(f"I/O error: {exc}")
        return EXIT_IO
    if not args.quiet:
        log("# resolved configuration")
        log(yaml.safe_dump(cfg.to_dict(), sort_keys=False).rstrip())
    log(f"# seed {cfg.campaign['master_seed']}")
    try:
        return COMMANDS[args.command](cfg, out, log)
    except NumericalInstabilityError as exc:
        log(f"numerical error: {exc}")
        return EXIT_NUMERICAL
    except SequencingError as exc:
        log(f"error: {exc}")
        return EXIT_NUMERICAL
    except OSError as exc:
        log(f"I/O error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
