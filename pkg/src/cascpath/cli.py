"""Command-line front end.

Subcommands:
  run        search cascading paths over generated or replayed scenarios
  scenarios  generate and export a scenario file
  compare    tabulate timing records of runs on one identical workload
  case       export a built-in case to a JSON case file

Every `run` flag can also be supplied through a JSON config file
(--config); explicit flags win over the config file, which wins over the
defaults.  The output directory falls back to the CASCPATH_OUT environment
variable, then to ./cascpath_out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import report as report_mod
from .casedata import CaseData, CaseError, load_case
from .rts79 import rts79_case, rts79_hourly_profile, rts79_wind_case, rts79_wind_config
from .scenarios import ScenarioError, export_scenarios, generate_scenarios, import_scenarios
from .search import SearchConfig, run_study

RUN_DEFAULTS = {
    "case": "rts79-wind",
    "hours": 24,
    "scenario_file": None,
    "epsilon": 1e-9,
    "m": 3,
    "depth_limit": 8,
    "seed": 1,
    "workers": 1,
    "lsd": True,
    "woodbury": True,
    "gen_nonnegative": True,
    "sequential_relay": False,
    "out": None,
    "save_scenarios": None,
    "label": None,
}


def _load_builtin_case(name: str) -> CaseData:
    if name == "rts79":
        return rts79_case()
    if name in ("rts79-wind", "rts79_wind"):
        return rts79_wind_case()
    return load_case(name)


def _resolve_out(out) -> Path:
    if out:
        return Path(out)
    env = os.environ.get("CASCPATH_OUT")
    if env:
        return Path(env)
    return Path("cascpath_out")


def _merge_config(ns: argparse.Namespace) -> dict:
    eff = dict(RUN_DEFAULTS)
    if ns.config:
        with open(ns.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(RUN_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        eff.update(file_cfg)
    for key in RUN_DEFAULTS:
        val = getattr(ns, key, None)
        if val is not None:
            eff[key] = val
    return eff


def _make_scenarios(case: CaseData, cfg: dict):
    if cfg["scenario_file"]:
        scenarios = import_scenarios(cfg["scenario_file"])
        if cfg["hours"] not in (None, len(scenarios)):
            scenarios = scenarios[: cfg["hours"]]
        return scenarios
    hours = cfg["hours"]
    if hours == 0:
        return []
    wind_cfg = rts79_wind_config() if case.wind_generators() else None
    profile = rts79_hourly_profile(max(hours, 1))
    return generate_scenarios(case, wind_cfg, profile, hours, cfg["seed"])


def cmd_run(ns: argparse.Namespace) -> int:
    cfg = _merge_config(ns)
    case = _load_builtin_case(cfg["case"])
    scenarios = _make_scenarios(case, cfg)
    search_cfg = SearchConfig(
        epsilon=cfg["epsilon"],
        m=cfg["m"],
        depth_limit=cfg["depth_limit"],
        workers=cfg["workers"],
        lsd_enabled=cfg["lsd"],
        woodbury_enabled=cfg["woodbury"],
        gen_nonnegative=cfg["gen_nonnegative"],
        sequential_relay=cfg["sequential_relay"],
    )
    if cfg["save_scenarios"]:
        export_scenarios(scenarios, cfg["save_scenarios"])
    rep = run_study(case, scenarios, search_cfg)
    outdir = _resolve_out(cfg["out"])
    label = cfg["label"] or (
        f"{case.name}-lsd{int(cfg['lsd'])}-wb{int(cfg['woodbury'])}"
    )
    files = report_mod.write_report(rep, outdir, label=label)
    print(f"{len(rep.paths)} paths across {len(scenarios)} scenarios")
    for phase in ("sampling", "dcpf", "dcopf", "total"):
        print(f"  {phase:<9s} {rep.timing[phase]:8.2f} s")
    for f in files:
        print(f"wrote {f}")
    if rep.errors:
        print(f"{len(rep.errors)} scenario errors (see {report_mod.META_FILE})",
              file=sys.stderr)
    return 0


def cmd_scenarios(ns: argparse.Namespace) -> int:
    case = _load_builtin_case(ns.case)
    wind_cfg = rts79_wind_config() if case.wind_generators() else None
    profile = rts79_hourly_profile(max(ns.hours, 1))
    scenarios = generate_scenarios(case, wind_cfg, profile, ns.hours, ns.seed)
    export_scenarios(scenarios, ns.out)
    print(f"wrote {len(scenarios)} scenarios to {ns.out}")
    return 0


def _parse_reference(spec: str) -> dict:
    label, _, numbers = spec.partition(":")
    vals = [float(v) for v in numbers.split(",")]
    if len(vals) != 4:
        raise ValueError("reference must be LABEL:sampling,dcpf,dcopf,total")
    return {
        "label": label,
        "phases": dict(zip(("sampling", "dcpf", "dcopf", "total"), vals)),
    }


def cmd_compare(ns: argparse.Namespace) -> int:
    records = []
    for f in ns.timings:
        with open(f) as fh:
            records.append(json.load(fh))
    reference = _parse_reference(ns.reference) if ns.reference else None
    table = report_mod.emit_timing_comparison(records, reference=reference)
    print(table, end="")
    if ns.out:
        Path(ns.out).write_text(table)
    return 0


def cmd_case(ns: argparse.Namespace) -> int:
    from .casedata import save_case

    case = _load_builtin_case(ns.name)
    save_case(case, ns.out)
    print(f"wrote case {case.name!r} ({case.n_bus} buses, {case.n_line} lines, "
          f"{case.n_gen} generators) to {ns.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cascpath",
        description="Cascading-failure path search for DC-modeled power networks",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="search cascading paths")
    run.add_argument("--case", help="rts79 | rts79-wind | case file path")
    run.add_argument("--hours", type=int, help="number of hourly scenarios")
    run.add_argument("--scenario-file", dest="scenario_file",
                     help="replay scenarios from an export instead of generating")
    run.add_argument("--epsilon", type=float, help="path probability threshold")
    run.add_argument("--m", type=int, help="paths kept per scenario")
    run.add_argument("--depth-limit", dest="depth_limit", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--lsd", action=argparse.BooleanOptionalAction, default=None,
                     help="line-status dictionary acceleration")
    run.add_argument("--woodbury", action=argparse.BooleanOptionalAction, default=None,
                     help="rank-update acceleration of sensitivity matrices")
    run.add_argument("--gen-nonnegative", dest="gen_nonnegative",
                     action=argparse.BooleanOptionalAction, default=None)
    run.add_argument("--sequential-relay", dest="sequential_relay",
                     action=argparse.BooleanOptionalAction, default=None)
    run.add_argument("--out", help="output directory (or CASCPATH_OUT env var)")
    run.add_argument("--config", help="JSON file mirroring the run flags")
    run.add_argument("--save-scenarios", dest="save_scenarios",
                     help="also export the scenarios used")
    run.add_argument("--label", help="label stored in the timing record")
    run.set_defaults(func=cmd_run)

    scen = sub.add_parser("scenarios", help="generate and export scenarios")
    scen.add_argument("--case", default="rts79-wind")
    scen.add_argument("--hours", type=int, default=8760)
    scen.add_argument("--seed", type=int, default=1)
    scen.add_argument("--out", required=True)
    scen.set_defaults(func=cmd_scenarios)

    cmp_ = sub.add_parser("compare", help="compare timing records")
    cmp_.add_argument("timings", nargs="+", help="timings.json files")
    cmp_.add_argument("--reference",
                      help="annotation row, LABEL:sampling,dcpf,dcopf,total")
    cmp_.add_argument("--out", help="also write the table to this file")
    cmp_.set_defaults(func=cmd_compare)

    case = sub.add_parser("case", help="export a built-in case file")
    case.add_argument("--name", default="rts79")
    case.add_argument("--out", required=True)
    case.set_defaults(func=cmd_case)
    return ap


def run_cli(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        return ns.func(ns)
    except (CaseError, ScenarioError, ValueError, OSError,
            report_mod.WorkloadMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
