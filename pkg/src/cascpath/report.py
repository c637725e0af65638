"""Study artifact emission: path lists, shedding series, path graphs, timing.

All files are plain text with fixed numeric formats (6 decimals for MW,
6 significant digits for probabilities) so that identical studies produce
byte-identical artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path

from .search import CascadePath, StudyReport

PATHS_FILE = "paths.txt"
SHED_FILE = "shedding.txt"
GRAPH_FILE = "pathgraph.dot"
TIMING_FILE = "timings.txt"
TIMING_JSON = "timings.json"
LSD_FILE = "lsd_stats.txt"
META_FILE = "run_meta.json"


def format_events(path: CascadePath) -> str:
    """One-token-per-step grammar: FAIL@PROB[;R:La+Lb][;S=shed]|..."""
    steps = []
    current = None
    for ev in path.events:
        if ev.kind in ("gen-failure", "line-failure"):
            if current is not None:
                steps.append(current)
            current = f"{ev.elements[0]}@{ev.probability:.6e}"
        elif ev.kind == "relay-trip":
            current += ";R:" + "+".join(ev.elements)
        elif ev.kind == "redispatch":
            current += f";S={ev.shed_mw:.6f}"
    if current is not None:
        steps.append(current)
    return "|".join(steps)


def write_paths(report: StudyReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("# scenario probability shed_mw terminal events\n")
        for p in report.paths:
            fh.write(
                f"{p.scenario_index} {p.probability:.6e} {p.shed_mw:.6f} "
                f"{p.terminal} {format_events(p)}\n"
            )


def parse_paths(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for raw in fh:
            if raw.startswith("#") or not raw.strip():
                continue
            scen, prob, shed, terminal, events = raw.split(None, 4)
            out.append({
                "scenario": int(scen),
                "probability": float(prob),
                "shed_mw": float(shed),
                "terminal": terminal,
                "events": events.strip(),
            })
    return out


def write_shedding(report: StudyReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("# hour total_load_mw max_shed_mw\n")
        for hour, load, shed in report.hourly:
            fh.write(f"{hour} {load:.6f} {shed:.6f}\n")


def write_graph(report: StudyReport, path) -> None:
    """Graphviz dot rendering of the element-failure transition graph."""
    with open(path, "w") as fh:
        fh.write("digraph cascade {\n")
        fh.write("  rankdir=LR;\n")
        for label in sorted(report.graph_nodes):
            count = report.graph_nodes[label]
            fh.write(f'  "{label}" [count={count}];\n')
        for (a, b) in sorted(report.graph_edges):
            count, shed = report.graph_edges[(a, b)]
            fh.write(f'  "{a}" -> "{b}" [count={count}, max_shed="{shed:.6f}"];\n')
        fh.write("}\n")


def write_timing(report: StudyReport, path, label: str = "run") -> None:
    t = report.timing
    with open(path, "w") as fh:
        fh.write(f"# timing breakdown ({label}), seconds\n")
        for phase in ("sampling", "dcpf", "dcopf", "total"):
            fh.write(f"{phase} {t[phase]:.3f}\n")


def write_lsd_stats(report: StudyReport, path) -> None:
    with open(path, "w") as fh:
        if not report.lsd_stats:
            fh.write("# dictionary disabled for this run\n")
            return
        fh.write("# line-status dictionary statistics\n")
        for key in sorted(report.lsd_stats):
            fh.write(f"{key} {report.lsd_stats[key]}\n")


def timing_record(report: StudyReport, label: str) -> dict:
    return {
        "label": label,
        "phases": dict(report.timing),
        "workload": dict(report.workload),
        "lsd": dict(report.lsd_stats),
    }


def write_report(report: StudyReport, outdir, label: str = "run") -> list[str]:
    """Emit every artifact into `outdir`; returns the files written."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_paths(report, outdir / PATHS_FILE)
    write_shedding(report, outdir / SHED_FILE)
    write_graph(report, outdir / GRAPH_FILE)
    write_timing(report, outdir / TIMING_FILE, label)
    with open(outdir / TIMING_JSON, "w") as fh:
        json.dump(timing_record(report, label), fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_lsd_stats(report, outdir / LSD_FILE)
    meta = {
        "label": label,
        "workload": dict(report.workload),
        "errors": list(report.errors),
    }
    with open(outdir / META_FILE, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return [
        str(outdir / f)
        for f in (PATHS_FILE, SHED_FILE, GRAPH_FILE, TIMING_FILE, TIMING_JSON,
                  LSD_FILE, META_FILE)
    ]


class WorkloadMismatchError(Exception):
    pass


def emit_timing_comparison(records: list[dict], reference: dict | None = None) -> str:
    """Tabulate phase timings of runs over one identical workload.

    The first record is the comparison base; speedups are base/total.  An
    optional `reference` row ({"label", "phases"}) is annotated verbatim,
    e.g. published measurements from other hardware.
    """
    if len(records) < 2:
        raise WorkloadMismatchError("need at least two timing records to compare")
    base_work = records[0]["workload"]
    for rec in records[1:]:
        if rec["workload"] != base_work:
            raise WorkloadMismatchError(
                f"workload of {rec['label']!r} differs from {records[0]['label']!r}; "
                "refusing to compare"
            )
    phases = ("sampling", "dcpf", "dcopf", "total")
    rows = []
    header = ["case"] + list(phases) + ["speedup"]
    base_total = records[0]["phases"]["total"]
    for rec in records:
        t = rec["phases"]
        rows.append(
            [rec["label"]]
            + [f"{t[p]:.2f}" for p in phases]
            + [f"{base_total / t['total']:.2f}x" if t["total"] > 0 else "-"]
        )
    if reference is not None:
        t = reference["phases"]
        rows.append(
            [f"{reference['label']} (reference)"]
            + [f"{t[p]:.2f}" for p in phases]
            + ["-"]
        )
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines) + "\n"
