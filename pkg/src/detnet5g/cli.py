"""Command-line front end: trees, admit, run, report.

Exit codes are part of the contract: 0 all checks pass, 1 usage or parse
error, 2 admission rejected a flow marked critical, 3 a simulated packet
violated a computed bound.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .admission import NetworkState
from .errors import AdmissionMissing, DetnetError, MalformedRequest, ScenarioInvalid
from .scenario import load_scenario_file, load_topology_file
from .sim import (
    TRACE_COLUMNS,
    compare_dejitter,
    dejitter_summary,
    run,
    write_report,
    write_trace,
)
from .topology import enumerate_spanning_trees
from .units import ceil_div

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REJECTED = 2
EXIT_VIOLATION = 3


def _out_dir(arg: str | None) -> Path:
    path = Path(arg or os.environ.get("DETNET5G_OUT", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_trees(args) -> int:
    topo = load_topology_file(args.topology)
    trees, truncated = enumerate_spanning_trees(topo, cap=args.cap)
    if args.json:
        doc = {
            "schema_version": 1,
            "truncated": truncated,
            "trees": [
                {"vlan_id": t.vlan_id, "tree_index": t.tree_index,
                 "edges": [[str(a), str(b)] for a, b in t.edges]}
                for t in trees
            ],
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for t in trees:
            edges = " ".join(f"{a}-{b}" for a, b in t.edges)
            print(f"vlan {t.vlan_id} tree {t.tree_index}: {edges}")
        print(f"{len(trees)} spanning tree(s)" + (" [truncated]" if truncated else ""))
    return EXIT_OK


def cmd_admit(args) -> int:
    topo = load_topology_file(args.topology)
    doc = json.loads(Path(args.flows).read_text())
    if not isinstance(doc, dict) or not isinstance(doc.get("flows"), list):
        raise ScenarioInvalid(f"{args.flows}: expected an object with a 'flows' list")
    state = NetworkState(topo)
    responses = []
    critical_rejected = False
    for item in doc["flows"]:
        if not isinstance(item, dict):
            raise MalformedRequest("flow entries must be objects")
        critical = bool(item.get("critical", False))
        request = {k: v for k, v in item.items() if k != "critical"}
        if not args.json:
            print(f"request {request.get('flow_id')}: "
                  f"{request.get('src')} -> {request.get('dst')} "
                  f"rate={request.get('rate_Bps')}B/s burst={request.get('burst_B')}B "
                  f"deadline={request.get('deadline_us')}us")
        response = state.handle_flow_request(request)
        response["critical"] = critical
        responses.append(response)
        if response["accepted"]:
            if not args.json:
                extra = ""
                if response["reconfigured"]:
                    extra = f" reconfigured={','.join(response['reconfigured'])}"
                print(f"  ACCEPTED vlan={response['vlan_id']} pcp={response['pcp']} "
                      f"e2e_bound_us={response['e2e_bound_us']}{extra}")
        else:
            critical_rejected = critical_rejected or critical
            if not args.json:
                detail = response.get("detail", "")
                print(f"  REJECTED {response['reason']}: {detail}")
    if args.json:
        print(json.dumps({"schema_version": 1, "decisions": responses},
                         indent=2, sort_keys=True))
    return EXIT_REJECTED if critical_rejected else EXIT_OK


def _write_run(result, out: Path, scenario_name: str) -> tuple[Path, Path]:
    stem = f"{scenario_name}_{result.dejitter_mode}_seed{result.seed}"
    trace_path = out / f"{stem}_trace.csv"
    report_path = out / f"{stem}_report.json"
    write_trace(trace_path, result.trace_rows)
    write_report(report_path, result.report)
    return trace_path, report_path


def cmd_run(args) -> int:
    scenario = load_scenario_file(args.scenario)
    out = _out_dir(args.out)
    results = []
    if args.dejitter == "both":
        off, on = compare_dejitter(scenario, seed=args.seed)
        results = [off, on]
        summary = dejitter_summary(off, on)
        seed = off.seed
        summary_path = out / f"{scenario.name}_seed{seed}_dejitter_summary.json"
        write_report(summary_path, summary)
        print(f"wrote {summary_path}")
    else:
        results = [run(scenario, seed=args.seed, dejitter=args.dejitter)]

    violation_total = 0
    for result in results:
        trace_path, report_path = _write_run(result, out, scenario.name)
        violations = result.report["violations"]["total"]
        violation_total += violations
        print(f"wrote {trace_path}")
        print(f"wrote {report_path}")
        for fid, flow in sorted(result.report["flows"].items()):
            lat = flow["latency_us"]
            shown = f"max={lat['max']}us jitter={flow['jitter_us']}us" if lat else "no packets received"
            bound = flow["e2e_bound_us"]
            bound_txt = f" bound={bound}us" if bound is not None else ""
            print(f"  [{result.dejitter_mode}] {fid}: sent={flow['sent']} "
                  f"received={flow['received']} dropped={flow['dropped']} "
                  f"{shown}{bound_txt} violations={flow['bound_violations']}")
        print(f"  [{result.dejitter_mode}] total bound violations: {violations}")
    return EXIT_VIOLATION if violation_total else EXIT_OK


def cmd_report(args) -> int:
    flows: dict[str, dict] = {}
    with open(args.trace, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(TRACE_COLUMNS):
            raise ScenarioInvalid(f"{args.trace}: unexpected columns {reader.fieldnames}")
        for row in reader:
            stats = flows.setdefault(row["flow_id"], {"sent": 0, "dropped": 0, "lat": []})
            stats["sent"] += 1
            if row["dropped"] == "1":
                stats["dropped"] += 1
            elif row["latency_us"]:
                stats["lat"].append(float(row["latency_us"]))
    doc = {"schema_version": 1, "flows": {}}
    for fid, stats in sorted(flows.items()):
        lats = sorted(stats["lat"])
        entry = {
            "sent": stats["sent"],
            "received": len(lats),
            "dropped": stats["dropped"],
            "latency_us": None,
            "jitter_us": None,
        }
        if lats:
            entry["latency_us"] = {
                "min": lats[0],
                "mean": round(sum(lats) / len(lats), 3),
                "max": lats[-1],
                "p99": lats[ceil_div(99 * len(lats), 100) - 1],
            }
            entry["jitter_us"] = round(lats[-1] - lats[0], 3)
        doc["flows"][fid] = entry
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detnet5g",
        description="Latency-guaranteed flow admission over a 5G-attached fabric",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_trees = sub.add_parser("trees", help="list the VLAN spanning trees of a topology")
    p_trees.add_argument("topology", help="topology JSON file")
    p_trees.add_argument("--cap", type=int, default=64, help="max trees to enumerate")
    p_trees.add_argument("--json", action="store_true", help="machine-readable output")
    p_trees.set_defaults(func=cmd_trees)

    p_admit = sub.add_parser("admit", help="run the admission pipeline on a flow list")
    p_admit.add_argument("topology", help="topology JSON file")
    p_admit.add_argument("flows", help="flow request JSON file")
    p_admit.add_argument("--json", action="store_true", help="machine-readable output")
    p_admit.set_defaults(func=cmd_admit)

    p_run = sub.add_parser("run", help="admit and simulate a scenario")
    p_run.add_argument("scenario", help="scenario JSON file")
    p_run.add_argument("--out", default=None,
                       help="output directory (default: $DETNET5G_OUT or '.')")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_run.add_argument("--dejitter", choices=["scenario", "on", "off", "both"],
                       default="scenario", help="regulator mode for 5G flows")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="re-summarize an existing trace CSV")
    p_report.add_argument("trace", help="trace CSV file")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AdmissionMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except (ScenarioInvalid, MalformedRequest, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DetnetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
