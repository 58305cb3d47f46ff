"""Command-line front end: run scenario files, reports, and the bundled suite.

Exit codes: 0 when the run finished with zero invariant violations and zero
routing anomalies, 1 otherwise, 2 for unusable input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

from . import netsim
from .errors import NeverConverged, ScenarioError
from .hashing import ChainId
from .netsim import RunResult, measure_convergence, measure_drain
from .scenario import Scenario, parse_scenario

REPLICATE_SEEDS = (1, 2, 3, 4, 5)
STEADY_INTERVAL = (5.0, 14.0)  # covers the bulk of a static desk-scale run
SCENARIO_ORDER = (
    "static-1",
    "static-2",
    "static-3",
    "warmup-1to2",
    "warmup-2to3",
    "cooldown-2to1",
    "cooldown-3to2",
    "combined-add-add",
    "combined-remove-remove",
)


def bundled_scenario(name: str) -> Scenario:
    """Load one scenario from the corpus shipped inside the package."""
    ref = resources.files("chainbalance") / "scenarios" / f"{name}.yaml"
    with resources.as_file(ref) as path:
        return parse_scenario(path)


def _live_chains_after(commit: dict) -> list[ChainId]:
    return [ChainId(f, r) for f, r, _ in commit["alloc"]]


def build_report(result: RunResult, band: float) -> dict:
    """Aggregate one run into the JSON report structure."""
    series = result.series
    totals = {c: series.total_for(c) for c in series.chains}
    grand = sum(totals.values())
    shares = {
        str(c.forward_tag): (totals[c] / grand if grand else 0.0) for c in series.chains
    }
    steady = {
        str(c.forward_tag): (
            series.total_for(c, *STEADY_INTERVAL)
            / max(1, sum(series.total_for(x, *STEADY_INTERVAL) for x in series.chains))
        )
        for c in series.chains
    }

    rho = result.scenario.session_timeout
    transitions = []
    for commit in result.commits:
        entry = {
            "generation": commit["generation"],
            "committed_at": commit["t"],
            "kind": "remove" if commit["drain"] is not None else "add_or_rebalance",
        }
        if commit["drain"] is not None:
            victim = next(
                c for c in series.chains if c.forward_tag == commit["drain"]
            )
            try:
                entry["drained_after_s"] = measure_drain(series, victim, commit["t"])
            except NeverConverged as exc:
                entry["drained_after_s"] = None
                entry["drain_error"] = str(exc)
            reclaim_t = result.reclaims.get(victim)
            last_packet = result.last_packet_on.get(victim)
            entry["reclaimed_at"] = reclaim_t
            entry["last_packet_at"] = last_packet
            if reclaim_t is not None and last_packet is not None:
                lag = reclaim_t - (last_packet + rho)
                entry["reclaim_lag_s"] = round(lag, 6)
                entry["reclaim_within_timeout"] = (
                    -0.01 <= lag <= result.scenario.poll_interval + 0.01
                )
            live = _live_chains_after(commit)
            entry["survivors"] = [c.forward_tag for c in live]
            if entry["drained_after_s"] is not None:
                start = commit["t"] + entry["drained_after_s"]
                window = {c: series.total_for(c, start, start + 10.0) for c in live}
                total = sum(window.values())
                entry["survivor_shares"] = {
                    str(c.forward_tag): (window[c] / total if total else 0.0)
                    for c in live
                }
        else:
            live = _live_chains_after(commit)
            try:
                entry["converged_after_s"] = measure_convergence(
                    series, live, commit["t"], band
                )
            except NeverConverged as exc:
                entry["converged_after_s"] = None
                entry["convergence_error"] = str(exc)
        transitions.append(entry)

    return {
        "scenario": result.scenario.name,
        "seed": result.scenario.seed,
        "band": band,
        "sessions": len(result.session_starts),
        "bytes": {
            "injected": result.injected_bytes,
            "delivered": result.delivered_bytes,
            "dropped": result.dropped_bytes,
            "leftover": result.leftover_bytes,
        },
        "shares": shares,
        "steady_shares": steady,
        "transitions": transitions,
        "anomaly_count": len(result.anomalies),
        "anomalies": result.anomalies[:20],
        "divergences": result.divergences,
        "reconciled_sessions": result.reconciled_sessions,
        "vectors_equal": result.vectors_equal,
        "clean": result.clean,
        "outputs": {"series": "series.csv", "events": "events.jsonl"},
    }


def write_outputs(result: RunResult, out_dir: Path, band: float) -> dict:
    """Write series.csv, events.jsonl and report.json; returns the report."""
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "series.csv", "w", newline="\n") as fh:
        for row in result.series.csv_rows():
            fh.write(row + "\n")
    with open(out_dir / "events.jsonl", "w", newline="\n") as fh:
        for event in result.events:
            fh.write(json.dumps(event, separators=(",", ":")) + "\n")
    report = build_report(result, band)
    with open(out_dir / "report.json", "w", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def _print_report(report: dict, elapsed: float):
    shares = ", ".join(f"{tag}: {value:.3f}" for tag, value in report["shares"].items())
    print(f"{report['scenario']} seed={report['seed']}: shares {{{shares}}}")
    for tr in report["transitions"]:
        if tr["kind"] == "remove":
            print(
                f"  gen {tr['generation']} remove: drained in {tr.get('drained_after_s')}s, "
                f"reclaimed at {tr.get('reclaimed_at')}"
            )
        else:
            print(f"  gen {tr['generation']}: converged in {tr.get('converged_after_s')}s")
    status = "clean" if report["clean"] else f"{report['anomaly_count']} anomalies"
    print(
        f"  {report['sessions']} sessions, {report['bytes']['injected']} bytes, "
        f"{status}, {elapsed:.1f}s wall time"
    )


def cmd_run(args) -> int:
    try:
        scenario = parse_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    if args.horizon is not None:
        from dataclasses import replace

        scenario = replace(scenario, horizon=args.horizon)
    out_dir = Path(args.out) if args.out else Path("out") / f"{scenario.name}-seed{scenario.seed}"
    started = time.monotonic()
    result = netsim.run(scenario)
    report = write_outputs(result, out_dir, args.band)
    _print_report(report, time.monotonic() - started)
    print(f"  outputs in {out_dir}")
    return 0 if report["clean"] else 1


def _aggregate(name: str, reports: list[dict]) -> dict:
    """Per-scenario roll-up across seeds, checked against the shipped thresholds."""
    n_chains = len(reports[0]["shares"])
    mean_steady = {
        tag: sum(r["steady_shares"][tag] for r in reports) / len(reports)
        for tag in reports[0]["steady_shares"]
    }
    summary = {
        "scenario": name,
        "seeds": [r["seed"] for r in reports],
        "all_clean": all(r["clean"] for r in reports),
        "mean_steady_shares": mean_steady,
    }
    if name.startswith("static"):
        target = 1.0 / n_chains
        summary["balance_ok"] = all(
            abs(share - target) <= 0.02 for share in mean_steady.values()
        )
    if name.startswith("warmup") or name.startswith("combined-add"):
        convs = [
            tr.get("converged_after_s")
            for r in reports
            for tr in r["transitions"]
        ]
        summary["convergence_s"] = convs
        summary["convergence_ok"] = all(c is not None and c <= 7.0 for c in convs)
    if name.startswith("cooldown") or name.startswith("combined-remove"):
        drains = [
            tr.get("drained_after_s")
            for r in reports
            for tr in r["transitions"]
            if tr["kind"] == "remove"
        ]
        summary["drain_s"] = drains
        summary["drain_ok"] = all(d is not None and d <= 7.0 for d in drains)
        summary["reclaim_ok"] = all(
            tr.get("reclaim_within_timeout", False)
            for r in reports
            for tr in r["transitions"]
            if tr["kind"] == "remove"
        )
        # mean survivor shares per removal event, across seeds
        survivor_even = True
        per_event = {}
        for r in reports:
            for idx, tr in enumerate(r["transitions"]):
                if tr["kind"] == "remove" and "survivor_shares" in tr:
                    per_event.setdefault(idx, []).append(tr["survivor_shares"])
        for shares_list in per_event.values():
            tags = shares_list[0].keys()
            for tag in tags:
                mean = sum(s[tag] for s in shares_list) / len(shares_list)
                if abs(mean - 1.0 / len(tags)) > 0.02:
                    survivor_even = False
        summary["survivors_even_ok"] = survivor_even
    return summary


def cmd_replicate(args) -> int:
    out_root = Path(args.out) if args.out else Path("out") / "replicate"
    summaries = []
    worst = 0
    for name in SCENARIO_ORDER:
        scenario = bundled_scenario(name)
        reports = []
        for seed in REPLICATE_SEEDS:
            started = time.monotonic()
            result = netsim.run(scenario.with_seed(seed))
            elapsed = time.monotonic() - started
            report = write_outputs(result, out_root / name / f"seed-{seed}", args.band)
            reports.append(report)
            _print_report(report, elapsed)
            if not report["clean"]:
                worst = 1
        summaries.append(_aggregate(name, reports))
    with open(out_root / "summary.json", "w", newline="\n") as fh:
        json.dump(summaries, fh, indent=2)
        fh.write("\n")
    print(f"\nwrote {out_root / 'summary.json'}")
    for summary in summaries:
        checks = {k: v for k, v in summary.items() if k.endswith("_ok") or k == "all_clean"}
        print(f"  {summary['scenario']}: {checks}")
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chainbalance",
        description="Simulate connection-affine scaling of NF chains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario file")
    run_p.add_argument("scenario", help="path to a scenario YAML file")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--band", type=float, default=0.10,
                       help="convergence band as a fraction of the even split")
    run_p.add_argument("--horizon", type=float, default=None, help="override the run horizon")
    run_p.set_defaults(fn=cmd_run)

    rep_p = sub.add_parser("replicate", help="run the bundled scenario corpus, 5 seeds each")
    rep_p.add_argument("--out", default=None, help="output directory")
    rep_p.add_argument("--band", type=float, default=0.10,
                       help="convergence band as a fraction of the even split")
    rep_p.set_defaults(fn=cmd_replicate)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
