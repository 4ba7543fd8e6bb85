"""Command-line front end.

    svrsim run --engine all --feeder 4bus.fdr --scenario ramp25.scn --out results
    svrsim compare results/qsts.csv results/dynamic.csv --bus B3
    svrsim plot results/*.csv --out results

Feeder and scenario arguments that do not exist as paths are looked up
among the bundled data files.  Exit status: 0 on success, 2 for a missing
input file or bad usage, 1 for any other failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from svrsim import csvio, plotting
from svrsim.compare import ComparisonReport, compare
from svrsim.engines import ENGINES, RunResult, run_engine
from svrsim.netmodel import Feeder, bundled_path, load_feeder
from svrsim.scenarios import load_scenario


class MissingInput(Exception):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"no such file: {path}")


def resolve(path: str) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    bundled = bundled_path(p.name)
    if p.parent == Path(".") and bundled.is_file():
        return bundled
    raise MissingInput(path)


def summary_line(result: RunResult, feeder: Feeder) -> str:
    parts = [f"{result.engine}:"]
    for s in feeder.svrs:
        parts.append(f"tap {s.id}={result.final_tap(s.id):+d}")
        for b in (s.from_bus, s.to_bus):
            if b in result.buses:
                parts.append(f"V({b})={result.v(b)[-1]:.4f}")
    parts.append(f"ops={result.op_count}")
    parts.append(f"wall-clock={result.wall_clock:.4f}s")
    return " ".join(parts)


def write_report(report: ComparisonReport, out: Path, fmt: str) -> Path:
    path = out / f"compare.{'csv' if fmt == 'csv' else 'txt'}"
    path.write_text(report.to_csv() if fmt == "csv" else report.to_text(), encoding="utf-8")
    return path


def default_bus(result: RunResult) -> str:
    if result.svr_terminals:
        return result.svr_terminals[result.svr_ids[0]][1]
    return result.buses[-1]


def cmd_run(args) -> int:
    feeder = load_feeder(resolve(args.feeder))
    spec = load_scenario(resolve(args.scenario))
    overrides = {} if args.tau_m is None else {"tau_m": args.tau_m}
    scenario = spec.for_feeder(feeder, **overrides)
    buses = args.bus
    if buses:
        unknown = [b for b in buses if b not in feeder.topology.index]
        if unknown:
            raise ValueError(f"unknown bus(es) {unknown} in feeder {feeder.name}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    engines = list(ENGINES) if args.engine == "all" else [args.engine]
    results = []
    for name in engines:
        res = run_engine(name, feeder, scenario, buses=buses)
        csvio.write_run_csv(res, out / f"{name}.csv")
        csvio.write_events_csv(res, out / f"{name}_events.csv")
        print(summary_line(res, feeder))
        results.append(res)
    if len(results) > 1:
        designated = default_bus(results[0])
        if designated in results[0].buses:
            path = write_report(compare(results, designated), out, args.format)
            print(f"wrote {path}")
    return 0


def _read_all(paths: list[str]) -> list[RunResult]:
    return [csvio.read_run_csv(resolve_existing(p)) for p in paths]


def resolve_existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise MissingInput(path)
    return p


def cmd_compare(args) -> int:
    runs = _read_all(args.csv)
    bus = args.bus or default_bus(runs[0])
    report = compare(runs, bus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = write_report(report, out, args.format)
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_text())
    print(f"wrote {path}")
    return 0


def cmd_plot(args) -> int:
    runs = _read_all(args.csv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    taps = plotting.plot_taps(runs, out / "taps.svg")
    volts = plotting.plot_voltages(runs, out / "voltages.svg", args.bus)
    print(f"wrote {taps}\nwrote {volts}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svrsim", description="SVR runaway workbench")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one or all engines over a scenario")
    r.add_argument("--engine", choices=[*ENGINES, "all"], default="all")
    r.add_argument("--feeder", required=True, help="feeder file or bundled name (4bus.fdr)")
    r.add_argument("--scenario", required=True, help="scenario file or bundled name")
    r.add_argument("--out", default=".", help="output directory")
    r.add_argument("--bus", nargs="+", help="buses to record (default: all)")
    r.add_argument("--format", choices=["text", "csv"], default="text", help="report format")
    r.add_argument("--tau-m", type=float, help="override the dynamic measurement lag (s)")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare result CSVs")
    c.add_argument("csv", nargs="+")
    c.add_argument("--bus", help="designated bus (default: first SVR load-side terminal)")
    c.add_argument("--out", default=".")
    c.add_argument("--format", choices=["text", "csv"], default="text")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("plot", help="write tap and voltage SVG figures")
    g.add_argument("csv", nargs="+")
    g.add_argument("--bus", nargs="+", help="buses for the voltage figure")
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingInput as exc:
        print(f"svrsim: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # report any failure as a diagnostic, not a traceback
        print(f"svrsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
