"""Cross-engine comparison report.

All numbers entering the report are first quantized to the precision of
the CSV files (6 decimals), so a report rebuilt from written CSVs is
identical to the in-memory one.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from svrsim.engines import RunResult

DECIMALS = 6


class CompareError(ValueError):
    pass


def q(x: float) -> float:
    return round(float(x), DECIMALS)


@dataclass(frozen=True)
class AlignmentRow:
    index: int
    svr: str
    times: dict[str, float | None]
    new_taps: dict[str, int | None]
    delta_s: dict[str, float | None]  # time minus reference time


@dataclass
class ComparisonReport:
    feeder: str
    scenario: str
    designated_bus: str
    labels: list[str]
    reference: str
    final_taps: dict[str, dict[str, int]]
    final_voltages: dict[str, dict[str, float]]
    err_pct: dict[str, float]
    op_counts: dict[str, int]
    alignment: list[AlignmentRow] = field(default_factory=list)
    wall_clock: dict[str, float] = field(default_factory=dict)

    def to_text(self) -> str:
        out = [
            f"feeder: {self.feeder}",
            f"scenario: {self.scenario}",
            f"designated bus: {self.designated_bus}",
            f"reference run: {self.reference}",
            "",
            "final state",
        ]
        for lab in self.labels:
            taps = " ".join(f"{k}={v}" for k, v in self.final_taps[lab].items())
            v = self.final_voltages[lab][self.designated_bus]
            out.append(
                f"  {lab:<10} taps: {taps}  V({self.designated_bus}) = {v:.6f} p.u.  "
                f"ops = {self.op_counts[lab]}"
            )
        out += ["", f"voltage error at {self.designated_bus} vs {self.reference} "
                "(100*(V_ref - V)/V_ref)"]
        for lab, e in self.err_pct.items():
            out.append(f"  {lab:<10} {e:+.6f} %")
        out += ["", "tap event alignment (by event index)"]
        head = "  " + "idx".ljust(5) + "svr".ljust(8) + "".join(f"{lab:>28}" for lab in self.labels)
        out.append(head)
        for row in self.alignment:
            cells = []
            for lab in self.labels:
                t = row.times[lab]
                if t is None:
                    cells.append(f"{'-':>28}")
                else:
                    d = row.delta_s[lab]
                    cells.append(f"{t:>10.3f} s -> {row.new_taps[lab]:+3d} ({d:+8.3f})".rjust(28))
            out.append("  " + str(row.index).ljust(5) + row.svr.ljust(8) + "".join(cells))
        out += ["", "wall clock"]
        for lab in self.labels:
            out.append(f"  {lab:<10} {self.wall_clock[lab]:.6f} s")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["# feeder=" + self.feeder])
        w.writerow(["# scenario=" + self.scenario])
        w.writerow(["section", "run", "key", "value"])
        for lab in self.labels:
            for svr, tap in self.final_taps[lab].items():
                w.writerow(["final_tap", lab, svr, tap])
            for bus, v in self.final_voltages[lab].items():
                w.writerow(["final_voltage", lab, bus, f"{v:.6f}"])
            w.writerow(["op_count", lab, "", self.op_counts[lab]])
            w.writerow(["wall_clock_s", lab, "", repr(self.wall_clock[lab])])
        for lab, e in self.err_pct.items():
            w.writerow(["err_pct", lab, self.designated_bus, f"{e:.6f}"])
        for row in self.alignment:
            for lab in self.labels:
                t = row.times[lab]
                w.writerow(
                    ["event", lab, f"{row.index}:{row.svr}", "" if t is None else f"{t:.6f}"]
                )
        return buf.getvalue()


def _labels(runs: list[RunResult]) -> list[str]:
    labels, seen = [], {}
    for r in runs:
        n = seen.get(r.engine, 0) + 1
        seen[r.engine] = n
        labels.append(r.engine if n == 1 else f"{r.engine}#{n}")
    return labels


def compare(runs: list[RunResult], designated_bus: str) -> ComparisonReport:
    """Compare runs of the same feeder and scenario.

    The reference is the first dynamic run when one is present, otherwise
    the first run.
    """
    if len(runs) < 2:
        raise CompareError("need at least two runs to compare")
    feeders = {r.feeder for r in runs}
    scenarios = {r.scenario for r in runs}
    if len(feeders) != 1 or len(scenarios) != 1:
        raise CompareError(
            f"runs cover different feeders/scenarios: {sorted(feeders)} / {sorted(scenarios)}"
        )
    for r in runs:
        if designated_bus not in r.buses:
            raise CompareError(f"bus {designated_bus!r} not recorded in {r.engine} run")
    svr_sets = {tuple(r.svr_ids) for r in runs}
    if len(svr_sets) != 1:
        raise CompareError("runs disagree on the SVR set")

    labels = _labels(runs)
    by_label = dict(zip(labels, runs))
    ref = next((lab for lab, r in by_label.items() if r.engine == "dynamic"), labels[0])

    final_taps = {lab: {s: r.final_tap(s) for s in r.svr_ids} for lab, r in by_label.items()}
    final_v = {
        lab: {b: q(r.vmag[-1, i]) for i, b in enumerate(r.buses)} for lab, r in by_label.items()
    }
    v_ref = final_v[ref][designated_bus]
    err = {
        lab: 100.0 * (v_ref - final_v[lab][designated_bus]) / v_ref
        for lab in labels
        if lab != ref
    }

    alignment = []
    for svr in runs[0].svr_ids:
        ev = {lab: r.events_for(svr) for lab, r in by_label.items()}
        n = max(len(e) for e in ev.values())
        for i in range(n):
            times = {lab: (q(e[i].time) if i < len(e) else None) for lab, e in ev.items()}
            taps = {lab: (e[i].new_tap if i < len(e) else None) for lab, e in ev.items()}
            t_ref = times[ref]
            delta = {
                lab: (None if t is None or t_ref is None else q(t - t_ref))
                for lab, t in times.items()
            }
            alignment.append(AlignmentRow(i, svr, times, taps, delta))

    return ComparisonReport(
        feeder=runs[0].feeder,
        scenario=runs[0].scenario,
        designated_bus=designated_bus,
        labels=labels,
        reference=ref,
        final_taps=final_taps,
        final_voltages=final_v,
        err_pct=err,
        op_counts={lab: r.op_count for lab, r in by_label.items()},
        alignment=alignment,
        wall_clock={lab: r.wall_clock for lab, r in by_label.items()},
    )
