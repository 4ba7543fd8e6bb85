"""Run time series as self-describing CSV files.

Layout::

    # feeder=4bus
    # scenario=ramp25
    # engine=qsts
    # wall_clock_s=0.0861
    # svr=SVR1,B2,B3
    # event=140.000000,SVR1,-3,-2,point1
    time_s,dg_mw,p_svr_mw,tap,v_B1,v_B2,...

With more than one SVR the flow and tap columns become ``p_svr_mw_<id>``
and ``tap_<id>``.  Values are written with 6 decimals; taps as integers.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from svrsim.engines import RunResult, TapEvent
from svrsim.svrctl import Side

FMT = "{:.6f}"


class CsvFormatError(ValueError):
    pass


def _svr_cols(svr_ids: list[str]) -> tuple[list[str], list[str]]:
    if len(svr_ids) == 1:
        return ["p_svr_mw"], ["tap"]
    return [f"p_svr_mw_{s}" for s in svr_ids], [f"tap_{s}" for s in svr_ids]


def write_run_csv(result: RunResult, path: str | Path) -> Path:
    path = Path(path)
    svr_ids = result.svr_ids
    p_cols, t_cols = _svr_cols(svr_ids)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# feeder={result.feeder}\n")
        fh.write(f"# scenario={result.scenario}\n")
        fh.write(f"# engine={result.engine}\n")
        fh.write(f"# wall_clock_s={result.wall_clock!r}\n")
        for s in svr_ids:
            a, b = result.svr_terminals.get(s, ("", ""))
            fh.write(f"# svr={s},{a},{b}\n")
        for e in result.events:
            fh.write(
                f"# event={FMT.format(e.time)},{e.svr},{e.old_tap},{e.new_tap},{e.side.value}\n"
            )
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "dg_mw", *p_cols, *t_cols, *(f"v_{b}" for b in result.buses)])
        for k in range(len(result.time)):
            w.writerow(
                [
                    FMT.format(result.time[k]),
                    FMT.format(result.dg_mw[k]),
                    *(FMT.format(result.p_svr[s][k]) for s in svr_ids),
                    *(int(result.taps[s][k]) for s in svr_ids),
                    *(FMT.format(v) for v in result.vmag[k]),
                ]
            )
    return path


def write_events_csv(result: RunResult, path: str | Path) -> Path:
    """Tap-event log: one row per tap movement."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["engine", "time_s", "svr", "old_tap", "new_tap", "side"])
        for e in result.events:
            w.writerow([result.engine, FMT.format(e.time), e.svr, e.old_tap, e.new_tap, e.side.value])
    return path


def read_run_csv(path: str | Path) -> RunResult:
    """Rebuild a :class:`RunResult` from a CSV written by :func:`write_run_csv`.

    The ``active`` series is not stored and comes back empty.
    """
    path = Path(path)
    meta: dict[str, str] = {}
    svrs: list[tuple[str, str, str]] = []
    events: list[TapEvent] = []
    header: list[str] | None = None
    rows: list[list[str]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line[1:].strip().partition("=")
                if not sep:
                    continue
                try:
                    if key == "svr":
                        a, b, c = val.split(",")
                        svrs.append((a, b, c))
                    elif key == "event":
                        t, s, old, new, side = val.split(",")
                        events.append(TapEvent(float(t), s, int(old), int(new), Side(side)))
                    else:
                        meta[key] = val
                except ValueError:
                    raise CsvFormatError(f"{path}:{lineno}: malformed {key} header") from None
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = cells
            else:
                if len(cells) != len(header):
                    raise CsvFormatError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}"
                    )
                rows.append(cells)

    for key in ("feeder", "scenario", "engine"):
        if key not in meta:
            raise CsvFormatError(f"{path}: missing '# {key}=' header")
    if header is None or not rows:
        raise CsvFormatError(f"{path}: no data rows")
    svr_ids = [s[0] for s in svrs]
    p_cols, t_cols = _svr_cols(svr_ids) if svr_ids else ([], [])
    fixed = ["time_s", "dg_mw", *p_cols, *t_cols]
    if header[: len(fixed)] != fixed or not all(h.startswith("v_") for h in header[len(fixed):]):
        raise CsvFormatError(f"{path}: unexpected columns {header}")

    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise CsvFormatError(f"{path}: non-numeric value ({exc})") from None
    col = {h: i for i, h in enumerate(header)}
    buses = [h[2:] for h in header[len(fixed):]]
    return RunResult(
        engine=meta["engine"],
        feeder=meta["feeder"],
        scenario=meta["scenario"],
        time=data[:, 0],
        buses=buses,
        vmag=data[:, len(fixed):],
        taps={s: data[:, col[c]].astype(int) for s, c in zip(svr_ids, t_cols)},
        p_svr={s: data[:, col[c]] for s, c in zip(svr_ids, p_cols)},
        active={},
        dg_mw=data[:, 1],
        events=events,
        wall_clock=float(meta.get("wall_clock_s", "nan")),
        svr_terminals={s: (a, b) for s, a, b in svrs},
    )
