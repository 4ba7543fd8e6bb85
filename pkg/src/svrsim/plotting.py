"""SVG figures of tap evolution and regulated-bus voltages."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from svrsim.engines import RunResult  # noqa: E402

STYLES = {"clf": ("tab:red", "-"), "qsts": ("tab:blue", "--"), "dynamic": ("tab:green", ":")}


class PlotError(ValueError):
    pass


def _check(runs: list[RunResult]) -> None:
    if not runs:
        raise PlotError("nothing to plot")
    for r in runs:
        if len(r.time) == 0:
            raise PlotError(f"{r.engine} run has no samples")
    if len({(r.feeder, r.scenario) for r in runs}) != 1:
        raise PlotError("runs cover different feeders/scenarios")


def _style(engine: str) -> dict:
    color, ls = STYLES.get(engine, (None, "-"))
    return {"color": color, "linestyle": ls}


def plot_taps(runs: list[RunResult], path: str | Path, svr: str | None = None) -> Path:
    """Staircase tap position versus time, one series per run."""
    _check(runs)
    svr = svr or runs[0].svr_ids[0]
    fig, ax = plt.subplots(figsize=(7, 4))
    for r in runs:
        ax.step(r.time, r.tap(svr), where="post", label=r.engine, **_style(r.engine))
    ax.set_xlabel("time (s)")
    ax.set_ylabel(f"{svr} tap position")
    ax.set_title(f"{svr} tap evolution ({runs[0].feeder}, {runs[0].scenario})")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_voltages(
    runs: list[RunResult], path: str | Path, buses: list[str] | None = None
) -> Path:
    """Voltage magnitude versus time; defaults to the first SVR's terminals."""
    _check(runs)
    if buses is None:
        first = runs[0]
        if first.svr_terminals:
            buses = list(first.svr_terminals[first.svr_ids[0]])
        else:
            buses = first.buses[:1]
    for r in runs:
        missing = [b for b in buses if b not in r.buses]
        if missing:
            raise PlotError(f"{r.engine} run does not record bus(es) {missing}")
    fig, ax = plt.subplots(figsize=(7, 4))
    for r in runs:
        st = _style(r.engine)
        for b in buses:
            ax.plot(r.time, r.v(b), label=f"{r.engine} {b}", **st)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("voltage (p.u.)")
    ax.set_title(f"Regulated-bus voltages ({runs[0].feeder}, {runs[0].scenario})")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    try:
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)
    return path
