"""DG ramp profiles, scenario files and engine time grids.

Scenario files are ``key = value`` lines (``#`` comments allowed)::

    ramp.t_start = 10
    ramp.t_end = 200
    ramp.p_max_mw = 2.5
    t_stop = 350
    qsts.dt = 1
    dyn.h = 0.1
    dyn.tau_m = 0

Missing keys take the defaults below.  The single ramp drives every DG
unit of the feeder.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from svrsim.netmodel import Feeder


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class RampProfile:
    p_max: float
    t_start: float = 10.0
    t_end: float = 200.0
    t_stop: float = 350.0

    def __post_init__(self) -> None:
        if not 0 <= self.t_start < self.t_end <= self.t_stop:
            raise ScenarioError("ramp needs 0 <= t_start < t_end <= t_stop")
        if not self.p_max > 0:
            raise ScenarioError("ramp p_max must be positive")

    def power(self, t: float) -> float:
        return dg_power(self, t)


@dataclass(frozen=True)
class ConstantProfile:
    """Fixed DG output over the whole run."""

    p: float
    t_stop: float = 350.0

    def __post_init__(self) -> None:
        if self.p < 0:
            raise ScenarioError("constant DG output must be non-negative")

    def power(self, t: float) -> float:
        if not 0 <= t <= self.t_stop:
            raise ScenarioError(f"t = {t} outside [0, {self.t_stop}]")
        return self.p


def dg_power(ramp: RampProfile, t: float) -> float:
    """Piecewise-linear ramp: zero before ``t_start``, ``p_max`` from ``t_end`` on."""
    if not 0 <= t <= ramp.t_stop:
        raise ScenarioError(f"t = {t} outside [0, {ramp.t_stop}]")
    if t <= ramp.t_start:
        return 0.0
    if t >= ramp.t_end:
        return ramp.p_max
    return ramp.p_max * (t - ramp.t_start) / (ramp.t_end - ramp.t_start)


@dataclass(frozen=True)
class Scenario:
    profiles: dict[str, RampProfile | ConstantProfile]
    t_stop: float = 350.0
    qsts_dt: float = 1.0
    dyn_h: float = 0.1
    tau_m: float = 0.0
    clf_instants: tuple[float, ...] | None = None
    name: str = "scenario"
    control_cap: int = 40

    def __post_init__(self) -> None:
        if not self.qsts_dt > 0 or not self.dyn_h > 0:
            raise ScenarioError("time steps must be positive")
        if self.dyn_h > self.qsts_dt:
            raise ScenarioError("dyn.h must not exceed qsts.dt")
        if self.tau_m < 0:
            raise ScenarioError("dyn.tau_m must be non-negative")
        if not self.t_stop > 0:
            raise ScenarioError("t_stop must be positive")
        for prof in self.profiles.values():
            if prof.t_stop != self.t_stop:
                raise ScenarioError("profile t_stop differs from scenario t_stop")

    def dg_at(self, t: float) -> dict[str, float]:
        return {dg_id: prof.power(t) for dg_id, prof in self.profiles.items()}

    def qsts_grid(self) -> np.ndarray:
        return time_grid(self.t_stop, self.qsts_dt)

    def dyn_grid(self) -> np.ndarray:
        return time_grid(self.t_stop, self.dyn_h)

    def clf_grid(self) -> np.ndarray:
        if self.clf_instants is None:
            return self.qsts_grid()
        return np.array(sorted(self.clf_instants), dtype=float)


def time_grid(t_stop: float, dt: float) -> np.ndarray:
    """``0, dt, 2 dt, ...`` up to and including ``t_stop`` when it falls on the grid."""
    n = int(np.floor(t_stop / dt + 1e-9))
    return np.arange(n + 1) * dt


@dataclass(frozen=True)
class ScenarioSpec:
    """Parsed scenario file, independent of any feeder."""

    t_start: float = 10.0
    t_end: float = 200.0
    p_max_mw: float = 2.5
    t_stop: float = 350.0
    qsts_dt: float = 1.0
    dyn_h: float = 0.1
    tau_m: float = 0.0
    name: str = "scenario"

    def for_feeder(self, feeder: Feeder, **overrides) -> Scenario:
        ramp = RampProfile(self.p_max_mw, self.t_start, self.t_end, self.t_stop)
        for dg in feeder.dgs:
            if self.p_max_mw > dg.p_max + 1e-12:
                raise ScenarioError(
                    f"ramp peak {self.p_max_mw} MW exceeds dg {dg.id} rating {dg.p_max} MW"
                )
        kw = dict(
            profiles={dg.id: ramp for dg in feeder.dgs},
            t_stop=self.t_stop,
            qsts_dt=self.qsts_dt,
            dyn_h=self.dyn_h,
            tau_m=self.tau_m,
            name=self.name,
        )
        kw.update(overrides)
        return Scenario(**kw)


_KEYS = {
    "ramp.t_start": "t_start",
    "ramp.t_end": "t_end",
    "ramp.p_max_mw": "p_max_mw",
    "t_stop": "t_stop",
    "qsts.dt": "qsts_dt",
    "dyn.h": "dyn_h",
    "dyn.tau_m": "tau_m",
}


def parse_scenario(text: str, name: str = "scenario") -> ScenarioSpec:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        if _KEYS[key] in values:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[_KEYS[key]] = float(val)
        except ValueError:
            raise ScenarioError(f"line {lineno}: {key} needs a number, got {val!r}") from None
    spec = ScenarioSpec(name=name, **values)
    # validate the ramp/grid invariants early
    RampProfile(spec.p_max_mw, spec.t_start, spec.t_end, spec.t_stop)
    Scenario({}, spec.t_stop, spec.qsts_dt, spec.dyn_h, spec.tau_m)
    return spec


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)
