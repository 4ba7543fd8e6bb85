"""The three analysis techniques: CLF sweep, QSTS and quasi-dynamic.

All engines share the algebraic network (``powerflow.solve``) and the SVR
controller functions; they differ only in how controller time is handled.

* ``run_clf``: every instant is settled on its own, taps move immediately
  and the network is re-solved until no controller asks for action.
* ``run_qsts``: one solve per ``qsts_dt`` step; timers count down and a
  tap command takes effect at the next step's solve.
* ``run_dynamic``: the QSTS loop at ``dyn_h`` with continuous timers and an
  optional first-order lag on the measured voltage.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from svrsim import svrctl
from svrsim.netmodel import Feeder, SvrBranch
from svrsim.powerflow import PowerFlowSolution, SolverSettings, branch_active_power, solve
from svrsim.scenarios import Scenario
from svrsim.svrctl import Activation, Side, SvrState

ENGINES = ("clf", "qsts", "dynamic")


class EngineError(RuntimeError):
    pass


class ControlOscillationError(EngineError):
    def __init__(self, t: float, cap: int, taps: dict[str, int]):
        self.t = t
        self.cap = cap
        self.taps = taps
        super().__init__(
            f"CLF control loop did not settle within {cap} iterations at t = {t:g} s "
            f"(last taps {taps}); deadband may be narrower than one tap step"
        )


@dataclass(frozen=True)
class TapEvent:
    time: float
    svr: str
    old_tap: int
    new_tap: int
    side: Side


@dataclass
class RunResult:
    engine: str
    feeder: str
    scenario: str
    time: np.ndarray
    buses: list[str]
    vmag: np.ndarray  # (n_steps, n_buses)
    taps: dict[str, np.ndarray]
    p_svr: dict[str, np.ndarray]  # MW, positive source -> load
    active: dict[str, np.ndarray]  # measuring element output at each step
    dg_mw: np.ndarray
    events: list[TapEvent]
    wall_clock: float
    svr_terminals: dict[str, tuple[str, str]] = field(default_factory=dict)
    max_balance_error: float = 0.0

    @property
    def op_count(self) -> int:
        return len(self.events)

    @property
    def svr_ids(self) -> list[str]:
        return list(self.taps)

    def v(self, bus: str) -> np.ndarray:
        return self.vmag[:, self.buses.index(bus)]

    def tap(self, svr: str | None = None) -> np.ndarray:
        return self.taps[svr or self.svr_ids[0]]

    def final_tap(self, svr: str | None = None) -> int:
        return int(self.tap(svr)[-1])

    def events_for(self, svr: str | None = None) -> list[TapEvent]:
        svr = svr or self.svr_ids[0]
        return [e for e in self.events if e.svr == svr]

    def reversal_time(self, svr: str | None = None) -> float | None:
        """First instant the SVR carries reverse active power."""
        p = self.p_svr[svr or self.svr_ids[0]]
        idx = np.flatnonzero(p < 0)
        return float(self.time[idx[0]]) if idx.size else None


@dataclass
class _Recorder:
    feeder: Feeder
    buses: list[str]
    n: int
    tol: float

    def __post_init__(self) -> None:
        self.k = 0
        self.time = np.zeros(self.n)
        self.vmag = np.zeros((self.n, len(self.buses)))
        self.taps = {s.id: np.zeros(self.n, dtype=int) for s in self.feeder.svrs}
        self.p_svr = {s.id: np.zeros(self.n) for s in self.feeder.svrs}
        self.active = {s.id: np.zeros(self.n, dtype=bool) for s in self.feeder.svrs}
        self.dg = np.zeros(self.n)
        self.idx = np.array([self.feeder.topology.index[b] for b in self.buses], dtype=int)
        self.max_balance = 0.0

    def check(self, sol: PowerFlowSolution) -> None:
        bal = sol.power_balance()
        self.max_balance = max(self.max_balance, abs(bal.real), abs(bal.imag))

    def record(self, t: float, sol: PowerFlowSolution, active: dict[str, bool]) -> None:
        k = self.k
        self.time[k] = t
        self.vmag[k] = np.abs(sol.voltages[self.idx])
        for s in self.feeder.svrs:
            self.taps[s.id][k] = sol.taps[s.id]
            self.p_svr[s.id][k] = branch_active_power(sol, s.id)
            self.active[s.id][k] = active[s.id]
        self.dg[k] = sum(sol.dg_p.values())
        self.k += 1

    def result(self, engine, scenario, events, wall) -> RunResult:
        return RunResult(
            engine=engine,
            feeder=self.feeder.name,
            scenario=scenario.name,
            time=self.time,
            buses=list(self.buses),
            vmag=self.vmag,
            taps=self.taps,
            p_svr=self.p_svr,
            active=self.active,
            dg_mw=self.dg,
            events=events,
            wall_clock=wall,
            svr_terminals={s.id: (s.from_bus, s.to_bus) for s in self.feeder.svrs},
            max_balance_error=self.max_balance,
        )


def regulated_voltage(sol: PowerFlowSolution, svr: SvrBranch, side: Side) -> float:
    bus = svr.to_bus if side is Side.POINT2 else svr.from_bus
    return sol.vmag(bus)


def _initial_states(feeder: Feeder) -> dict[str, SvrState]:
    return {s.id: svrctl.initial_state(s.controller, s.tap0) for s in feeder.svrs}


def run_clf(
    feeder: Feeder,
    scenario: Scenario,
    settings: SolverSettings | None = None,
    buses: list[str] | None = None,
) -> RunResult:
    settings = settings or SolverSettings()
    grid = scenario.clf_grid()
    rec = _Recorder(feeder, buses or feeder.bus_ids, len(grid), settings.tolerance)
    states = _initial_states(feeder)
    events: list[TapEvent] = []

    start = time.perf_counter()
    for t in grid:
        t = float(t)
        dg = scenario.dg_at(t)
        taps = {k: st.tap for k, st in states.items()}
        sol = solve(feeder, taps, dg, settings)
        rec.check(sol)
        first_active: dict[str, bool] | None = None
        prev = {k: False for k in states}
        for it in range(scenario.control_cap + 1):
            moved = False
            acts = {}
            for svr in feeder.svrs:
                st = states[svr.id]
                cfg = svr.controller
                side = svrctl.select_regulation_point(
                    branch_active_power(sol, svr.id), st.regulated_side
                )
                act = svrctl.measure(regulated_voltage(sol, svr, side), cfg, prev[svr.id])
                acts[svr.id] = act is not Activation.NONE
                st = replace(st, regulated_side=side)
                cmd = svrctl.tap_command(act, side)
                if cmd is not None:
                    new = svrctl.apply_tap(st, cmd, cfg)
                    if new.tap != st.tap:
                        events.append(TapEvent(t, svr.id, st.tap, new.tap, side))
                        moved = True
                    st = new
                states[svr.id] = st
            prev = acts
            if first_active is None:
                first_active = acts
            if not moved:
                break
            if it == scenario.control_cap:
                raise ControlOscillationError(t, scenario.control_cap, {k: s.tap for k, s in states.items()})
            sol = solve(feeder, {k: s.tap for k, s in states.items()}, dg, settings)
            rec.check(sol)
        rec.record(t, sol, first_active or {k: False for k in states})
    wall = time.perf_counter() - start
    return rec.result("clf", scenario, events, wall)


def _march(
    engine: str,
    feeder: Feeder,
    scenario: Scenario,
    grid: np.ndarray,
    dt: float,
    tau_m: float,
    settings: SolverSettings | None,
    buses: list[str] | None,
) -> RunResult:
    settings = settings or SolverSettings()
    rec = _Recorder(feeder, buses or feeder.bus_ids, len(grid), settings.tolerance)
    states = _initial_states(feeder)
    prev_active = {k: False for k in states}
    lagged: dict[tuple[str, Side], float] = {}
    events: list[TapEvent] = []

    start = time.perf_counter()
    for t in grid:
        t = float(t)
        dg = scenario.dg_at(t)
        sol = solve(feeder, {k: st.tap for k, st in states.items()}, dg, settings)
        rec.check(sol)
        active = {}
        for svr in feeder.svrs:
            st = states[svr.id]
            cfg = svr.controller
            side = svrctl.select_regulation_point(
                branch_active_power(sol, svr.id), st.regulated_side
            )
            st = replace(st, regulated_side=side)
            v_in = regulated_voltage(sol, svr, side)
            if tau_m > 0:
                # forward Euler on both terminals so a side switch sees a warm filter
                for s in Side:
                    v = regulated_voltage(sol, svr, s)
                    key = (svr.id, s)
                    if key in lagged:
                        lagged[key] += dt / tau_m * (v - lagged[key])
                    else:
                        lagged[key] = v
                v_in = lagged[(svr.id, side)]
            act = svrctl.measure(v_in, cfg, prev_active[svr.id])
            active[svr.id] = act is not Activation.NONE
            st, cmd = svrctl.step_timer(st, act, dt, cfg)
            if cmd is not None:
                new = svrctl.apply_tap(st, cmd, cfg)
                if new.tap != st.tap:
                    events.append(TapEvent(t, svr.id, st.tap, new.tap, side))
                st = new
            states[svr.id] = st
        prev_active = active
        rec.record(t, sol, active)
    wall = time.perf_counter() - start
    return rec.result(engine, scenario, events, wall)


def run_qsts(
    feeder: Feeder,
    scenario: Scenario,
    settings: SolverSettings | None = None,
    buses: list[str] | None = None,
) -> RunResult:
    return _march(
        "qsts", feeder, scenario, scenario.qsts_grid(), scenario.qsts_dt, 0.0, settings, buses
    )


def run_dynamic(
    feeder: Feeder,
    scenario: Scenario,
    settings: SolverSettings | None = None,
    buses: list[str] | None = None,
    tau_m: float | None = None,
) -> RunResult:
    tau = scenario.tau_m if tau_m is None else tau_m
    if tau < 0:
        raise ValueError("tau_m must be non-negative")
    return _march(
        "dynamic", feeder, scenario, scenario.dyn_grid(), scenario.dyn_h, tau, settings, buses
    )


def run_engine(name: str, feeder: Feeder, scenario: Scenario, **kw) -> RunResult:
    runners = {"clf": run_clf, "qsts": run_qsts, "dynamic": run_dynamic}
    try:
        runner = runners[name]
    except KeyError:
        raise ValueError(f"unknown engine {name!r}; choose from {', '.join(ENGINES)}") from None
    return runner(feeder, scenario, **kw)
