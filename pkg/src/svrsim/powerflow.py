"""Backward/forward sweep power flow for radial feeders.

Current summation form.  With ``c[k]`` the product of SVR ratios on the
path from the slack to bus ``k`` and ``desc`` the branch/subtree incidence
matrix, one sweep is::

    J = desc @ (c * I) / c_to                      # backward: branch currents
    V = c * (V0 - desc.T @ (z * J / c_to))         # forward: bus voltages

where ``I`` are the bus load currents at the present iterate and ``J`` the
current on the downstream side of each branch.  SVR branches have ``z = 0``,
so they only scale voltages up and currents down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from svrsim.netmodel import Feeder, tap_ratio

COLLAPSE_V = 0.5


class PowerFlowError(RuntimeError):
    pass


class ConvergenceError(PowerFlowError):
    def __init__(self, iterations: int, mismatch: float, bus: str):
        self.iterations = iterations
        self.mismatch = mismatch
        self.bus = bus
        super().__init__(
            f"power flow did not converge in {iterations} iterations "
            f"(worst mismatch {mismatch:.3e} p.u. at bus {bus})"
        )


class VoltageCollapseError(PowerFlowError):
    def __init__(self, iteration: int, bus: str, v: float):
        self.iteration = iteration
        self.bus = bus
        self.v = v
        super().__init__(
            f"voltage collapse: |V| = {v:.4f} p.u. at bus {bus} in iteration {iteration}"
        )


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-8
    max_iterations: int = 100

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    """Converged operating point; all arrays are per unit in topology order."""

    feeder: Feeder
    taps: dict[str, int]
    dg_p: dict[str, float]
    voltages: np.ndarray
    branch_currents: np.ndarray  # downstream-side current, parent -> child
    branch_flows: np.ndarray  # complex power at the branch from-bus end
    sending_power: np.ndarray  # complex power leaving the parent bus
    load_power: np.ndarray  # per load, at the solved voltage
    iterations: int
    max_mismatch: float

    def v(self, bus: str) -> complex:
        return self.voltages[self.feeder.topology.index[bus]]

    def vmag(self, bus: str) -> float:
        return float(abs(self.v(bus)))

    def vmag_by_bus(self) -> dict[str, float]:
        topo = self.feeder.topology
        return {b: float(abs(self.voltages[topo.index[b]])) for b in self.feeder.bus_ids}

    def flow(self, branch: str) -> complex:
        """Complex power (p.u.) entering ``branch`` at its from bus."""
        try:
            k = self.feeder.topology.branch_index[branch]
        except KeyError:
            raise KeyError(f"unknown branch {branch!r}") from None
        return complex(self.branch_flows[k])

    @property
    def losses(self) -> complex:
        topo = self.feeder.topology
        i2 = np.abs(self.branch_currents) ** 2
        return complex(np.sum(topo.z * i2))

    @property
    def slack_power(self) -> complex:
        """Power delivered by the source (p.u.)."""
        topo = self.feeder.topology
        out = topo.from_idx == topo.slack
        s = np.sum(self.sending_power[out])
        return complex(s + np.sum(self.load_power[topo.load_idx == topo.slack]))

    def power_balance(self) -> complex:
        """Residual of source + generation - demand - losses (p.u.)."""
        gen = sum(self.dg_p.values()) / self.feeder.base_mva
        return self.slack_power + gen - complex(np.sum(self.load_power)) - self.losses


def _ratios(feeder: Feeder, taps: dict[str, int]) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative SVR ratio per bus and at each branch's downstream bus."""
    topo = feeder.topology
    c = np.ones(topo.n)
    for svr_id, mask in topo.svr_subtree.items():
        c[mask] *= tap_ratio(taps[svr_id])
    return c, c[topo.branch_bus]


def _demand(feeder: Feeder, vmag: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Net bus demand S = load(V) - DG, per unit, one entry per bus."""
    topo = feeder.topology
    s = np.zeros(topo.n, dtype=complex)
    if topo.load_idx.size:
        s += np.bincount(topo.load_idx, weights=_load_p(topo, vmag), minlength=topo.n)
        s += 1j * np.bincount(topo.load_idx, weights=_load_q(topo, vmag), minlength=topo.n)
    s[topo.dg_idx] -= dg
    return s


def _load_p(topo, vmag):
    v = vmag[topo.load_idx]
    return topo.load_p * (topo.zip_p[:, 0] * v * v + topo.zip_p[:, 1] * v + topo.zip_p[:, 2])


def _load_q(topo, vmag):
    v = vmag[topo.load_idx]
    return topo.load_q * (topo.zip_q[:, 0] * v * v + topo.zip_q[:, 1] * v + topo.zip_q[:, 2])


def solve(
    feeder: Feeder,
    taps: dict[str, int] | None = None,
    dg_p: dict[str, float] | None = None,
    settings: SolverSettings | None = None,
) -> PowerFlowSolution:
    """Solve the feeder for given tap positions and DG output (MW).

    Missing taps default to the feeder's initial taps and missing DG units
    to zero output.  Every solve starts flat: the slack setpoint carried
    through the SVR ratios, zero angle.
    """
    settings = settings or SolverSettings()
    topo = feeder.topology
    taps = {**feeder.initial_taps(), **(taps or {})}
    unknown = set(taps) - {s.id for s in feeder.svrs}
    if unknown:
        raise KeyError(f"unknown svr ids: {sorted(unknown)}")
    for s in feeder.svrs:
        cfg = s.controller
        if not cfg.tap_min <= taps[s.id] <= cfg.tap_max:
            raise ValueError(f"svr {s.id}: tap {taps[s.id]} outside limits")
    dg_p = {d.id: 0.0 for d in feeder.dgs} | dict(dg_p or {})
    for dg_id, p in dg_p.items():
        unit = feeder.dg(dg_id)
        if not -1e-12 <= p <= unit.p_max + 1e-12:
            raise ValueError(f"dg {dg_id}: {p} MW outside [0, {unit.p_max}]")
    dg = np.array([dg_p[i] for i in topo.dg_ids]) / feeder.base_mva

    c, c_to = _ratios(feeder, taps)
    v0 = complex(feeder.slack.slack_setpoint)
    z = topo.z
    desc, desc_t = topo.desc, topo.desc_t
    nonslack = slice(1, None)

    # flat start, scaled through the SVR ratios
    v = c * v0
    s = _demand(feeder, np.abs(v), dg)
    mismatch = np.inf
    for it in range(1, settings.max_iterations + 1):
        i_load = np.conj(s / v)
        j = desc @ (c * i_load) / c_to
        v = c * (v0 - desc_t @ (z * j / c_to))
        v[0] = v0

        vm = np.abs(v)
        low = int(np.argmin(vm))
        if vm[low] < COLLAPSE_V:
            raise VoltageCollapseError(it, topo.order[low], float(vm[low]))

        s = _demand(feeder, vm, dg)
        err = np.abs(v[nonslack] * np.conj(i_load[nonslack]) - s[nonslack])
        worst = int(np.argmax(err)) if err.size else 0
        mismatch = float(err[worst]) if err.size else 0.0
        if mismatch < settings.tolerance:
            break
    else:
        raise ConvergenceError(settings.max_iterations, mismatch, topo.order[worst + 1])

    i_load = np.conj(s / v)
    j = desc @ (c * i_load) / c_to
    # current on the parent side of each branch, then orient per feeder file
    j_up = j * c_to / c[topo.from_idx]
    s_parent = v[topo.from_idx] * np.conj(j_up)
    s_child = v[topo.branch_bus] * np.conj(j)
    flows = np.where(topo.forward, s_parent, -s_child)

    load_power = np.zeros(len(feeder.loads), dtype=complex)
    if topo.load_idx.size:
        load_power = _load_p(topo, vm) + 1j * _load_q(topo, vm)

    return PowerFlowSolution(
        feeder=feeder,
        taps=dict(taps),
        dg_p=dict(dg_p),
        voltages=v,
        branch_currents=j,
        branch_flows=flows,
        sending_power=s_parent,
        load_power=load_power,
        iterations=it,
        max_mismatch=mismatch,
    )


def branch_active_power(sol: PowerFlowSolution, branch: str) -> float:
    """Signed active power in MW, positive from the branch's from bus to its to bus."""
    return sol.flow(branch).real * sol.feeder.base_mva
