from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from conftest import CORPUS, feeder
from hypothesis import given, settings
from hypothesis import strategies as st
from oracle import fixed_point, two_bus_constant_power

from svrsim.netmodel import ZipLoad
from svrsim.powerflow import (
    ConvergenceError,
    SolverSettings,
    VoltageCollapseError,
    branch_active_power,
    solve,
)

TOL = SolverSettings().tolerance
CORPUS_CASES = sorted(p.name for p in CORPUS.glob("*.fdr"))


def no_load(f):
    return dataclasses.replace(f, loads=(), dgs=())


def test_zero_load_gives_flat_profile():
    for name in ("4bus.fdr", "ukgds95.fdr"):
        f = no_load(feeder(name))
        taps = {s.id: 0 for s in f.svrs}
        sol = solve(f, taps)
        v0 = f.slack.slack_setpoint
        assert np.allclose(sol.voltages, v0, atol=1e-15, rtol=0)
        assert np.allclose(sol.branch_flows, 0, atol=1e-15)


def test_two_bus_closed_form():
    f = feeder("2bus_const_power.fdr")
    sol = solve(f)
    expected = two_bus_constant_power(1.0, 0.01, 0.02, 1.0, 0.5)
    assert sol.vmag("L") == pytest.approx(expected, abs=1e-6)
    assert sol.vmag("L") == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("name", CORPUS_CASES)
@pytest.mark.parametrize("dg_frac", [0.0, 0.5, 1.0])
def test_corpus_matches_oracle(name, dg_frac):
    f = feeder(name)
    dg = {d.id: d.p_max * dg_frac for d in f.dgs}
    for taps in ({}, {s.id: -16 for s in f.svrs}, {s.id: 16 for s in f.svrs}):
        sol = solve(f, taps, dg)
        ref = fixed_point(f, taps, dg)
        err = max(abs(sol.v(b) - ref[b]) for b in f.bus_ids)
        assert err < 1e-6
        assert sol.max_mismatch < TOL


def test_ideal_svr_identity():
    f = feeder("4bus.fdr")
    unloaded = no_load(f)
    for tap in (-16, -5, 0, 7, 16):
        sol = solve(unloaded, {"SVR1": tap})
        assert sol.vmag("B3") / sol.vmag("B2") == pytest.approx(1 + 0.00625 * tap, abs=1e-12)
    sol = solve(unloaded, {"SVR1": 16})
    assert sol.vmag("B3") == pytest.approx(1.10 * sol.vmag("B2"), abs=1e-12)


def test_slack_voltage_is_setpoint():
    f = feeder("ukgds95.fdr")
    sol = solve(f, dg_p={"DG1": 2.0})
    assert sol.v(f.slack.id) == complex(f.slack.slack_setpoint)


def test_branch_flow_sign():
    f = feeder("4bus.fdr")
    assert branch_active_power(solve(f, dg_p={"DG1": 0.0}), "SVR1") > 0
    assert branch_active_power(solve(f, dg_p={"DG1": 2.5}), "SVR1") < 0


def test_flow_orientation_follows_file():
    f = feeder("3bus_star.fdr")
    sol = solve(f, dg_p={"G1": 3.0})
    # branch written "b 0": positive means b -> 0, and the DG at b exports
    assert branch_active_power(sol, "b-0") > 0
    sol0 = solve(f, dg_p={"G1": 0.0})
    assert branch_active_power(sol0, "b-0") < 0
    with pytest.raises(KeyError):
        branch_active_power(sol, "0-b")


def test_zero_flow_by_bisection():
    f = feeder("4bus.fdr")
    lo, hi = 0.0, 2.5
    for _ in range(60):
        mid = (lo + hi) / 2
        if branch_active_power(solve(f, dg_p={"DG1": mid}), "SVR1") > 0:
            lo = mid
        else:
            hi = mid
    p = branch_active_power(solve(f, dg_p={"DG1": (lo + hi) / 2}), "SVR1")
    assert abs(p) < 1e-6


def test_reverse_flow_monotone_in_dg():
    f = feeder("4bus.fdr")
    flows = [branch_active_power(solve(f, dg_p={"DG1": p}), "SVR1") for p in np.linspace(0, 2.5, 26)]
    assert all(b < a for a, b in zip(flows, flows[1:]))


def test_determinism():
    f = feeder("ukgds95.fdr")
    a = solve(f, {"SVR1": 5}, {"DG1": 1.3})
    b = solve(f, {"SVR1": 5}, {"DG1": 1.3})
    assert np.array_equal(a.voltages, b.voltages)
    assert np.array_equal(a.branch_flows, b.branch_flows)
    assert a.iterations == b.iterations


@settings(max_examples=150, deadline=None)
@given(
    st.sampled_from(["4bus.fdr", "ukgds95.fdr", *CORPUS_CASES]),
    st.integers(-16, 16),
    st.floats(0, 1),
)
def test_power_balance(name, tap, frac):
    f = feeder(name)
    taps = {s.id: tap for s in f.svrs}
    dg = {d.id: d.p_max * frac for d in f.dgs}
    sol = solve(f, taps, dg)
    bal = sol.power_balance()
    assert abs(bal.real) < 10 * TOL
    assert abs(bal.imag) < 10 * TOL
    assert sol.max_mismatch < TOL


def test_input_validation():
    f = feeder("4bus.fdr")
    with pytest.raises(ValueError):
        solve(f, {"SVR1": 17})
    with pytest.raises(ValueError):
        solve(f, dg_p={"DG1": 3.0})
    with pytest.raises(KeyError):
        solve(f, {"SVR9": 0})
    with pytest.raises(ValueError):
        SolverSettings(tolerance=0)
    with pytest.raises(ValueError):
        SolverSettings(max_iterations=0)


def test_non_convergence_reports_bus():
    f = feeder("ukgds95.fdr")
    with pytest.raises(ConvergenceError) as exc:
        solve(f, settings=SolverSettings(max_iterations=2))
    assert exc.value.iterations == 2
    assert exc.value.bus in f.bus_ids
    assert exc.value.mismatch > TOL


def test_voltage_collapse_guard():
    f = feeder("2bus_const_power.fdr")
    heavy = dataclasses.replace(f, loads=(ZipLoad("L", 500.0, 200.0, 0, 0, 1, 0, 0, 1),))
    with pytest.raises(VoltageCollapseError) as exc:
        solve(heavy)
    assert exc.value.bus == "L"
    assert exc.value.v < 0.5


def test_solution_accessors():
    f = feeder("4bus.fdr")
    sol = solve(f, dg_p={"DG1": 1.0})
    vm = sol.vmag_by_bus()
    assert list(vm) == f.bus_ids
    assert sol.losses.real > 0
    assert sol.flow("B1-B2") == pytest.approx(sol.slack_power, abs=1e-12)
