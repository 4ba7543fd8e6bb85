from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svrsim.svrctl import (
    Activation,
    Side,
    SvrConfig,
    SvrState,
    TapCommand,
    apply_tap,
    initial_state,
    measure,
    select_regulation_point,
    step_timer,
    tap_command,
)

CFG = SvrConfig(v_ref=1.0, deadband_d=0.01, hysteresis_eps=0.0, t1=30.0, t2=5.0)


def command_steps(activations, dt, cfg, state=None):
    """Indices of the steps at which step_timer emits a command."""
    state = state or initial_state(cfg)
    out = []
    for k, act in enumerate(activations):
        state, cmd = step_timer(state, act, dt, cfg)
        if cmd is not None:
            out.append(k)
    return out, state


# -- regulation point ------------------------------------------------------------


def test_select_regulation_point_examples():
    assert select_regulation_point(0.5) is Side.POINT2
    assert select_regulation_point(-0.5) is Side.POINT1
    assert select_regulation_point(0.0, Side.POINT1) is Side.POINT1
    assert select_regulation_point(0.0, Side.POINT2) is Side.POINT2


@given(st.floats(allow_nan=False), st.sampled_from(list(Side)))
def test_select_regulation_point_property(p, prev):
    side = select_regulation_point(p, prev)
    if p > 0:
        assert side is Side.POINT2
    elif p < 0:
        assert side is Side.POINT1
    else:
        assert side is prev


# -- measuring element -----------------------------------------------------------


def test_measure_examples():
    assert measure(1.0, CFG) is Activation.NONE
    assert measure(1.015, CFG) is Activation.LOWER
    assert measure(0.985, CFG) is Activation.RAISE
    assert measure(1.009, CFG, was_active=False) is Activation.NONE
    # the band edge itself is in band (binary-exact values)
    edge = SvrConfig(v_ref=1.0, deadband_d=0.015625)
    assert measure(1.015625, edge) is Activation.NONE
    assert measure(0.984375, edge) is Activation.NONE


def test_full_width_deadband_flag():
    cfg = SvrConfig(deadband_d=0.01, full_width_deadband=True)
    assert cfg.half_band == 0.005
    assert measure(1.007, cfg) is Activation.LOWER
    assert measure(1.007, CFG) is Activation.NONE


@settings(max_examples=2000)
@given(
    st.floats(0.9, 1.1),
    st.floats(0.001, 0.05),
    st.floats(0.0, 0.99),
    st.floats(-0.1, 0.1),
    st.booleans(),
)
def test_hysteresis_retention(v_ref, d, eps_frac, e, was_active):
    eps = d * eps_frac
    cfg = SvrConfig(v_ref=v_ref, deadband_d=d, hysteresis_eps=eps)
    v = v_ref + e
    act = measure(v, cfg, was_active)
    err = v - v_ref
    outside = abs(err) > d
    retained = was_active and abs(err) > d - eps
    if outside or retained:
        assert act is (Activation.LOWER if err > 0 else Activation.RAISE)
    else:
        assert act is Activation.NONE
    # eps = 0 reduces to a plain deadband comparator
    plain = SvrConfig(v_ref=v_ref, deadband_d=d)
    assert measure(v, plain, True) is measure(v, plain, False)


def test_config_invariants():
    with pytest.raises(ValueError):
        SvrConfig(deadband_d=-0.01)
    with pytest.raises(ValueError):
        SvrConfig(deadband_d=0.01, hysteresis_eps=0.01)
    with pytest.raises(ValueError):
        SvrConfig(t1=5, t2=30)
    with pytest.raises(ValueError):
        SvrConfig(t2=-1, t1=0)


# -- timers ------------------------------------------------------------------------


def test_first_command_after_t1():
    # violation from t = 80 s on a 1 s grid -> first command at t = 110 s
    acts = [Activation.NONE] * 80 + [Activation.LOWER] * 60
    steps, _ = command_steps(acts, 1.0, CFG)
    assert steps[0] == 110
    assert steps[1] == 115
    assert steps[2] == 120


def test_violation_clearing_cancels_pending_command():
    acts = [Activation.NONE] * 80 + [Activation.LOWER] * 15 + [Activation.NONE] * 40
    steps, state = command_steps(acts, 1.0, CFG)
    assert steps == []
    assert state.armed_first is True
    assert state.timer_remaining is None


def test_t1_reapplies_after_return_to_band():
    acts = [Activation.RAISE] * 36 + [Activation.NONE] + [Activation.RAISE] * 40
    steps, _ = command_steps(acts, 1.0, CFG)
    assert steps[:3] == [30, 35, 67]


def test_dt_must_be_positive():
    with pytest.raises(ValueError):
        step_timer(SvrState(), Activation.LOWER, 0.0, CFG)


def expected_steps(t, dt):
    return max(1, math.ceil(t / dt - 1e-9))


@st.composite
def timer_cases(draw):
    dt = draw(st.sampled_from([0.05, 0.1, 0.25, 0.5, 1.0, 2.0]))

    def delay():
        m = draw(st.integers(0, 60))
        f = draw(st.sampled_from([0.0, 0.25, 0.5, 0.9]))
        return dt * (m + f)

    a, b = delay(), delay()
    return dt, max(a, b), min(a, b), draw(st.integers(0, 20)), draw(st.integers(1, 200))


@settings(max_examples=2000, deadline=None)
@given(timer_cases())
def test_t1_t2_spacing(case):
    dt, t1, t2, onset, held = case
    cfg = SvrConfig(t1=t1, t2=t2)
    acts = [Activation.NONE] * onset + [Activation.LOWER] * held
    steps, _ = command_steps(acts, dt, cfg)
    first = onset + (math.ceil(t1 / dt - 1e-9))
    gap = expected_steps(t2, dt)
    want = list(range(first, onset + held, gap)) if first < onset + held else []
    assert steps == want


@settings(max_examples=2000, deadline=None)
@given(
    st.lists(st.floats(-0.0099, 0.0099), min_size=1, max_size=80),
    st.sampled_from([0.1, 1.0]),
    st.floats(0.0, 0.009),
)
def test_deadband_quiescence(errors, dt, eps):
    cfg = SvrConfig(deadband_d=0.01, hysteresis_eps=eps, t1=0.0, t2=0.0)
    state = initial_state(cfg)
    active = False
    for e in errors:
        act = measure(1.0 + e, cfg, active)
        active = act is not Activation.NONE
        state, cmd = step_timer(state, act, dt, cfg)
        assert act is Activation.NONE
        assert cmd is None


# -- tap changer ----------------------------------------------------------------------


def test_apply_tap_examples():
    s = apply_tap(SvrState(tap=15), TapCommand.RAISE, CFG)
    assert (s.tap, s.op_count, s.at_limit) == (16, 1, True)
    s2 = apply_tap(s, TapCommand.RAISE, CFG)
    assert (s2.tap, s2.op_count, s2.at_limit) == (16, 1, True)
    assert apply_tap(SvrState(tap=0), TapCommand.LOWER).tap == -1


def test_tap_command_direction():
    assert tap_command(Activation.NONE, Side.POINT2) is None
    assert tap_command(Activation.RAISE, Side.POINT2) is TapCommand.RAISE
    assert tap_command(Activation.LOWER, Side.POINT2) is TapCommand.LOWER
    # at point 1 the ratio acts inversely on the regulated voltage
    assert tap_command(Activation.LOWER, Side.POINT1) is TapCommand.RAISE
    assert tap_command(Activation.RAISE, Side.POINT1) is TapCommand.LOWER


@settings(max_examples=2000)
@given(st.integers(-16, 16), st.lists(st.sampled_from(list(TapCommand)), max_size=100))
def test_tap_bounds(tap0, commands):
    state = initial_state(CFG, tap0)
    moves = 0
    for c in commands:
        new = apply_tap(state, c, CFG)
        assert -16 <= new.tap <= 16
        assert abs(new.tap - state.tap) <= 1
        assert new.op_count >= state.op_count
        moves += new.tap != state.tap
        assert new.at_limit == (new.tap in (-16, 16))
        state = new
    assert state.op_count == moves
