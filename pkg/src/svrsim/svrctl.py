"""Step voltage regulator controller.

The controller is a chain of pure functions over an explicit ``SvrState``:

    select_regulation_point -> measure -> step_timer -> apply_tap

Engines own the state and decide when the network is re-solved.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

TIMER_TOL = 1e-9


class Side(enum.Enum):
    POINT1 = "point1"  # source side (from bus)
    POINT2 = "point2"  # load side (to bus)


class Activation(enum.Enum):
    """Voltage correction requested by the measuring element."""

    NONE = "none"
    RAISE = "raise"
    LOWER = "lower"


class TapCommand(enum.Enum):
    RAISE = "raise"
    LOWER = "lower"


@dataclass(frozen=True)
class SvrConfig:
    v_ref: float = 1.0
    deadband_d: float = 0.01
    hysteresis_eps: float = 0.0
    t1: float = 30.0
    t2: float = 5.0
    tap_min: int = -16
    tap_max: int = 16
    step: float = 0.00625
    # deadband_d given as the full band width instead of the half width
    full_width_deadband: bool = False

    def __post_init__(self) -> None:
        if self.deadband_d < 0:
            raise ValueError("deadband_d must be non-negative")
        if self.hysteresis_eps < 0:
            raise ValueError("hysteresis_eps must be non-negative")
        if self.hysteresis_eps > 0 and not self.hysteresis_eps < self.half_band:
            raise ValueError("hysteresis_eps must be smaller than the deadband half width")
        if not self.t1 >= self.t2 >= 0:
            raise ValueError("timer delays must satisfy t1 >= t2 >= 0")
        if not self.tap_min <= 0 <= self.tap_max:
            raise ValueError("tap limits must bracket the neutral position")

    @property
    def half_band(self) -> float:
        return self.deadband_d / 2 if self.full_width_deadband else self.deadband_d


@dataclass(frozen=True)
class SvrState:
    tap: int = 0
    regulated_side: Side = Side.POINT2
    timer_remaining: float | None = None
    armed_first: bool = True
    op_count: int = 0
    at_limit: bool = False

    @property
    def timer_active(self) -> bool:
        return self.timer_remaining is not None


def initial_state(cfg: SvrConfig, tap: int = 0) -> SvrState:
    return SvrState(tap=tap, at_limit=tap in (cfg.tap_min, cfg.tap_max))


def select_regulation_point(p_flow: float, previous: Side = Side.POINT2) -> Side:
    """Bidirectional mode: regulate the load side under direct flow,
    the source side under reverse flow, and keep the last side at zero."""
    if p_flow > 0:
        return Side.POINT2
    if p_flow < 0:
        return Side.POINT1
    return previous


def measure(v_in: float, cfg: SvrConfig, was_active: bool = False) -> Activation:
    err = v_in - cfg.v_ref
    band = cfg.half_band
    if abs(err) > band or (was_active and abs(err) > band - cfg.hysteresis_eps):
        return Activation.LOWER if err > 0 else Activation.RAISE
    return Activation.NONE


def tap_command(activation: Activation, side: Side) -> TapCommand | None:
    """Map a voltage correction to a tap movement.

    Seen from point 1 the transformer ratio is inverted, so lowering the
    point-1 voltage calls for raising the tap.
    """
    if activation is Activation.NONE:
        return None
    raise_voltage = activation is Activation.RAISE
    if side is Side.POINT1:
        raise_voltage = not raise_voltage
    return TapCommand.RAISE if raise_voltage else TapCommand.LOWER


def step_timer(
    state: SvrState, activation: Activation, dt: float, cfg: SvrConfig
) -> tuple[SvrState, TapCommand | None]:
    """Advance the tap changer timer relay by one step of length ``dt``.

    A violation episode starts its timer at ``t1`` on the step where it is
    first seen.  After a command the relay re-arms at ``t2``, measured from
    the command instant, as long as the violation persists.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if activation is Activation.NONE:
        return replace(state, timer_remaining=None, armed_first=True), None

    if state.timer_remaining is None:
        remaining = cfg.t1 if state.armed_first else cfg.t2 - dt
    else:
        remaining = state.timer_remaining - dt

    if remaining <= TIMER_TOL:
        cmd = tap_command(activation, state.regulated_side)
        return replace(state, timer_remaining=None, armed_first=False), cmd
    return replace(state, timer_remaining=remaining), None


def apply_tap(state: SvrState, command: TapCommand, cfg: SvrConfig | None = None) -> SvrState:
    cfg = cfg or SvrConfig()
    delta = 1 if command is TapCommand.RAISE else -1
    new_tap = min(max(state.tap + delta, cfg.tap_min), cfg.tap_max)
    moved = new_tap != state.tap
    return replace(
        state,
        tap=new_tap,
        op_count=state.op_count + (1 if moved else 0),
        at_limit=new_tap in (cfg.tap_min, cfg.tap_max),
    )
