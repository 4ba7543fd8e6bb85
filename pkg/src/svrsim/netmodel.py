"""Feeder data model, feeder file parser and ZIP load evaluation.

A feeder file is line-oriented UTF-8 text.  Lines starting with ``#`` are
comments, blank lines are ignored, and ``[section]`` headers switch the
current section.  Column order per section::

    [base]   base_mva
    [buses]  id base_kv pq
             id base_kv slack v_setpoint_pu
    [lines]  from to r_pu x_pu
    [svr]    id from to v_ref deadband_d hysteresis_eps t1_s t2_s [tap0]
    [loads]  bus p_mw q_mvar [zp ip pp zq iq pq]
    [dg]     id bus p_max_mw

All impedances are per unit on the system base.  Loads without ZIP columns
get the default 40 % constant impedance / 30 % constant current / 30 %
constant power split for both P and Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from svrsim.svrctl import SvrConfig

TAP_MIN = -16
TAP_MAX = 16
TAP_STEPS_PER_UNIT = 160  # 1 / 0.00625

DEFAULT_ZIP = (0.4, 0.3, 0.3)
ZIP_TOL = 1e-9

SECTIONS = ("base", "buses", "lines", "svr", "loads", "dg")


class FeederError(ValueError):
    """Base class for feeder definition problems."""


class FeederParseError(FeederError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class TopologyError(FeederError):
    """Raised when the branch graph is not a single radial tree."""


@dataclass(frozen=True)
class Bus:
    id: str
    base_kv: float
    is_slack: bool = False
    slack_setpoint: float | None = None

    def __post_init__(self) -> None:
        if not self.base_kv > 0:
            raise FeederError(f"bus {self.id}: base_kv must be positive")
        if self.is_slack:
            if self.slack_setpoint is None or not 0.8 <= self.slack_setpoint <= 1.2:
                raise FeederError(f"bus {self.id}: slack setpoint must lie in [0.8, 1.2] p.u.")
        elif self.slack_setpoint is not None:
            raise FeederError(f"bus {self.id}: only the slack bus carries a setpoint")


@dataclass(frozen=True)
class LineBranch:
    from_bus: str
    to_bus: str
    r: float
    x: float

    def __post_init__(self) -> None:
        if self.r < 0:
            raise FeederError(f"line {self.name}: negative resistance")
        if abs(complex(self.r, self.x)) == 0:
            raise FeederError(f"line {self.name}: zero impedance")

    @property
    def name(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)


@dataclass(frozen=True)
class SvrBranch:
    """Ideal ratio transformer; ``from_bus`` is point 1, ``to_bus`` point 2."""

    id: str
    from_bus: str
    to_bus: str
    controller: SvrConfig
    tap0: int = 0

    def __post_init__(self) -> None:
        if not self.controller.tap_min <= self.tap0 <= self.controller.tap_max:
            raise FeederError(f"svr {self.id}: initial tap {self.tap0} outside limits")

    @property
    def name(self) -> str:
        return self.id


@dataclass(frozen=True)
class ZipLoad:
    bus: str
    p0: float
    q0: float
    zp: float = DEFAULT_ZIP[0]
    ip: float = DEFAULT_ZIP[1]
    pp: float = DEFAULT_ZIP[2]
    zq: float = DEFAULT_ZIP[0]
    iq: float = DEFAULT_ZIP[1]
    pq: float = DEFAULT_ZIP[2]

    def __post_init__(self) -> None:
        if self.p0 < 0:
            raise FeederError(f"load at {self.bus}: negative p0")
        if abs(self.zp + self.ip + self.pp - 1.0) > ZIP_TOL:
            raise FeederError(f"load at {self.bus}: active ZIP fractions do not sum to 1")
        if abs(self.zq + self.iq + self.pq - 1.0) > ZIP_TOL:
            raise FeederError(f"load at {self.bus}: reactive ZIP fractions do not sum to 1")


@dataclass(frozen=True)
class DgUnit:
    """Unity power factor generator; reactive output is always zero."""

    id: str
    bus: str
    p_max: float

    q: float = field(default=0.0, init=False)

    def __post_init__(self) -> None:
        if self.p_max < 0:
            raise FeederError(f"dg {self.id}: negative p_max")


@dataclass(frozen=True)
class Feeder:
    buses: tuple[Bus, ...]
    lines: tuple[LineBranch, ...]
    svrs: tuple[SvrBranch, ...]
    loads: tuple[ZipLoad, ...] = ()
    dgs: tuple[DgUnit, ...] = ()
    base_mva: float = 10.0
    name: str = "feeder"

    def __post_init__(self) -> None:
        validate(self)
        self.topology  # noqa: B018  (builds the tree, checks svr orientation)

    @property
    def slack(self) -> Bus:
        return next(b for b in self.buses if b.is_slack)

    @property
    def bus_ids(self) -> list[str]:
        return [b.id for b in self.buses]

    @property
    def branches(self) -> tuple[LineBranch | SvrBranch, ...]:
        return self.lines + self.svrs

    def branch(self, name: str) -> LineBranch | SvrBranch:
        for br in self.branches:
            if br.name == name:
                return br
        raise KeyError(f"unknown branch {name!r}")

    def svr(self, svr_id: str) -> SvrBranch:
        for s in self.svrs:
            if s.id == svr_id:
                return s
        raise KeyError(f"unknown svr {svr_id!r}")

    def dg(self, dg_id: str) -> DgUnit:
        for d in self.dgs:
            if d.id == dg_id:
                return d
        raise KeyError(f"unknown dg {dg_id!r}")

    def initial_taps(self) -> dict[str, int]:
        return {s.id: s.tap0 for s in self.svrs}

    @cached_property
    def topology(self) -> Topology:
        return Topology(self)


class Topology:
    """Index arrays for the radial tree, rooted at the slack bus.

    Every non-slack bus has exactly one parent branch, so branches are
    indexed by their downstream bus.  ``desc[b, k]`` is 1 when bus ``k``
    lies in the subtree fed by branch ``b`` (its downstream bus included).
    """

    def __init__(self, feeder: Feeder):
        ids = feeder.bus_ids
        slack = feeder.slack.id
        adj: dict[str, list[tuple[str, LineBranch | SvrBranch]]] = {i: [] for i in ids}
        for br in feeder.branches:
            adj[br.from_bus].append((br.to_bus, br))
            adj[br.to_bus].append((br.from_bus, br))

        order = [slack]
        parent_branch: dict[str, LineBranch | SvrBranch] = {}
        parent_bus: dict[str, str] = {}
        seen = {slack}
        i = 0
        while i < len(order):
            u = order[i]
            i += 1
            for w, br in adj[u]:
                if w not in seen:
                    seen.add(w)
                    parent_bus[w] = u
                    parent_branch[w] = br
                    order.append(w)

        for bus, br in parent_branch.items():
            if isinstance(br, SvrBranch) and br.to_bus != bus:
                raise TopologyError(
                    f"svr {br.id}: point 2 ({br.to_bus}) must be downstream of point 1"
                )

        self.order = order  # breadth-first from the slack
        self.index = {b: k for k, b in enumerate(order)}
        self.n = len(order)
        self.slack = 0
        # branch arrays, one entry per non-slack bus in BFS order
        self.branch_bus = np.arange(1, self.n)
        self.branches = [parent_branch[b] for b in order[1:]]
        self.branch_index = {br.name: k for k, br in enumerate(self.branches)}
        self.from_idx = np.array([self.index[parent_bus[b]] for b in order[1:]], dtype=int)
        # False when the branch is written child -> parent in the feeder file
        self.forward = np.array([br.from_bus == parent_bus[b] for b, br in zip(order[1:], self.branches)])
        self.z = np.array(
            [br.z if isinstance(br, LineBranch) else 0j for br in self.branches], dtype=complex
        )
        self.r = self.z.real.copy()
        self.svr_branch = {
            br.id: k for k, br in enumerate(self.branches) if isinstance(br, SvrBranch)
        }

        desc = np.zeros((self.n - 1, self.n))
        for bus in order[1:]:
            b = bus
            # walk up to the root marking every branch on the path
            while b != slack:
                desc[self.index[b] - 1, self.index[bus]] = 1.0
                b = parent_bus[b]
        self.desc = desc
        self.svr_subtree = {svr_id: desc[k].astype(bool) for svr_id, k in self.svr_branch.items()}
        self.desc_t = np.ascontiguousarray(desc.T)

        base = feeder.base_mva
        self.load_idx = np.array([self.index[ld.bus] for ld in feeder.loads], dtype=int)
        self.load_p = np.array([ld.p0 for ld in feeder.loads]) / base
        self.load_q = np.array([ld.q0 for ld in feeder.loads]) / base
        self.zip_p = np.array([[ld.zp, ld.ip, ld.pp] for ld in feeder.loads]).reshape(-1, 3)
        self.zip_q = np.array([[ld.zq, ld.iq, ld.pq] for ld in feeder.loads]).reshape(-1, 3)
        self.dg_idx = np.array([self.index[d.bus] for d in feeder.dgs], dtype=int)
        self.dg_ids = [d.id for d in feeder.dgs]


def tap_ratio(tap: int) -> float:
    """Per-unit turns ratio for an integer tap position (0.625 % per step)."""
    if isinstance(tap, bool) or int(tap) != tap:
        raise ValueError(f"tap must be an integer, got {tap!r}")
    if not TAP_MIN <= tap <= TAP_MAX:
        raise ValueError(f"tap {tap} outside [{TAP_MIN}, {TAP_MAX}]")
    return (TAP_STEPS_PER_UNIT + int(tap)) / TAP_STEPS_PER_UNIT


def zip_power(load: ZipLoad, v: float) -> complex:
    """Load demand in MW + j MVAr at voltage magnitude ``v`` (p.u.)."""
    v2 = v * v
    p = load.p0 * (load.zp * v2 + load.ip * v + load.pp)
    q = load.q0 * (load.zq * v2 + load.iq * v + load.pq)
    return complex(p, q)


def validate(feeder: Feeder) -> None:
    """Check references, slack uniqueness and radiality."""
    if not feeder.base_mva > 0:
        raise FeederError("base_mva must be positive")
    ids = [b.id for b in feeder.buses]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise FeederError(f"duplicate bus ids: {', '.join(dup)}")
    slacks = [b.id for b in feeder.buses if b.is_slack]
    if len(slacks) != 1:
        raise TopologyError(f"feeder needs exactly one slack bus, found {len(slacks)}")

    known = set(ids)
    for br in feeder.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise FeederError(f"branch {br.name} references undefined bus {end!r}")
        if br.from_bus == br.to_bus:
            raise TopologyError(f"branch {br.name} is a self loop")
    for ld in feeder.loads:
        if ld.bus not in known:
            raise FeederError(f"load references undefined bus {ld.bus!r}")
    for dg in feeder.dgs:
        if dg.bus not in known:
            raise FeederError(f"dg {dg.id} references undefined bus {dg.bus!r}")
    names = [br.name for br in feeder.branches]
    if len(set(names)) != len(names):
        raise FeederError("duplicate branch names")
    dg_ids = [d.id for d in feeder.dgs]
    if len(set(dg_ids)) != len(dg_ids):
        raise FeederError("duplicate dg ids")

    if len(feeder.branches) != len(ids) - 1:
        _find_cycle_or_island(feeder)
        raise TopologyError(
            f"radial feeder with {len(ids)} buses needs {len(ids) - 1} branches, "
            f"found {len(feeder.branches)}"
        )
    _find_cycle_or_island(feeder)


def _find_cycle_or_island(feeder: Feeder) -> None:
    adj: dict[str, list[str]] = {b.id: [] for b in feeder.buses}
    for br in feeder.branches:
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    root = feeder.slack.id
    parent = {root: None}
    stack = [root]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w == parent[u]:
                continue
            if w in parent:
                raise TopologyError(f"branch graph contains a cycle through bus {w}")
            parent[w] = u
            stack.append(w)
    missing = [b for b in adj if b not in parent]
    if missing:
        raise TopologyError(f"buses not connected to the slack: {', '.join(missing)}")


def _float(tok: str, what: str, lineno: int, path: str | None) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise FeederParseError(f"{what}: expected a number, got {tok!r}", lineno, path) from None
    if not math.isfinite(val):
        raise FeederParseError(f"{what}: value must be finite", lineno, path)
    return val


def _int(tok: str, what: str, lineno: int, path: str | None) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FeederParseError(f"{what}: expected an integer, got {tok!r}", lineno, path) from None


def parse_feeder(text: str, name: str = "feeder", path: str | None = None) -> Feeder:
    """Parse feeder definition text; see the module docstring for the grammar."""
    section = None
    base_mva = None
    buses: list[Bus] = []
    lines: list[LineBranch] = []
    svrs: list[SvrBranch] = []
    loads: list[ZipLoad] = []
    dgs: list[DgUnit] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise FeederParseError(f"malformed section header {stripped!r}", lineno, path)
            section = stripped[1:-1].strip().lower()
            if section not in SECTIONS:
                raise FeederParseError(f"unknown section [{section}]", lineno, path)
            continue
        if section is None:
            raise FeederParseError("data line before any section header", lineno, path)

        tok = stripped.split()
        n = len(tok)
        try:
            if section == "base":
                if n != 1:
                    raise FeederParseError(f"[base] expects 1 field, got {n}", lineno, path)
                if base_mva is not None:
                    raise FeederParseError("[base] given twice", lineno, path)
                base_mva = _float(tok[0], "base_mva", lineno, path)
            elif section == "buses":
                if n == 3 and tok[2].lower() == "pq":
                    buses.append(Bus(tok[0], _float(tok[1], "base_kv", lineno, path)))
                elif n == 4 and tok[2].lower() == "slack":
                    buses.append(
                        Bus(
                            tok[0],
                            _float(tok[1], "base_kv", lineno, path),
                            True,
                            _float(tok[3], "v_setpoint", lineno, path),
                        )
                    )
                else:
                    raise FeederParseError(
                        "[buses] expects 'id base_kv pq' or 'id base_kv slack v_pu'", lineno, path
                    )
            elif section == "lines":
                if n != 4:
                    raise FeederParseError(f"[lines] expects 4 fields, got {n}", lineno, path)
                lines.append(
                    LineBranch(
                        tok[0],
                        tok[1],
                        _float(tok[2], "r_pu", lineno, path),
                        _float(tok[3], "x_pu", lineno, path),
                    )
                )
            elif section == "svr":
                if n not in (8, 9):
                    raise FeederParseError(f"[svr] expects 8 or 9 fields, got {n}", lineno, path)
                cfg = SvrConfig(
                    v_ref=_float(tok[3], "v_ref", lineno, path),
                    deadband_d=_float(tok[4], "deadband_d", lineno, path),
                    hysteresis_eps=_float(tok[5], "hysteresis_eps", lineno, path),
                    t1=_float(tok[6], "t1", lineno, path),
                    t2=_float(tok[7], "t2", lineno, path),
                )
                tap0 = _int(tok[8], "tap0", lineno, path) if n == 9 else 0
                svrs.append(SvrBranch(tok[0], tok[1], tok[2], cfg, tap0))
            elif section == "loads":
                if n not in (3, 9):
                    raise FeederParseError(f"[loads] expects 3 or 9 fields, got {n}", lineno, path)
                vals = [_float(t, "load field", lineno, path) for t in tok[1:]]
                loads.append(ZipLoad(tok[0], *vals))
            elif section == "dg":
                if n != 3:
                    raise FeederParseError(f"[dg] expects 3 fields, got {n}", lineno, path)
                dgs.append(DgUnit(tok[0], tok[1], _float(tok[2], "p_max_mw", lineno, path)))
        except FeederParseError:
            raise
        except ValueError as exc:
            # field-level invariant violations from the dataclasses
            raise FeederParseError(str(exc), lineno, path) from None

    return Feeder(
        buses=tuple(buses),
        lines=tuple(lines),
        svrs=tuple(svrs),
        loads=tuple(loads),
        dgs=tuple(dgs),
        base_mva=10.0 if base_mva is None else base_mva,
        name=name,
    )


def load_feeder(path: str | Path) -> Feeder:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_feeder(text, name=path.stem, path=str(path))


def dump_feeder(feeder: Feeder) -> str:
    """Serialize a feeder back to the file grammar (``repr`` floats, lossless)."""
    out = ["[base]", repr(feeder.base_mva), "", "[buses]"]
    for b in feeder.buses:
        if b.is_slack:
            out.append(f"{b.id} {b.base_kv!r} slack {b.slack_setpoint!r}")
        else:
            out.append(f"{b.id} {b.base_kv!r} pq")
    out += ["", "[lines]"]
    out += [f"{ln.from_bus} {ln.to_bus} {ln.r!r} {ln.x!r}" for ln in feeder.lines]
    out += ["", "[svr]"]
    for s in feeder.svrs:
        c = s.controller
        out.append(
            f"{s.id} {s.from_bus} {s.to_bus} {c.v_ref!r} {c.deadband_d!r} "
            f"{c.hysteresis_eps!r} {c.t1!r} {c.t2!r} {s.tap0}"
        )
    out += ["", "[loads]"]
    for ld in feeder.loads:
        out.append(
            f"{ld.bus} {ld.p0!r} {ld.q0!r} {ld.zp!r} {ld.ip!r} {ld.pp!r} "
            f"{ld.zq!r} {ld.iq!r} {ld.pq!r}"
        )
    out += ["", "[dg]"]
    out += [f"{d.id} {d.bus} {d.p_max!r}" for d in feeder.dgs]
    return "\n".join(out) + "\n"


def bundled_path(name: str) -> Path:
    """Path of a data file shipped with the package (feeders, scenarios)."""
    return Path(__file__).parent / "data" / name
