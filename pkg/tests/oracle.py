"""Independent scalar reference solutions for tiny feeders.

Written without the package's topology or matrix machinery: plain dicts,
Python complex numbers and a recursive current sum.
"""

from __future__ import annotations

import math


def ratio(tap: int) -> float:
    return 1.0 + 0.00625 * tap


def fixed_point(feeder, taps=None, dg=None, tol=1e-14, max_iter=1000):
    """Bus voltages (complex p.u.) by plain fixed-point iteration."""
    taps = {s.id: s.tap0 for s in feeder.svrs} | dict(taps or {})
    dg = dict(dg or {})
    base = feeder.base_mva
    slack = next(b for b in feeder.buses if b.is_slack)

    # undirected edges: (a, b, z, k) meaning V_b = k V_a - z J_b when a is the parent
    adj: dict[str, list] = {b.id: [] for b in feeder.buses}
    for ln in feeder.lines:
        z = complex(ln.r, ln.x)
        adj[ln.from_bus].append((ln.to_bus, z, 1.0))
        adj[ln.to_bus].append((ln.from_bus, z, 1.0))
    for s in feeder.svrs:
        k = ratio(taps[s.id])
        adj[s.from_bus].append((s.to_bus, 0j, k))
        adj[s.to_bus].append((s.from_bus, 0j, 1.0 / k))

    parent: dict[str, tuple[str, complex, float]] = {}
    order = [slack.id]
    seen = {slack.id}
    for b in order:
        for c, z, k in adj[b]:
            if c not in seen:
                seen.add(c)
                parent[c] = (b, z, k)
                order.append(c)
    children = {b: [c for c in order if c in parent and parent[c][0] == b] for b in order}

    def demand(b, vm):
        s = 0j
        for ld in feeder.loads:
            if ld.bus == b:
                p = ld.p0 * (ld.zp * vm * vm + ld.ip * vm + ld.pp)
                q = ld.q0 * (ld.zq * vm * vm + ld.iq * vm + ld.pq)
                s += complex(p, q)
        for d in feeder.dgs:
            if d.bus == b:
                s -= dg.get(d.id, 0.0)
        return s / base

    v0 = complex(slack.slack_setpoint)
    v = {slack.id: v0}
    for b in order[1:]:
        p, _, k = parent[b]
        v[b] = k * v[p]

    for _ in range(max_iter):
        inj = {b: (demand(b, abs(v[b])) / v[b]).conjugate() for b in order}

        def branch_current(b):
            # current on the child side of the branch feeding b
            total = inj[b]
            for c in children[b]:
                total += parent[c][2] * branch_current(c)
            return total

        new = {slack.id: v0}
        for b in order[1:]:
            p, z, k = parent[b]
            new[b] = k * new[p] - z * branch_current(b)
        delta = max(abs(new[b] - v[b]) for b in order)
        v = new
        if delta < tol:
            return v
    raise RuntimeError("oracle did not converge")


def two_bus_constant_power(v1: float, r: float, x: float, p: float, q: float) -> float:
    """Closed-form load-bus voltage magnitude for a constant-power load (high root)."""
    b = 2 * (p * r + q * x) - v1 * v1
    c = (r * r + x * x) * (p * p + q * q)
    u = (-b + math.sqrt(b * b - 4 * c)) / 2
    return math.sqrt(u)
