"""Generate the bundled representative 95-bus, 11 kV radial feeder.

Topology is fixed; impedances and loads come from a seeded RNG and three
scale factors are then solved for so that, with the 2 MW ramp and the SVR
at its initial tap:

* SVR active power reverses at t = 95 s,
* the source-side SVR bus (24) reaches v_ref + D at t = 115 s,
* the load-side SVR bus (23) sits at v_ref at t = 0.

Usage: python scripts/make_ukgds95.py > src/svrsim/data/ukgds95.fdr
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import least_squares

from svrsim.netmodel import Bus, DgUnit, Feeder, LineBranch, SvrBranch, ZipLoad, dump_feeder
from svrsim.powerflow import branch_active_power, solve
from svrsim.scenarios import RampProfile
from svrsim.svrctl import SvrConfig

SEED = 95
BASE_KV = 11.0
BASE_MVA = 10.0
V_REF = 0.98
TAP0 = 1
RAMP = RampProfile(2.0)
T_REVERSAL = 95.0
T_UPSTREAM_CROSS = 115.0

# (zp, ip, pp) for P and Q per consumer class; representative values
CLASSES = {
    "industrial": ((0.10, 0.20, 0.70), (0.50, 0.30, 0.20)),
    "commercial": ((0.30, 0.40, 0.30), (0.60, 0.30, 0.10)),
    "domestic_unrestricted": ((0.45, 0.35, 0.20), (0.70, 0.20, 0.10)),
    "domestic_economy": ((0.50, 0.30, 0.20), (0.70, 0.20, 0.10)),
}


def layout():
    """Return (edges, upstream_trunk, downstream buses) with string bus ids."""
    edges = []
    trunk = [str(i) for i in range(1, 23)] + ["24"]
    edges += list(zip(trunk[:-1], trunk[1:]))
    # laterals off the upstream trunk use buses 41..95
    rng = np.random.default_rng(SEED)
    nxt = 41
    taps_from = [3, 5, 6, 8, 10, 11, 13, 15, 17, 18, 20, 21]
    lat_buses = []
    k = 0
    while nxt <= 95:
        root = str(taps_from[k % len(taps_from)])
        k += 1
        length = min(int(rng.integers(3, 7)), 96 - nxt)
        prev = root
        for _ in range(length):
            edges.append((prev, str(nxt)))
            lat_buses.append(str(nxt))
            prev = str(nxt)
            nxt += 1
    down_trunk = ["23"] + [str(i) for i in range(25, 35)]
    down_edges = list(zip(down_trunk[:-1], down_trunk[1:]))
    down_edges += [("28", "35")] + [(str(i), str(i + 1)) for i in range(35, 40)]
    downstream = down_trunk + [str(i) for i in range(35, 41)]
    return edges, trunk, lat_buses, down_edges, downstream


def build(scales, digits: int | None = None) -> Feeder:
    z_up, load_up, load_down = scales
    rng = np.random.default_rng(SEED)
    rnd = (lambda v: round(float(v), digits)) if digits else float
    edges, trunk, lat_buses, down_edges, downstream = layout()
    buses = [Bus("1", BASE_KV, True, 1.0)]
    ids = sorted({b for e in edges + down_edges for b in e} - {"1"}, key=int)
    buses += [Bus(b, BASE_KV) for b in ids]

    trunk_edges = set(zip(trunk[:-1], trunk[1:]))
    lines = []
    for a, b in edges:
        if (a, b) in trunk_edges:
            r = rng.uniform(0.004, 0.010) * z_up
            x = r * rng.uniform(0.9, 1.3)
        else:
            r = rng.uniform(0.010, 0.030)
            x = r * rng.uniform(0.5, 0.9)
        lines.append(LineBranch(a, b, rnd(r), rnd(x)))
    for a, b in down_edges:
        r = rng.uniform(0.006, 0.015)
        lines.append(LineBranch(a, b, rnd(r), rnd(r * rng.uniform(0.6, 1.0))))

    names = list(CLASSES)
    loads = []
    for b in ids:
        cls = names[int(rng.integers(len(names)))]
        p = rng.uniform(0.5, 1.5)
        pf = rng.uniform(0.92, 0.98)
        scale = load_down if b in downstream else load_up
        p_mw = p * scale
        q_mvar = p_mw * np.tan(np.arccos(pf))
        (zp, ip, pp), (zq, iq, pq) = CLASSES[cls]
        loads.append(ZipLoad(b, rnd(p_mw), rnd(q_mvar), zp, ip, pp, zq, iq, pq))

    cfg = SvrConfig(V_REF, 0.01, 0.0, 30.0, 5.0)
    svr = SvrBranch("SVR1", "24", "23", cfg, TAP0)
    dg = DgUnit("DG1", "34", 2.5)
    return Feeder(tuple(buses), tuple(lines), (svr,), tuple(loads), (dg,), BASE_MVA, "ukgds95")


def residuals(scales):
    f = build(scales)
    taps = {"SVR1": TAP0}
    r_rev = branch_active_power(solve(f, taps, {"DG1": RAMP.power(T_REVERSAL)}), "SVR1")
    v_cross = solve(f, taps, {"DG1": RAMP.power(T_UPSTREAM_CROSS)}).vmag("24") - (V_REF + 0.01)
    v0 = solve(f, taps, {"DG1": 0.0}).vmag("23") - V_REF
    return [r_rev, 10 * v_cross, 10 * v0]


def main() -> None:
    fit = least_squares(residuals, x0=[1.0, 0.05, 0.05], bounds=([0.1, 0.001, 0.001], [10, 1, 1]))
    f = build(fit.x, digits=6)
    header = [
        "# Representative 95-bus 11 kV radial feeder (UKGDS-like), generated by",
        "# scripts/make_ukgds95.py (seed %d). Not the published UKGDS dataset." % SEED,
        "# Upstream trunk 1..22 -> 24, SVR 24 (source side) -> 23 (load side),",
        "# downstream buses 23, 25..40 with the DG at bus 34.",
        "# Scale factors (trunk impedance, upstream load, downstream load): "
        + ", ".join(f"{s:.6g}" for s in fit.x),
        "# chosen so that with the 2 MW ramp the SVR flow reverses at 95 s and",
        "# bus 24 reaches v_ref + D at 115 s; bus 23 starts at v_ref.",
        "# Load classes (P zip / Q zip): "
        + "; ".join(f"{k} {p}/{q}" for k, (p, q) in CLASSES.items()),
        "",
    ]
    print("\n".join(header) + dump_feeder(f), end="")


if __name__ == "__main__":
    main()
