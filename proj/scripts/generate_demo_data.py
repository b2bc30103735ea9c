#!/usr/bin/env python3
"""Regenerates the bundled demo feeder, fleet, profiles and error history.

Deterministic (fixed seeds); outputs land in data/. Run from the repo root:

    python3 scripts/generate_demo_data.py
"""
import json
import math
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "data")

# ---------------------------------------------------------------------------
# Feeder: 25 buses, 4.16 kV, radial, mixed 3/2/1-phase laterals.
# ---------------------------------------------------------------------------

# ohm per km
Z3_SELF = complex(0.19, 0.40)
Z3_MUT = complex(0.06, 0.17)
ZL_SELF = complex(0.35, 0.45)   # lateral conductor
ZL_MUT = complex(0.08, 0.18)
Z1_SELF = complex(0.45, 0.50)   # single-phase spur

BUSES = {
    1: "abc", 2: "abc", 3: "abc", 4: "abc", 5: "abc", 6: "abc", 7: "abc",
    8: "abc", 9: "abc", 10: "abc", 11: "ab", 12: "ab", 13: "a", 14: "c",
    15: "c", 16: "abc", 17: "abc", 18: "b", 19: "abc", 20: "abc", 21: "a",
    22: "bc", 23: "b", 24: "abc", 25: "a",
}

# (from, to, phases, km, kind, i_max A)
LINES = [
    (1, 2, "abc", 0.35, "trunk", 260),
    (2, 3, "abc", 0.35, "trunk", 260),
    (3, 4, "abc", 0.35, "trunk", 260),
    (4, 5, "abc", 0.35, "trunk", 260),
    (5, 6, "abc", 0.35, "trunk", 240),
    (6, 7, "abc", 0.35, "trunk", 240),
    (7, 8, "abc", 0.35, "trunk", 240),
    (8, 9, "abc", 0.40, "trunk", 220),
    (9, 10, "abc", 0.40, "trunk", 220),
    (3, 24, "abc", 0.50, "lat", 120),
    (24, 25, "a", 0.40, "spur", 80),
    (4, 11, "ab", 0.45, "lat", 100),
    (11, 12, "ab", 0.40, "lat", 100),
    (12, 13, "a", 0.35, "spur", 80),
    (5, 14, "c", 0.45, "spur", 80),
    (14, 15, "c", 0.40, "spur", 80),
    (6, 16, "abc", 0.50, "lat", 140),
    (16, 17, "abc", 0.45, "lat", 140),
    (17, 18, "b", 0.35, "spur", 80),
    (9, 19, "abc", 0.50, "lat", 140),
    (19, 20, "abc", 0.45, "lat", 140),
    (20, 21, "a", 0.35, "spur", 80),
    (10, 22, "bc", 0.45, "lat", 100),
    (22, 23, "b", 0.35, "spur", 80),
]

# bus -> (total kW at shape=1, tan_theta)
LOADS = {
    2: (45, 0.3287), 3: (60, 0.3287), 4: (45, 0.4843), 5: (60, 0.3287),
    6: (75, 0.3287), 7: (45, 0.3287), 8: (60, 0.4843), 9: (45, 0.3287),
    10: (60, 0.3287), 11: (30, 0.3287), 12: (40, 0.4843), 13: (25, 0.3287),
    14: (20, 0.3287), 15: (25, 0.4843), 16: (75, 0.3287), 17: (60, 0.3287),
    18: (25, 0.3287), 19: (45, 0.4843), 20: (60, 0.3287), 21: (20, 0.3287),
    22: (30, 0.3287), 23: (20, 0.4843), 24: (45, 0.3287), 25: (20, 0.3287),
}

PVS = [
    ("pv1", 7, "abc", 120, 120),
    ("pv2", 13, "a", 40, 40),
    ("pv3", 15, "c", 30, 30),
    ("pv4", 17, "abc", 100, 100),
    ("pv5", 20, "abc", 80, 80),
    ("pv6", 25, "a", 30, 30),
]

CLS = [  # (id, bus, low_mult, high_mult)
    ("cl3", 3, 0.8, 1.2),
    ("cl6", 6, 0.8, 1.2),
    ("cl8", 8, 0.8, 1.2),
    ("cl16", 16, 0.8, 1.2),
    ("cl19", 19, 0.8, 1.2),
    ("cl24", 24, 0.8, 1.2),
]


def zmat(phases, km, kind):
    n = len(phases)
    if kind == "trunk":
        zs, zm = Z3_SELF, Z3_MUT
    elif kind == "lat":
        zs, zm = ZL_SELF, ZL_MUT
    else:
        zs, zm = Z1_SELF, ZL_MUT
    out = []
    for r in range(n):
        row = []
        for c in range(n):
            z = zs if r == c else zm
            row.append([round(z.real * km, 6), round(z.imag * km, 6)])
        out.append(row)
    return out


def make_feeder():
    buses = []
    for b, ph in BUSES.items():
        bus = {"id": str(b), "phases": ph, "v_min": 0.95, "v_max": 1.05}
        if b == 1:
            bus["slack"] = True
        buses.append(bus)
    lines = []
    for f, t, ph, km, kind, imax in LINES:
        lines.append({
            "id": f"l{f}_{t}", "from": str(f), "to": str(t), "phases": ph,
            "z": zmat(ph, km, kind), "i_max": imax,
        })
    return {"base": {"kv": 4.16, "kva": 2000.0}, "buses": buses, "lines": lines}


def make_fleet():
    fleet = {"controllable_loads": [], "pv": [], "bess": [], "ncl": []}
    for cid, bus, lo, hi in CLS:
        fleet["controllable_loads"].append({
            "id": cid, "bus": str(bus), "phases": BUSES[bus],
            "tan_theta": LOADS[bus][1], "low_mult": lo, "high_mult": hi,
            "p_sched_kw": LOADS[bus][0] * 0.75,
        })
    for pid, bus, ph, cap, inv in PVS:
        fleet["pv"].append({
            "id": pid, "bus": str(bus), "phases": ph,
            "capacity_kw": cap, "inverter_kva": inv, "q_mode": "full",
        })
    fleet["bess"].append({
        "id": "bess1", "bus": "10", "phases": "abc", "inverter_kva": 100.0,
        "p_sched_kw": 0.0, "q_sched_kvar": 0.0,
    })
    cl_buses = {bus for _, bus, _, _ in CLS}
    for bus, (kw, tan) in LOADS.items():
        if bus in cl_buses:
            continue
        phases = BUSES[bus]
        for ph in phases:
            p = kw * 0.75 / len(phases)
            fleet["ncl"].append({
                "bus": str(bus), "phase": ph,
                "p_kw": round(p, 4), "q_kvar": round(p * tan, 4),
            })
    return fleet


def load_shape(minutes):
    h = minutes / 60.0
    base = 0.62
    morning = 0.18 * math.exp(-((h - 8.0) ** 2) / 4.5)
    evening = 0.38 * math.exp(-((h - 19.0) ** 2) / 5.0)
    midday = 0.10 * math.exp(-((h - 13.0) ** 2) / 9.0)
    return base + morning + evening + midday


def pv_shape(minutes):
    h = minutes / 60.0
    if h < 6.2 or h > 18.9:
        return 0.0
    return max(0.0, 0.92 * math.sin(math.pi * (h - 6.2) / (18.9 - 6.2)) ** 1.6)


def make_profiles():
    rng = random.Random(20240811)
    bus_jitter = {b: rng.uniform(0.92, 1.08) for b in LOADS}
    cols = ["time"]
    for bus in sorted(LOADS):
        for ph in BUSES[bus]:
            cols.append(f"load:{bus}.{ph}:p")
            cols.append(f"load:{bus}.{ph}:q")
    for pid, *_ in PVS:
        cols.append(f"pv:{pid}")
    rows = [",".join(cols)]
    for step in range(288):
        minutes = step * 5
        t = f"{minutes // 60:02d}:{minutes % 60:02d}"
        cells = [t]
        wiggle = 1.0 + 0.02 * math.sin(2 * math.pi * step / 41.0)
        for bus in sorted(LOADS):
            kw, tan = LOADS[bus]
            phases = BUSES[bus]
            shape = load_shape(minutes) * bus_jitter[bus] * wiggle
            for i, ph in enumerate(phases):
                unbalance = 1.0 + 0.06 * math.sin(2.1 * bus + 2.0 * i)
                p = kw * shape * unbalance / len(phases)
                cells.append(f"{p:.4f}")
                cells.append(f"{p * tan:.4f}")
        for pid, bus, ph, cap, inv in PVS:
            cells.append(f"{cap * pv_shape(minutes):.4f}")
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# Error history. The cloudy 0.50-0.75 bin uses a fixed three-component
# mixture; the other cells are simpler synthetic mixtures. Errors are
# per-unit of PV capacity. The overcast day never reaches the top bin.
# ---------------------------------------------------------------------------

MIXTURES = {
    ("sunny", 0): ([1.0], [(0.0005, 0.010)]),
    ("sunny", 1): ([1.0], [(0.0010, 0.012)]),
    ("sunny", 2): ([1.0], [(0.0015, 0.014)]),
    ("sunny", 3): ([1.0], [(0.0020, 0.015)]),
    ("cloudy", 0): ([0.6, 0.4], [(0.001, 0.010), (0.030, 0.060)]),
    ("cloudy", 1): ([0.5, 0.5], [(0.005, 0.020), (0.050, 0.090)]),
    ("cloudy", 2): ([0.4024, 0.1080, 0.4896],
                    [(0.0024, math.sqrt(6.4572e-5)),
                     (0.0688, math.sqrt(0.0172)),
                     (0.0168, math.sqrt(9.4331e-4))]),
    ("cloudy", 3): ([0.7, 0.3], [(0.010, 0.030), (0.080, 0.100)]),
    ("overcast", 0): ([1.0], [(0.003, 0.020)]),
    ("overcast", 1): ([0.7, 0.3], [(0.004, 0.018), (0.040, 0.070)]),
    ("overcast", 2): ([1.0], [(0.006, 0.025)]),
}

BIN_RANGES = [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]


def make_error_history():
    rng = random.Random(777)
    rows = ["day_type,power_pu,error_pu"]
    for (day, b), (weights, comps) in MIXTURES.items():
        n = 5000 if (day, b) == ("cloudy", 2) else 2000
        lo, hi = BIN_RANGES[b]
        for _ in range(n):
            u = rng.random()
            acc = 0.0
            mu, sd = comps[-1]
            for w, (m, s) in zip(weights, comps):
                acc += w
                if u <= acc:
                    mu, sd = m, s
                    break
            err = rng.gauss(mu, sd)
            pw = rng.uniform(lo, hi)
            rows.append(f"{day},{pw:.4f},{err:.6f}")
    return "\n".join(rows) + "\n"


def main():
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "feeder25.json"), "w") as f:
        json.dump(make_feeder(), f, indent=1)
        f.write("\n")
    with open(os.path.join(OUT, "fleet25.json"), "w") as f:
        json.dump(make_fleet(), f, indent=1)
        f.write("\n")
    with open(os.path.join(OUT, "profiles25.csv"), "w") as f:
        f.write(make_profiles())
    with open(os.path.join(OUT, "error_history.csv"), "w") as f:
        f.write(make_error_history())
    print("wrote data/ bundle")


if __name__ == "__main__":
    main()
