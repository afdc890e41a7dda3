"""Regenerate the bundled fig1 and ieee37_like case files.

tiny3 is hand-written; the two larger cases are generated here so their
numbers can be audited and tweaked in one place.
"""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "robustmg" / "cases"
ABC = ["a", "b", "c"]


def impedance(length_kft, r_self=0.0025, x_self=0.0020, r_mut=0.0010, x_mut=0.0008, phases=ABC):
    k = len(phases)
    r = [[round((r_self if i == j else r_mut) * length_kft, 6) for j in range(k)] for i in range(k)]
    x = [[round((x_self if i == j else x_mut) * length_kft, 6) for j in range(k)] for i in range(k)]
    return r, x


def line(fb, tb, length_kft, smax, phases=ABC):
    r, x = impedance(length_kft, phases=phases)
    return {"id": f"L{fb}_{tb}", "from_bus": fb, "to_bus": tb, "phases": list(phases), "r": r, "x": x,
            "s_max": smax}


def switch(fb, tb, smax, closed, name=None, phases=ABC):
    return {"id": name or f"SW{fb}_{tb}", "from_bus": fb, "to_bus": tb, "phases": list(phases), "s_max": smax,
            "normally_closed": closed}


def load(lid, bus, p_total, pf=0.9, unbalance=(1.0, 1.0, 1.0), uncertain=False, level=0.25, phases=ABC):
    q_total = p_total * math.tan(math.acos(pf))
    w = sum(unbalance[: len(phases)])
    nominal = {ph: [round(p_total * u / w, 6), round(q_total * u / w, 6)]
               for ph, u in zip(phases, unbalance)}
    d = {"id": lid, "bus": bus, "phases": list(phases), "s_nominal": nominal, "uncertain": uncertain}
    if uncertain:
        d["s_lower"] = {ph: [round(v[0] * (1 - level), 6), round(v[1] * (1 - level), 6)] for ph, v in nominal.items()}
        d["s_upper"] = {ph: [round(v[0] * (1 + level), 6), round(v[1] * (1 + level), 6)] for ph, v in nominal.items()}
    return d


def der(gid, bus, p_total, c1, q_ratio=0.6, phases=ABC):
    per = p_total / len(phases)
    return {"id": gid, "bus": bus, "phases": list(phases),
            "s_min": {ph: [0.0, round(-q_ratio * per, 6)] for ph in phases},
            "s_max": {ph: [round(per, 6), round(q_ratio * per, 6)] for ph in phases},
            "c1": c1, "c0": 0.0}


def bus(bid, phases=ABC):
    return {"id": bid, "phases": list(phases), "v_min": 0.95, "v_max": 1.05}


def fig1():
    """Three blocks joined in a triangle of switches, three DERs, one wye transformer."""
    buses = [bus(str(i)) for i in range(1, 10)]
    lines = [line("1", "2", 1.0, 0.6), line("2", "3", 0.8, 0.6),
             line("4", "5", 1.2, 0.6), line("7", "8", 0.9, 0.6), line("8", "9", 0.7, 0.6)]
    transformers = [{"id": "T5_6", "from_bus": "5", "to_bus": "6", "phases": ABC, "connection": "WYE",
                     "tap_ratio": 1.0, "s_max": 0.6}]
    switches = [switch("3", "4", 0.5, True, "SW12"), switch("6", "7", 0.5, False, "SW23"),
                switch("9", "1", 0.5, False, "SW31")]
    loads = [load("D2", "2", 0.20, unbalance=(1.2, 1.0, 0.8)),
             load("D3", "3", 0.18, uncertain=True),
             load("D5", "5", 0.15, unbalance=(0.9, 1.1, 1.0)),
             load("D6", "6", 0.20, uncertain=True),
             load("D8", "8", 0.22, uncertain=True, unbalance=(1.0, 0.8, 1.2)),
             load("D9", "9", 0.10)]
    gens = [der("G1", "1", 0.50, 2.0), der("G4", "4", 0.30, 2.5), der("G7", "7", 0.36, 3.0)]
    return {"name": "fig1", "bases": {"kva_base": 1000.0, "kv_base": 4.16, "cost_scale": 1.0, "currency": "$"},
            "buses": buses, "lines": lines, "switches": switches, "transformers": transformers,
            "loads": loads, "generators": gens}


# IEEE 37-node test feeder topology (node names kept); lengths in kft
IEEE37_EDGES = [
    ("701", "702", 0.96), ("702", "705", 0.40), ("702", "713", 0.36), ("702", "703", 1.32),
    ("703", "727", 0.24), ("703", "730", 0.60), ("704", "714", 0.08), ("704", "720", 0.80),
    ("705", "742", 0.32), ("705", "712", 0.24), ("706", "725", 0.28), ("707", "724", 0.76),
    ("707", "722", 0.12), ("708", "733", 0.32), ("708", "732", 0.32), ("709", "731", 0.60),
    ("709", "708", 0.32), ("710", "735", 0.20), ("710", "736", 1.28), ("711", "741", 0.40),
    ("711", "740", 0.20), ("713", "704", 0.52), ("714", "718", 0.52), ("720", "707", 0.92),
    ("720", "706", 0.60), ("727", "744", 0.28), ("730", "709", 0.20), ("733", "734", 0.56),
    ("734", "737", 0.64), ("734", "710", 0.52), ("737", "738", 0.40), ("738", "711", 0.40),
    ("744", "728", 0.20), ("744", "729", 0.28),
]
SECTIONALIZING = {("702", "713"), ("704", "720"), ("702", "703"), ("703", "730"), ("733", "734")}
TIES = [("712", "736"), ("718", "725"), ("729", "731"), ("722", "741")]

# (bus, total kW-equivalent pu) for the 30 loads; flagged entries are uncertain
IEEE37_LOADS = [
    ("701", 0.120, False), ("702", 0.040, False), ("705", 0.070, True), ("712", 0.085, False),
    ("742", 0.085, False),
    ("713", 0.085, False), ("704", 0.060, False), ("714", 0.038, True), ("718", 0.085, False),
    ("720", 0.085, False), ("706", 0.050, False), ("725", 0.042, False), ("707", 0.060, True),
    ("722", 0.140, False), ("724", 0.042, False),
    ("727", 0.042, False), ("744", 0.042, True), ("728", 0.126, False), ("729", 0.042, False),
    ("730", 0.085, False), ("709", 0.060, False), ("731", 0.085, True), ("732", 0.042, False),
    ("733", 0.085, False), ("708", 0.060, False),
    ("734", 0.042, False), ("737", 0.140, True), ("738", 0.126, False), ("711", 0.060, False),
    ("740", 0.085, False),
]
IEEE37_DERS = [("G701", "701", 0.45, 1.0), ("G713", "713", 0.25, 1.5), ("G720", "720", 0.35, 2.0),
               ("G727", "727", 0.30, 1.5), ("G730", "730", 0.40, 1.0), ("G732", "732", 0.18, 3.0),
               ("G736", "736", 0.25, 2.5)]


def ieee37_like():
    names = sorted({n for e in IEEE37_EDGES for n in e[:2]} | {"799", "775"})
    assert len(names) == 37, len(names)
    buses = [bus(n) for n in names]
    lines, switches = [], [switch("799", "701", 2.0, False, "SW799_701")]
    for fb, tb, length in IEEE37_EDGES:
        if (fb, tb) in SECTIONALIZING:
            switches.append(switch(fb, tb, 0.8, True))
        else:
            lines.append(line(fb, tb, length, 0.8))
    for fb, tb in TIES:
        switches.append(switch(fb, tb, 0.5, False))
    transformers = [{"id": "XFM709_775", "from_bus": "709", "to_bus": "775", "phases": ABC, "connection": "DELTA",
                     "tap_ratio": math.sqrt(3.0), "s_max": 0.2}]
    unb = [(1.0, 1.0, 1.0), (1.2, 0.9, 0.9), (0.8, 1.1, 1.1), (1.0, 1.2, 0.8)]
    loads = [load(f"D{b}", b, round(1.1 * p, 4), unbalance=unb[k % 4], uncertain=u) for k, (b, p, u) in enumerate(IEEE37_LOADS)]
    gens = [der(g, b, p, c) for g, b, p, c in IEEE37_DERS]
    return {"name": "ieee37_like",
            "bases": {"kva_base": 1000.0, "kv_base": 4.8, "cost_scale": 1.0, "currency": "$"},
            "buses": buses, "lines": lines, "switches": switches, "transformers": transformers,
            "loads": loads, "generators": gens}


if __name__ == "__main__":
    for make in (fig1, ieee37_like):
        data = make()
        (OUT / f"{data['name']}.json").write_text(json.dumps(data, indent=1) + "\n")
        print("wrote", data["name"])
