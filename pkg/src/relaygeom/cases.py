"""Shipped example cases and network construction from config dicts.

The 14-bus stand-in uses the public IEEE 14-bus branch impedances with a
uniform zero-sequence multiple of three (compensation factor 2 on every
line).  Two source layouts ship with the package: a mixed SG/IBR layout with
light noise for characteristic plotting, and an all-IBR layout with heavy
noise for signal design, where the protected line runs between buses 2
and 3 in both.
"""
from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .netmodel import LineSpec, SourceKind, SourceSpec, ThreePhaseNetwork, balanced

# Positive-sequence branch impedances (pu) of the standard 14-bus test case.
IEEE14_LINES = [
    (1, 2, 0.01938 + 0.05917j),
    (1, 5, 0.05403 + 0.22304j),
    (2, 3, 0.04699 + 0.19797j),
    (2, 4, 0.05811 + 0.17632j),
    (2, 5, 0.05695 + 0.17388j),
    (3, 4, 0.06701 + 0.17103j),
    (4, 5, 0.01335 + 0.04211j),
    (4, 7, 0.0 + 0.20912j),
    (4, 9, 0.0 + 0.55618j),
    (5, 6, 0.0 + 0.25202j),
    (6, 11, 0.09498 + 0.19890j),
    (6, 12, 0.12291 + 0.25581j),
    (6, 13, 0.06615 + 0.13027j),
    (7, 8, 0.0 + 0.17615j),
    (7, 9, 0.0 + 0.11001j),
    (9, 10, 0.03181 + 0.08450j),
    (9, 14, 0.12711 + 0.27038j),
    (10, 11, 0.08205 + 0.19207j),
    (12, 13, 0.22092 + 0.19988j),
    (13, 14, 0.17093 + 0.34802j),
]
ZERO_SEQ_MULTIPLE = 3.0  # z0 = 3 z1 on every line


def _cstr(w: complex) -> str:
    return f"{w.real:.6g}{w.imag:+.6g}j"


def _line_entries() -> list[dict]:
    return [{"from": a, "to": b, "z1": _cstr(z), "z0": _cstr(ZERO_SEQ_MULTIPLE * z)}
            for a, b, z in IEEE14_LINES]


def characteristic_case() -> dict:
    """Mixed SG/IBR 14-bus layout with light source noise."""
    sg = [1, 3, 5, 14]
    ibr = [2, 4, 7, 8, 12]
    loads = [6, 10, 11, 13]
    junctions = [9]
    sg_angles = np.linspace(0.0, 2.0 * np.pi / 10.0, len(sg))
    ibr_angles = np.linspace(0.0, 2.0 * np.pi / 3.0, len(ibr))
    buses = []
    for bus, ang in zip(sg, sg_angles):
        buses.append({"id": bus, "kind": "sg", "phasor": _cstr(np.exp(1j * ang))})
    for bus, ang in zip(ibr, ibr_angles):
        buses.append({"id": bus, "kind": "ibr", "phasor": _cstr(np.exp(1j * ang))})
    for bus in loads:
        buses.append({"id": bus, "kind": "load", "admittance": "0.1+0.01j"})
    for bus in junctions:
        buses.append({"id": bus, "kind": "junction"})
    buses.sort(key=lambda b: b["id"])
    return {
        "network": {"buses": buses, "lines": _line_entries()},
        "relay": {"line": [2, 3], "r_f": 1.0, "m_z_min": 0.15,
                  "m_z_hat": 0.5, "m_r_hat": 0.5},
        "uncertainty": {"sigma_scale": 0.1, "n_phi": 20},
        "signal": {"kind": "negative_sequence"},
        "run": {
            "pairs": [["N", "ag"], ["N", "ab"], ["ag", "ab"]],
            "grid": {"re": [-3.0, 3.0, 41], "im": [-3.0, 3.0, 41]},
            "admm": {"rho": 1.0, "max_iters": 200, "delta0": "0"},
        },
    }


def separation_case(n_phi: int = 8) -> dict:
    """All-IBR 14-bus layout with unit-scale noise for signal design."""
    ibr = [1, 2, 3, 4, 5, 8, 14]
    loads = [6, 10, 11, 13]
    junctions = [7, 9, 12]
    ibr_angles = np.linspace(0.0, 2.0 * np.pi / 3.0, len(ibr))
    buses = []
    for bus, ang in zip(ibr, ibr_angles):
        buses.append({"id": bus, "kind": "ibr", "phasor": _cstr(np.exp(1j * ang))})
    for bus in loads:
        buses.append({"id": bus, "kind": "load", "admittance": "0.1+0.01j"})
    for bus in junctions:
        buses.append({"id": bus, "kind": "junction"})
    buses.sort(key=lambda b: b["id"])
    lg = ["ag", "bg", "cg"]
    ll = ["ab", "ac", "bc"]
    members = ["N"] + lg + ll
    pairs = [[a, b] for i, a in enumerate(members) for b in members[i + 1:]]
    return {
        "network": {"buses": buses, "lines": _line_entries()},
        "relay": {"line": [2, 3], "r_f": 1.0, "m_z_min": 0.15,
                  "m_z_hat": 0.5, "m_r_hat": 0.5},
        "uncertainty": {"sigma_scale": 1.0, "n_phi": n_phi},
        "signal": {"kind": "negative_sequence"},
        "run": {
            "pairs": pairs,
            "grid": {"re": [-3.0, 3.0, 41], "im": [-3.0, 3.0, 41]},
            "admm": {"rho": 1.0, "max_iters": 200, "delta0": "0"},
        },
    }


CASE_BUILDERS = {
    "ieee14-characteristic": characteristic_case,
    "ieee14-separation": separation_case,
}


def case_text(name: str) -> str:
    try:
        with resources.files("relaygeom.data").joinpath(f"{name}.json").open() as fh:
            return fh.read()
    except FileNotFoundError:
        if name in CASE_BUILDERS:
            return json.dumps(CASE_BUILDERS[name](), indent=2)
        raise


def load_case(name: str) -> dict:
    return json.loads(case_text(name))


def parse_complex(text) -> complex:
    """Complex literal in the ``re+imj`` style used by config files."""
    if isinstance(text, (int, float)):
        return complex(text)
    if isinstance(text, complex):
        return text
    try:
        return complex(str(text).replace(" ", ""))
    except ValueError as exc:
        raise ValueError(f"invalid complex literal {text!r}") from exc


def network_from_config(cfg: dict) -> ThreePhaseNetwork:
    """Build the network object from a validated config dict."""
    net_cfg = cfg["network"]
    buses = []
    for entry in net_cfg["buses"]:
        kind = SourceKind(entry["kind"])
        if kind in (SourceKind.SG, SourceKind.IBR):
            if "phases" in entry:
                phasor = np.array([parse_complex(p) for p in entry["phases"]])
                from .netmodel import PhaseVector
                pv = PhaseVector.from_array(phasor)
            else:
                pv = balanced(parse_complex(entry["phasor"]))
            buses.append(SourceSpec(entry["id"], kind, phasor=pv))
        elif kind is SourceKind.LOAD:
            buses.append(SourceSpec(entry["id"], kind,
                                    admittance=parse_complex(entry["admittance"])))
        else:
            buses.append(SourceSpec(entry["id"], kind))
    lines = [LineSpec(e["from"], e["to"], parse_complex(e["z1"]),
                      parse_complex(e["z0"])) for e in net_cfg["lines"]]
    a, b = cfg["relay"]["line"]
    protected = None
    for i, ln in enumerate(lines):
        if (ln.from_bus, ln.to_bus) == (a, b):
            protected = ln
            break
        if (ln.from_bus, ln.to_bus) == (b, a):
            # The relay sits at the first listed bus; flip the orientation.
            lines[i] = LineSpec(a, b, ln.z1, ln.z0)
            protected = lines[i]
            break
    if protected is None:
        raise ValueError(f"relay.line [{a}, {b}] is not in the line list")
    return ThreePhaseNetwork(tuple(buses), tuple(lines), protected)
