"""Three-phase short-circuit network model.

Builds the bus admittance system of a symmetrical, fully transposed network
with a virtual fault bus spliced into the protected line, stamps one of the
twelve fault scenarios onto that bus, and solves for the linear maps from the
source vector ``u = [ibr currents; sg voltages]`` to the relay-side
quantities:

    i_L = gamma u,   i_R = theta u,   v_L = phi u,   v_R = psi_r u.

Sign conventions: ``i_L`` and ``i_R`` both flow *into* the protected line
from their respective buses; fault stamps are written for the current drawn
out of the fault bus, so the bus injection is ``i_F = -Y_F v_F``.

Terminal currents divide the voltage drop across the split line either by
the full 3x3 phase-impedance block (default; keeps every fault-loop identity
exact when zero-sequence current flows) or by the scalar positive-sequence
impedance.  ``branch_current_mismatch`` quantifies the gap between the two
conventions.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

ALPHA = np.exp(2j * np.pi / 3)

# Phase <-> sequence transforms (columns of A are zero/positive/negative).
A_MATRIX = np.array([
    [1, 1, 1],
    [1, ALPHA ** 2, ALPHA],
    [1, ALPHA, ALPHA ** 2],
], dtype=complex)
B_MATRIX = np.linalg.inv(A_MATRIX)

E_A = np.array([1.0, 0.0, 0.0])
E_B = np.array([0.0, 1.0, 0.0])
E_C = np.array([0.0, 0.0, 1.0])
E_ZERO = np.full(3, 1.0 / 3.0)


class NetworkError(ValueError):
    """Invalid network description or singular system."""


@dataclass(frozen=True)
class PhaseVector:
    """Per-phase complex quantity (voltage or current)."""

    a: complex
    b: complex
    c: complex

    def to_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=complex)

    @classmethod
    def from_array(cls, arr) -> "PhaseVector":
        arr = np.asarray(arr, dtype=complex).reshape(3)
        return cls(complex(arr[0]), complex(arr[1]), complex(arr[2]))


def phase_array(v) -> np.ndarray:
    """Accept a PhaseVector or any 3-sequence of complex numbers."""
    if isinstance(v, PhaseVector):
        return v.to_array()
    return np.asarray(v, dtype=complex).reshape(3)


def seq_to_phase(s) -> PhaseVector:
    """Map (zero, positive, negative) sequence components to phases."""
    return PhaseVector.from_array(A_MATRIX @ np.asarray(s, dtype=complex).reshape(3))


def phase_to_seq(v) -> np.ndarray:
    return B_MATRIX @ phase_array(v)


def balanced(phasor: complex) -> PhaseVector:
    """Balanced positive-sequence three-phase vector with the given phasor."""
    return seq_to_phase([0.0, phasor, 0.0])


# ---------------------------------------------------------------------------
# Network description
# ---------------------------------------------------------------------------


class SourceKind(Enum):
    SG = "sg"
    IBR = "ibr"
    LOAD = "load"
    JUNCTION = "junction"


@dataclass(frozen=True)
class SourceSpec:
    bus: int
    kind: SourceKind
    phasor: PhaseVector | None = None  # SG voltage or IBR current
    admittance: complex = 0.0  # per-phase load admittance

    def __post_init__(self):
        if self.kind in (SourceKind.SG, SourceKind.IBR) and self.phasor is None:
            raise NetworkError(f"bus {self.bus}: {self.kind.value} needs a phasor")


@dataclass(frozen=True)
class LineSpec:
    from_bus: int
    to_bus: int
    z1: complex  # positive-sequence series impedance, pu
    z0: complex  # zero-sequence series impedance, pu

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise NetworkError("line endpoints must differ")
        if self.z1 == 0 or self.z0 == 0:
            raise NetworkError("line impedances must be nonzero")

    def z_abc(self) -> np.ndarray:
        """3x3 phase-impedance block A diag(z0, z1, z1) B."""
        return A_MATRIX @ np.diag([self.z0, self.z1, self.z1]).astype(complex) @ B_MATRIX

    def y_abc(self) -> np.ndarray:
        return A_MATRIX @ np.diag([1 / self.z0, 1 / self.z1, 1 / self.z1]) @ B_MATRIX


@dataclass(frozen=True)
class ThreePhaseNetwork:
    buses: tuple[SourceSpec, ...]
    lines: tuple[LineSpec, ...]
    protected: LineSpec

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        ids = [b.bus for b in self.buses]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate bus ids")
        count = sum(1 for ln in self.lines if ln == self.protected)
        if count != 1:
            raise NetworkError("protected line must appear exactly once in the line list")
        self._check_connected()

    def _check_connected(self):
        ids = {b.bus for b in self.buses}
        for ln in self.lines:
            if ln.from_bus not in ids or ln.to_bus not in ids:
                raise NetworkError(f"line references unknown bus {ln.from_bus}-{ln.to_bus}")
        adj: dict[int, set[int]] = {i: set() for i in ids}
        for ln in self.lines:
            adj[ln.from_bus].add(ln.to_bus)
            adj[ln.to_bus].add(ln.from_bus)
        seen: set[int] = set()
        stack = [next(iter(ids))]
        while stack:
            k = stack.pop()
            if k in seen:
                continue
            seen.add(k)
            stack.extend(adj[k] - seen)
        if seen != ids:
            raise NetworkError("network graph is not connected")

    @property
    def local_bus(self) -> int:
        return self.protected.from_bus

    @property
    def remote_bus(self) -> int:
        return self.protected.to_bus

    @property
    def zero_seq_factor(self) -> complex:
        """k = z0/z1 - 1 of the protected line."""
        return self.protected.z0 / self.protected.z1 - 1.0

    @property
    def z(self) -> complex:
        """Positive-sequence impedance of the protected line."""
        return self.protected.z1

    def buses_of(self, kind: SourceKind) -> list[SourceSpec]:
        return [b for b in self.buses if b.kind == kind]

    def source_vector(self) -> np.ndarray:
        """Nominal u = [stacked IBR currents; stacked SG voltages]."""
        parts = [phase_array(b.phasor) for b in self.buses_of(SourceKind.IBR)]
        parts += [phase_array(b.phasor) for b in self.buses_of(SourceKind.SG)]
        if not parts:
            return np.zeros(0, dtype=complex)
        return np.concatenate(parts)

    def n_sources(self) -> int:
        return len(self.buses_of(SourceKind.IBR)) + len(self.buses_of(SourceKind.SG))


# ---------------------------------------------------------------------------
# Scenarios and fault stamps
# ---------------------------------------------------------------------------


class Scenario(Enum):
    AG = "ag"
    BG = "bg"
    CG = "cg"
    AB = "ab"
    AC = "ac"
    BC = "bc"
    ABG = "abg"
    ACG = "acg"
    BCG = "bcg"
    ABC = "abc"
    ABCG = "abcg"
    N = "N"

    @property
    def is_fault(self) -> bool:
        return self is not Scenario.N

    @property
    def phases(self) -> tuple[int, ...]:
        """Indices of the faulted phases (a=0, b=1, c=2)."""
        if self is Scenario.N:
            return ()
        return tuple(sorted("abc".index(ch) for ch in self.value if ch in "abc"))

    @property
    def grounded(self) -> bool:
        return self is not Scenario.N and self.value.endswith("g")


LLG_SCENARIOS = (Scenario.ABG, Scenario.ACG, Scenario.BCG)
FAULT_SCENARIOS = tuple(s for s in Scenario if s.is_fault)
ALL_PAIRS = tuple(
    (s1, s2) for i, s1 in enumerate(Scenario) for s2 in list(Scenario)[i + 1:]
)


def _unit(i: int) -> np.ndarray:
    e = np.zeros(3)
    e[i] = 1.0
    return e


def fault_stamp(scenario: Scenario, m_r_hat: float, r_f: float) -> np.ndarray:
    """3x3 fault admittance Y_F with drawn current ``-i_F = Y_F v_F``.

    Single-phase and phase-to-phase faults are the one-resistor circuits;
    three-phase faults use a resistor delta sized so the representative
    phase-pair loop keeps the standard coefficients (edge resistance
    ``1.5 m_r r_f``), with a zero-sequence ground path added for abcg.
    Double-line-to-ground faults tie the two phases and are handled by node
    merging in the solve, not by a finite stamp.
    """
    if scenario is Scenario.N:
        return np.zeros((3, 3), dtype=complex)
    if scenario in LLG_SCENARIOS:
        raise NetworkError("double line-to-ground faults use the merged-node path")
    if m_r_hat <= 0.0 or r_f <= 0.0:
        raise NetworkError(
            "singular fault stamp: m_r_hat * r_f must be positive "
            "(bolted faults need the zero-resistance code path)")
    g = 1.0 / (m_r_hat * r_f)
    phases = scenario.phases
    if len(phases) == 1:
        e = _unit(phases[0])
        return g * np.outer(e, e).astype(complex)
    if len(phases) == 2:
        d = _unit(phases[0]) - _unit(phases[1])
        return g * np.outer(d, d).astype(complex)
    proj0 = np.full((3, 3), 1.0 / 3.0)
    y = 2.0 * g * (np.eye(3) - proj0)
    if scenario.grounded:
        y = y + g * proj0
    return y.astype(complex)


# ---------------------------------------------------------------------------
# Admittance assembly
# ---------------------------------------------------------------------------

FAULT_BUS = -1  # synthetic id of the virtual fault bus


def build_admittance(net: ThreePhaseNetwork, m_z_hat: float) -> tuple[np.ndarray, list[int]]:
    """Bus admittance matrix with the protected line split at the fault bus.

    Returns the 3(n+1) x 3(n+1) series-element matrix (no loads, sources or
    fault stamps) and the bus ordering; the fault bus is last.
    """
    if not (0.0 < m_z_hat < 1.0):
        raise NetworkError("m_z_hat must lie strictly inside (0, 1)")
    order = [b.bus for b in net.buses] + [FAULT_BUS]
    index = {bus: i for i, bus in enumerate(order)}
    n = len(order)
    y = np.zeros((3 * n, 3 * n), dtype=complex)

    def stamp(i: int, j: int, y_abc: np.ndarray):
        si, sj = slice(3 * i, 3 * i + 3), slice(3 * j, 3 * j + 3)
        y[si, si] += y_abc
        y[sj, sj] += y_abc
        y[si, sj] -= y_abc
        y[sj, si] -= y_abc

    for ln in net.lines:
        if ln == net.protected:
            continue
        stamp(index[ln.from_bus], index[ln.to_bus], ln.y_abc())
    p = net.protected
    near = LineSpec(p.from_bus, p.to_bus, m_z_hat * p.z1, m_z_hat * p.z0)
    far = LineSpec(p.from_bus, p.to_bus, (1 - m_z_hat) * p.z1, (1 - m_z_hat) * p.z0)
    stamp(index[p.from_bus], index[FAULT_BUS], near.y_abc())
    stamp(index[FAULT_BUS], index[p.to_bus], far.y_abc())
    return y, order


def _merged_reduction(n_blocks: int, f_block: int, p: int, q: int) -> np.ndarray:
    """Column map R with x_full = R x_red tying fault-bus phases p and q."""
    n_full = 3 * n_blocks
    row_p, row_q = 3 * f_block + p, 3 * f_block + q
    cols = [i for i in range(n_full) if i != row_q]
    r = np.zeros((n_full, n_full - 1))
    for new, old in enumerate(cols):
        r[old, new] = 1.0
    r[row_q, cols.index(row_p)] = 1.0
    return r


@dataclass(frozen=True)
class _Solved:
    """Dense solution of one stamped scenario system."""

    x: np.ndarray  # (3(n+1), 3 n_src): voltage maps; current maps at SG rows
    order: list[int]
    index: dict[int, int]
    ibr_buses: list[int]
    sg_buses: list[int]


def _solve_scenario(net: ThreePhaseNetwork, scenario: Scenario, m_z_hat: float,
                    m_r_hat: float, r_f: float) -> _Solved:
    y, order = build_admittance(net, m_z_hat)
    index = {bus: i for i, bus in enumerate(order)}
    n = len(order)
    ibr_buses = [b.bus for b in net.buses_of(SourceKind.IBR)]
    sg_buses = [b.bus for b in net.buses_of(SourceKind.SG)]
    n_src = len(ibr_buses) + len(sg_buses)
    if n_src == 0:
        raise NetworkError("network needs at least one SG or IBR source")

    lhs = y.astype(complex).copy()
    f_block = index[FAULT_BUS]
    fs = slice(3 * f_block, 3 * f_block + 3)
    merged = scenario in LLG_SCENARIOS
    if not merged:
        lhs[fs, fs] += fault_stamp(scenario, m_r_hat, r_f)
    elif m_r_hat <= 0.0 or r_f <= 0.0:
        raise NetworkError("double line-to-ground stamp needs m_r_hat * r_f > 0")
    for b in net.buses:
        if b.kind == SourceKind.LOAD:
            s = slice(3 * index[b.bus], 3 * index[b.bus] + 3)
            lhs[s, s] += b.admittance * np.eye(3)

    rhs = np.zeros((3 * n, 3 * n_src), dtype=complex)
    for col, bus in enumerate(ibr_buses):
        i = index[bus]
        rhs[3 * i: 3 * i + 3, 3 * col: 3 * col + 3] = np.eye(3)
    for col, bus in enumerate(sg_buses):
        i = index[bus]
        cslice = slice(3 * (len(ibr_buses) + col), 3 * (len(ibr_buses) + col) + 3)
        rhs[:, cslice] = -lhs[:, 3 * i: 3 * i + 3]
        lhs[:, 3 * i: 3 * i + 3] = 0.0
        lhs[3 * i: 3 * i + 3, 3 * i: 3 * i + 3] = -np.eye(3)

    try:
        if merged:
            p, q = scenario.phases
            red = _merged_reduction(n, f_block, p, q)
            lhs_red = red.T @ lhs @ red
            rhs_red = red.T @ rhs
            merged_col = int(np.flatnonzero(red[3 * f_block + p])[0])
            lhs_red[merged_col, merged_col] += 1.0 / (m_r_hat * r_f)
            x = red @ np.linalg.solve(lhs_red, rhs_red)
        else:
            x = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise NetworkError(f"singular system for scenario {scenario.value}: {exc}")
    return _Solved(x=x, order=order, index=index,
                   ibr_buses=ibr_buses, sg_buses=sg_buses)


def _voltage_map(sol: _Solved, bus: int) -> np.ndarray:
    """Map from u to the three-phase voltage at a bus."""
    if bus in sol.sg_buses:
        e = np.zeros((3, sol.x.shape[1]), dtype=complex)
        col = len(sol.ibr_buses) + sol.sg_buses.index(bus)
        e[:, 3 * col: 3 * col + 3] = np.eye(3)
        return e
    i = sol.index[bus]
    return sol.x[3 * i: 3 * i + 3, :]


# ---------------------------------------------------------------------------
# Network matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkMatrices:
    """Linear maps from the source vector to relay-side quantities."""

    scenario: Scenario
    gamma: np.ndarray  # i_L
    theta: np.ndarray  # i_R
    phi: np.ndarray  # v_L
    psi_r: np.ndarray  # v_R
    aleph_f: np.ndarray  # v_F
    z: complex
    zero_seq_factor: complex
    m_z_hat: float
    m_r_hat: float
    r_f: float

    @property
    def source_dim(self) -> int:
        return self.gamma.shape[1]


def compute_network_matrices(
    net: ThreePhaseNetwork,
    scenario: Scenario,
    m_z_hat: float = 0.5,
    m_r_hat: float = 0.5,
    r_f: float = 1.0,
    scalar_line_division: bool = False,
) -> NetworkMatrices:
    """Solve the stamped system for one scenario.

    Unknowns are bus voltages except at SG buses, where the voltage is known
    and the injected current becomes the unknown.  Load admittances and the
    fault stamp fold into the left-hand side.
    """
    sol = _solve_scenario(net, scenario, m_z_hat, m_r_hat, r_f)
    phi = _voltage_map(sol, net.local_bus)
    psi_r = _voltage_map(sol, net.remote_bus)
    f_row = sol.index[FAULT_BUS]
    aleph_f = sol.x[3 * f_row: 3 * f_row + 3, :]
    z = net.z
    if scalar_line_division:
        gamma = (phi - aleph_f) / (m_z_hat * z)
        theta = (psi_r - aleph_f) / ((1 - m_z_hat) * z)
    else:
        z_abc = net.protected.z_abc()
        gamma = np.linalg.solve(m_z_hat * z_abc, phi - aleph_f)
        theta = np.linalg.solve((1 - m_z_hat) * z_abc, psi_r - aleph_f)
    return NetworkMatrices(
        scenario=scenario, gamma=gamma, theta=theta, phi=phi, psi_r=psi_r,
        aleph_f=aleph_f, z=z, zero_seq_factor=net.zero_seq_factor,
        m_z_hat=m_z_hat, m_r_hat=m_r_hat, r_f=r_f,
    )


def branch_current_mismatch(net: ThreePhaseNetwork, mats: NetworkMatrices,
                            u: np.ndarray) -> float:
    """Gap between matrix and scalar line-current conventions for sources u.

    Zero whenever the protected line carries no zero-sequence current (for
    example if z0 == z1, or in balanced unfaulted operation).
    """
    drop = (mats.phi - mats.aleph_f) @ u
    z_abc = net.protected.z_abc()
    i_matrix = np.linalg.solve(mats.m_z_hat * z_abc, drop)
    i_scalar = drop / (mats.m_z_hat * mats.z)
    return float(np.linalg.norm(i_matrix - i_scalar))


def stamped_residual(net: ThreePhaseNetwork, scenario: Scenario, u: np.ndarray,
                     m_z_hat: float = 0.5, m_r_hat: float = 0.5,
                     r_f: float = 1.0) -> float:
    """Relative KCL residual of the recovered state on the raw admittances.

    Reconstructs every bus voltage and injection from the solved maps and
    substitutes them into ``Y v = i`` built from scratch.  For the
    double-line-to-ground scenarios the two tied fault phases have an
    indeterminate current split, so their rows are checked as a sum together
    with the tie constraint ``v_p = v_q``.
    """
    sol = _solve_scenario(net, scenario, m_z_hat, m_r_hat, r_f)
    y, order = build_admittance(net, m_z_hat)
    index = {bus: i for i, bus in enumerate(order)}
    u = np.asarray(u, dtype=complex).reshape(-1)

    v = np.zeros(3 * len(order), dtype=complex)
    for bus in order:
        i = index[bus]
        if bus == FAULT_BUS:
            v[3 * i: 3 * i + 3] = sol.x[3 * i: 3 * i + 3, :] @ u
        else:
            v[3 * i: 3 * i + 3] = _voltage_map(sol, bus) @ u

    inj = np.zeros(3 * len(order), dtype=complex)
    off = 0
    for bus in sol.ibr_buses:
        i = index[bus]
        inj[3 * i: 3 * i + 3] = u[off: off + 3]
        off += 3
    for bus in sol.sg_buses:
        i = index[bus]
        inj[3 * i: 3 * i + 3] = sol.x[3 * i: 3 * i + 3, :] @ u
    for b in net.buses:
        if b.kind == SourceKind.LOAD:
            i = index[b.bus]
            inj[3 * i: 3 * i + 3] = -b.admittance * v[3 * i: 3 * i + 3]

    f = index[FAULT_BUS]
    fslice = slice(3 * f, 3 * f + 3)
    res = y @ v - inj
    if scenario in LLG_SCENARIOS:
        p, q = scenario.phases
        g = 1.0 / (m_r_hat * r_f)
        other = ({0, 1, 2} - {p, q}).pop()
        rows = list(res[: 3 * f])
        rows.append(res[3 * f + p] + res[3 * f + q] + g * v[3 * f + p])
        rows.append(res[3 * f + other])
        rows.append(v[3 * f + p] - v[3 * f + q])
        res = np.array(rows)
    else:
        yf = fault_stamp(scenario, m_r_hat, r_f)
        res[fslice] += yf @ v[fslice]
    scale = max(float(np.linalg.norm(u)), 1e-12)
    return float(np.linalg.norm(res)) / scale
