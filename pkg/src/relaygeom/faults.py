"""Fault-loop catalog for the twelve scenarios.

Every asymmetrical fault is analysed through one of two loop families:
phase-to-ground loops (apparent current compensated by the zero-sequence
factor k) and phase-to-phase loops.  Double line-to-ground faults default to
the bolted phase-pair loop (the tied phases make the pair voltage drop
vanish) with the single-phase loop available as an alternative model; the
symmetrical faults use the a-b loop as representative.

For a loop with row ``psi`` and apparent current ``i_A = current_map . i_L``
the relay-side quantities decompose as

    z_A = m_z z + m_r (xi + Xi i_R)          (observed current known)
    psi v_L = omega_z u_z + omega_r u_r      (source-space form)

with ``u_z = m_z u`` and ``u_r = m_r u``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .netmodel import (
    E_ZERO,
    LLG_SCENARIOS,
    NetworkMatrices,
    Scenario,
    _unit,
    phase_array,
)

APPARENT_CURRENT_FLOOR = 1e-9


class DegenerateLoop(ValueError):
    """Apparent loop current too small for the relay to form an impedance."""


class LoopKind(Enum):
    GROUND = "lg"
    PAIR = "ll"
    NORMAL = "N"


@dataclass(frozen=True)
class LoopSpec:
    """One fault loop: apparent-quantity maps and resistance scaling."""

    kind: LoopKind
    psi: np.ndarray  # rows mapping v_L -> v_A
    current_map: np.ndarray  # rows mapping i_L -> i_A
    r_factor: float  # fault-resistance multiplier; 0 for bolted loops
    label: str

    def apparent_voltage(self, v_l) -> complex:
        return complex(self.psi @ phase_array(v_l))

    def apparent_current(self, i_l) -> complex:
        return complex(self.current_map @ phase_array(i_l))


def _ground_loop(phase: int, k: complex, label: str, r_factor: float = 1.0) -> LoopSpec:
    return LoopSpec(
        kind=LoopKind.GROUND,
        psi=_unit(phase).astype(complex),
        current_map=(_unit(phase) + k * E_ZERO).astype(complex),
        r_factor=r_factor,
        label=label,
    )


def _pair_loop(p: int, q: int, label: str, r_factor: float = 1.0) -> LoopSpec:
    d = (_unit(p) - _unit(q)).astype(complex)
    return LoopSpec(kind=LoopKind.PAIR, psi=d, current_map=d.copy(),
                    r_factor=r_factor, label=label)


def loop_spec(scenario: Scenario, k: complex) -> list[LoopSpec]:
    """Loops modelling a scenario, default first.

    Ground faults yield their single-phase loop, phase faults their pair
    loop.  Double line-to-ground faults yield the bolted pair loop plus the
    ground-loop alternative; abc and abcg are represented by the a-b loop.
    Normal operation maps the full measurement vectors.
    """
    if scenario is Scenario.N:
        eye = np.eye(3, dtype=complex)
        return [LoopSpec(kind=LoopKind.NORMAL, psi=eye, current_map=eye.copy(),
                         r_factor=0.0, label="N")]
    phases = scenario.phases
    if len(phases) == 1:
        return [_ground_loop(phases[0], k, scenario.value)]
    if len(phases) == 2 and not scenario.grounded:
        return [_pair_loop(phases[0], phases[1], scenario.value)]
    if scenario in LLG_SCENARIOS:
        p, q = phases
        return [
            _pair_loop(p, q, f"{scenario.value}:pair-bolted", r_factor=0.0),
            _ground_loop(p, k, f"{scenario.value}:ground"),
        ]
    # Symmetrical faults: the a-b loop stands in for all three pair loops.
    return [_pair_loop(0, 1, f"{scenario.value}:ab")]


@dataclass(frozen=True)
class PosttestCoeffs:
    """z_A = m_z z + m_r (xi + Xi i_R) for a fixed observed i_L."""

    xi: complex
    Xi: np.ndarray  # row over i_R
    loop: LoopSpec
    i_a: complex


def posttest_coeffs(scenario: Scenario, i_l, r_f: float, k: complex,
                    loop: LoopSpec | None = None) -> PosttestCoeffs:
    """Fault-impedance coefficients for an observed local current."""
    if not scenario.is_fault:
        raise ValueError("post-test coefficients are defined for fault scenarios")
    if loop is None:
        loop = loop_spec(scenario, k)[0]
    i_l = phase_array(i_l)
    i_a = complex(loop.current_map @ i_l)
    if abs(i_a) < APPARENT_CURRENT_FLOOR:
        raise DegenerateLoop(
            f"apparent current |i_A| = {abs(i_a):.3e} too small for loop {loop.label}")
    scale = loop.r_factor * r_f
    if loop.kind == LoopKind.PAIR:
        scale = scale / 2.0
    xi = scale * complex(loop.psi @ i_l) / i_a
    big_xi = (scale / i_a) * loop.psi
    return PosttestCoeffs(xi=xi, Xi=big_xi, loop=loop, i_a=i_a)


@dataclass(frozen=True)
class PretestCoeffs:
    """psi v_L = omega_z u_z + omega_r u_r in source space."""

    scenario: Scenario
    omega_z: np.ndarray | None
    omega_r: np.ndarray | None
    omega_n: np.ndarray | None
    psi: np.ndarray
    loop: LoopSpec


def pretest_coeffs(scenario: Scenario, mats: NetworkMatrices, z: complex,
                   k: complex, r_f: float,
                   loop: LoopSpec | None = None) -> PretestCoeffs:
    """Source-space loop coefficients for one scenario."""
    if mats.scenario is not scenario:
        raise ValueError(f"matrices are for {mats.scenario.value}, not {scenario.value}")
    if loop is None:
        loop = loop_spec(scenario, k)[0]
    if scenario is Scenario.N:
        omega_n = z * mats.gamma + mats.psi_r
        return PretestCoeffs(scenario=scenario, omega_z=None, omega_r=None,
                             omega_n=omega_n, psi=loop.psi, loop=loop)
    omega_z = z * (loop.current_map @ mats.gamma)
    scale = loop.r_factor * r_f
    if loop.kind == LoopKind.PAIR:
        scale = scale / 2.0
    omega_r = scale * (loop.psi @ (mats.gamma + mats.theta))
    return PretestCoeffs(scenario=scenario, omega_z=np.atleast_2d(omega_z),
                         omega_r=np.atleast_2d(omega_r), omega_n=None,
                         psi=loop.psi, loop=loop)
