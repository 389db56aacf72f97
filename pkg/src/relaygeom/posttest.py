"""Relay characteristics: impedance-plane uncertainty sets after measurement.

Once the relay has observed ``i_L``, the apparent impedance of scenario
``eta`` decomposes into a known line segment plus an uncertain fault term
whose image in the complex plane is a zonogon (for zonotopic source noise).
The exact characteristic is produced by the four-step projection: build the
fault-current zonogon, adjoin the origin (a bolted fault is always
possible), Minkowski-add the two reach endpoints, and take the convex hull.
A one-zonogon relaxation with closed-form generators and an optional
line-angle cut complete the picture.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import geom
from .faults import (
    DegenerateLoop,
    LoopKind,
    LoopSpec,
    PosttestCoeffs,
    loop_spec,
    posttest_coeffs,
)
from .netmodel import NetworkMatrices, Scenario, phase_array
from .uncertainty import NoiseKind, SourceUncertainty


class CharacteristicKind(Enum):
    EXACT = "exact"
    ZONOGON = "zonogon"
    CUT = "cut"


@dataclass(frozen=True)
class Characteristic:
    """Convex impedance-plane region for one scenario at one observation."""

    scenario: Scenario
    polygon: geom.Polygon
    kind: CharacteristicKind
    i_l: np.ndarray
    coeffs: PosttestCoeffs
    z: complex
    m_z_min: float
    m_z_max: float = 1.0
    cut_removed_vertices: bool = False


def fault_image(coeffs: PosttestCoeffs, mats: NetworkMatrices,
                unc: SourceUncertainty, ellipse_sides: int = 64,
                ) -> tuple[complex, np.ndarray, geom.Polygon]:
    """Image of the scaled fault current in C: center, generators, vertices.

    For zonotopic noise the image is a zonogon with center
    ``xi + Xi theta (u0 + sigma c)`` and one complex generator
    ``Xi theta sigma g_i`` per noise generator.  Norm-ball noise maps to a
    disc (the row map is complex-linear), which is over-approximated by a
    circumscribed regular polygon with ``ellipse_sides`` sides.
    """
    row = (coeffs.Xi @ mats.theta) @ unc.sigma  # complex (noise.dim,)
    center = coeffs.xi + complex(coeffs.Xi @ mats.theta @ unc.nominal()
                                 + row @ unc.noise.center)
    if unc.noise.kind is NoiseKind.ZONOTOPE:
        gens = unc.noise.generators @ row  # one complex number per generator
        zono = geom.Zonogon.from_complex(center, gens)
        return center, gens, geom.zonogon_vertices(zono)
    radius = unc.noise.radius * float(np.linalg.norm(row))
    if radius == 0.0:
        return center, np.zeros(0, complex), geom.Polygon(geom.as_xy(center).reshape(1, 2))
    if ellipse_sides < 3:
        raise ValueError("ellipse over-approximation needs at least 3 sides")
    outer = radius / np.cos(np.pi / ellipse_sides)
    ang = 2.0 * np.pi * np.arange(ellipse_sides) / ellipse_sides
    pts = np.column_stack([center.real + outer * np.cos(ang),
                           center.imag + outer * np.sin(ang)])
    return center, np.zeros(0, complex), geom.Polygon(pts)


def exact_characteristic(scenario: Scenario, i_l, unc: SourceUncertainty,
                         mats: NetworkMatrices, z: complex, k: complex,
                         r_f: float, m_z_min: float, m_z_max: float = 1.0,
                         loop: LoopSpec | None = None,
                         ellipse_sides: int = 64) -> Characteristic:
    """Projection of the post-measurement uncertainty set onto C."""
    coeffs = posttest_coeffs(scenario, i_l, r_f, k, loop=loop)
    _, _, image = fault_image(coeffs, mats, unc, ellipse_sides)
    fault_poly = geom.hull_with_origin(image)
    ends = np.array([geom.as_xy(m_z_min * z), geom.as_xy(m_z_max * z)])
    pts = (fault_poly.vertices[:, None, :] + ends[None, :, :]).reshape(-1, 2)
    polygon = geom.convex_hull(pts)
    return Characteristic(scenario=scenario, polygon=polygon,
                          kind=CharacteristicKind.EXACT,
                          i_l=phase_array(i_l), coeffs=coeffs, z=z,
                          m_z_min=m_z_min, m_z_max=m_z_max)


def zonogon_characteristic(scenario: Scenario, i_l, unc: SourceUncertainty,
                           mats: NetworkMatrices, z: complex, k: complex,
                           r_f: float, m_z_min: float, m_z_max: float = 1.0,
                           loop: LoopSpec | None = None) -> Characteristic:
    """Closed-form zonogon relaxation of the exact characteristic.

    Center ``((m_max + m_min) z + c_F) / 2`` with generators
    ``(m_max - m_min) z / 2``, ``c_F / 2`` and the fault-image generators.
    """
    if unc.noise.kind is not NoiseKind.ZONOTOPE:
        raise ValueError("zonogon relaxation requires zonotopic noise")
    coeffs = posttest_coeffs(scenario, i_l, r_f, k, loop=loop)
    center_f, gens, _ = fault_image(coeffs, mats, unc)
    center = ((m_z_max + m_z_min) * z + center_f) / 2.0
    all_gens = np.concatenate([
        np.array([(m_z_max - m_z_min) * z / 2.0, center_f / 2.0]), gens])
    zono = geom.Zonogon.from_complex(center, all_gens)
    return Characteristic(scenario=scenario, polygon=geom.zonogon_vertices(zono),
                          kind=CharacteristicKind.ZONOGON,
                          i_l=phase_array(i_l), coeffs=coeffs, z=z,
                          m_z_min=m_z_min, m_z_max=m_z_max)


def apply_cut(char: Characteristic, z: complex | None = None) -> Characteristic:
    """Clip by ``Im[z] Re[w] >= Re[z] Im[w]`` (keep the line-angle side).

    Only valid for small source noise; a warning is emitted whenever the cut
    removes vertices of the characteristic it is applied to, since that is
    exactly the situation in which it may also remove genuine operating
    points.
    """
    if z is None:
        z = char.z
    normal = np.array([z.imag, -z.real])
    clipped = geom.clip_halfplane(char.polygon, normal, 0.0)
    removed = clipped.vertices.shape[0] == 0 or not all(
        geom.contains(clipped, v, tol=1e-7) for v in char.polygon.vertices)
    if removed:
        warnings.warn(
            f"line-angle cut removed vertices of the {char.scenario.value} "
            "characteristic; it may be invalid for this noise level",
            stacklevel=2)
    return replace(char, polygon=clipped, kind=CharacteristicKind.CUT,
                   cut_removed_vertices=removed)


def apparent_impedance(scenario: Scenario, v_l, i_l, k: complex,
                       loop: LoopSpec | None = None) -> complex:
    """Loop impedance v_A / i_A from a measurement."""
    if loop is None:
        loop = loop_spec(scenario, k)[0]
    i_a = loop.apparent_current(i_l)
    if abs(i_a) < 1e-9:
        raise DegenerateLoop(f"apparent current too small for loop {loop.label}")
    return loop.apparent_voltage(v_l) / i_a


def is_consistent(scenario: Scenario, v_l, i_l, char: Characteristic,
                  k: complex, tol: float = 1e-9) -> bool:
    """Measurement membership test against a characteristic."""
    z_a = apparent_impedance(scenario, v_l, i_l, k, loop=char.coeffs.loop)
    return geom.contains(char.polygon, geom.as_xy(z_a), tol=tol)


def max_overreach_free_reach(builder, z: complex, m_z_min: float,
                             tol: float = 1e-6) -> tuple[float, bool]:
    """Largest reach setting that cannot overreach.

    ``builder(m)`` must return the characteristic with reach interval
    ``[m_z_min, m]``; membership of the full line impedance ``z`` is
    monotone nondecreasing in ``m``.  Returns the bisection value of the
    smallest ``m`` whose characteristic contains ``z``.  If even the
    smallest characteristic contains ``z`` the bound is vacuous: the value
    1 is returned with the flag set.
    """
    point = geom.as_xy(z)

    def hit(m: float) -> bool:
        return geom.contains(builder(m).polygon, point, tol=1e-9)

    lo = m_z_min
    if hit(lo):
        return 1.0, True
    hi = 1.0
    if not hit(hi):
        return 1.0, False
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hit(mid):
            hi = mid
        else:
            lo = mid
    return hi, False


def simulate_loop_observation(scenario: Scenario, mats: NetworkMatrices,
                              unc: SourceUncertainty, m_z: float, m_r: float,
                              lam: np.ndarray, k: complex, r_f: float,
                              loop: LoopSpec | None = None,
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Generate a measurement (v_L, i_L) from the fault-loop model.

    Terminal currents come from the nominal-fault network maps at the
    realized sources; the loop voltage follows the loop KVL at the true
    fault position and resistance.  The unfaulted components of ``v_L`` are
    filled from the network solution, then the loop combination is forced
    to the KVL value with a minimum-norm correction.
    """
    if not scenario.is_fault:
        raise ValueError("loop simulation is defined for fault scenarios")
    if loop is None:
        loop = loop_spec(scenario, k)[0]
    u = unc.realized(lam)
    i_l = mats.gamma @ u
    i_r = mats.theta @ u
    i_a = complex(loop.current_map @ i_l)
    scale = loop.r_factor * r_f
    if loop.kind is LoopKind.PAIR:
        scale = scale / 2.0
    v_fault = m_r * scale * complex(loop.psi @ (i_l + i_r))
    v_a = m_z * mats.z * i_a + v_fault
    v_l = mats.phi @ u
    psi = loop.psi.reshape(1, -1)
    gap = v_a - complex(psi @ v_l)
    v_l = v_l + np.linalg.pinv(psi) @ np.array([gap])
    return v_l, i_l
