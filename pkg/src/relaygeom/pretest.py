"""Pre-measurement uncertainty sets as constraint systems.

Before the relay measures anything, the loop voltage of scenario ``eta``
satisfies ``psi v_L = omega_z u_z + omega_r u_r`` where ``u_z`` and ``u_r``
stand for the bilinear products ``m_z u`` and ``m_r u`` of the reach/
resistance fractions with the realized source vector.  The exact product set
is nonconvex; this module builds its convex companions:

  REL1  each product relaxed independently: u_z = m_z u0 + sigma lam_z with
        unit-scaled noise lam_z (and likewise u_r).  A relaxation because
        m lam is again in the noise set.
  REL2  m-scaled noise: u_z = m_z u0 + sigma lam_mz with
        P lam_mz <= m_z 1 (noise rows shrink with m), separate vectors for
        the two products; the same-noise constraint is what makes the exact
        set nonconvex and is dropped here.
  REL3  conjunction of REL1 and REL2 on shared (m_z, m_r, u_z, u_r).
  RES   a restriction: one fraction m for both products and one m-scaled
        noise vector, so u_z = u_r.
  SOC   RES without the fraction-equality rows; the noise bound becomes the
        hyperbolic rows (P lam_m)^2 <= m_z1 m_r1.
  EXACT REL1 plus symbolic bilinear tags (not solvable directly; used by
        the sampling oracle).

Pairwise intersections share ``v_L`` and couple the local currents of the
two scenarios.  For REL1/REL3 each scenario carries a unit-scaled coupling
noise vector entering the current-equality row; RES couples the product
blocks directly (with a shared fraction, and the remote-end pin for pairs
with normal operation, so that a feasible point always witnesses a true
common observation); SOC couples through its m-scaled noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .convexsolve import ConstraintSystem
from .faults import PretestCoeffs, pretest_coeffs
from .netmodel import NetworkMatrices, Scenario
from .uncertainty import AuxSignal, NoiseKind, SourceUncertainty


class WVariant(Enum):
    EXACT = "exact"
    REL1 = "rel1"
    REL2 = "rel2"
    REL3 = "rel3"
    RES = "res"
    SOC = "soc"


class VariantError(ValueError):
    """Unsupported (variant, noise kind) combination."""


def _eye(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def _noise_rows(sys: ConstraintSystem, unc: SourceUncertainty, lam: str,
                bound_block: str | None, label: str):
    """lam in Lambda scaled by the named bound variable (or 1 if None)."""
    noise = unc.noise
    if noise.kind is NoiseKind.ZONOTOPE:
        rows = noise.h_rows
        if rows.size == 0:
            # Degenerate point set: lam = center exactly.
            sys.add_eq({lam: _eye(noise.dim)}, noise.center,
                       label=f"{label}:point")
            return
        coeffs = {lam: rows}
        if bound_block is None:
            sys.add_ineq(coeffs, np.ones(rows.shape[0]), label=label)
        else:
            coeffs = dict(coeffs)
            coeffs[bound_block] = -np.ones((rows.shape[0], 1))
            sys.add_ineq(coeffs, np.zeros(rows.shape[0]), label=label)
        return
    # Norm ball: ||lam|| <= radius * bound.
    v = {lam: np.eye(2 * noise.dim)}
    if bound_block is None:
        sys.add_soc(v, np.zeros(2 * noise.dim), {}, noise.radius, label=label)
    else:
        sys.add_soc(v, np.zeros(2 * noise.dim),
                    {bound_block: np.array([noise.radius])}, 0.0, label=label)


def _box(sys: ConstraintSystem, name: str, lo: float, hi: float):
    sys.add_ineq({name: np.array([[1.0]])}, np.array([hi]), label=f"{name}<=hi")
    sys.add_ineq({name: np.array([[-1.0]])}, np.array([-lo]), label=f"{name}>=lo")


def _product_rows(sys: ConstraintSystem, unc: SourceUncertainty, u_block: str,
                  m_block: str, lam_block: str, label: str):
    """u = m u0 + sigma lam as complex equality rows."""
    dim = unc.nominal().size
    sys.add_eq({
        u_block: _eye(dim),
        m_block: -unc.nominal().reshape(dim, 1),
        lam_block: -unc.sigma,
    }, np.zeros(dim), label=label)


def build_w(variant: WVariant, unc: SourceUncertainty, m_z_min: float,
            tag: str = "", sys: ConstraintSystem | None = None,
            ) -> ConstraintSystem:
    """Constraint system for one scenario's product set (u_z, u_r).

    Block names are suffixed with ``tag`` so two scenarios can share one
    system.  The caller is responsible for applying any auxiliary signal to
    ``unc`` beforehand.
    """
    if sys is None:
        sys = ConstraintSystem()
    d = unc.noise.dim
    s_dim = unc.nominal().size
    if unc.noise.kind is NoiseKind.BALL and variant in (WVariant.REL1,
                                                        WVariant.REL3,
                                                        WVariant.EXACT):
        raise VariantError(
            f"{variant.value} needs polyhedral noise; got a norm ball")

    u_z = sys.add_block(f"u_z{tag}", s_dim)
    u_r = sys.add_block(f"u_r{tag}", s_dim)

    if variant is WVariant.RES:
        m = sys.add_block(f"m_res{tag}", 1, complex_valued=False)
        lam_m = sys.add_block(f"lam_m{tag}", d)
        _box(sys, m, m_z_min, 1.0)
        _product_rows(sys, unc, u_z, m, lam_m, f"u_z{tag}")
        _product_rows(sys, unc, u_r, m, lam_m, f"u_r{tag}")
        _noise_rows(sys, unc, lam_m, m, f"lam_m{tag}")
        return sys

    if variant is WVariant.SOC:
        m_z = sys.add_block(f"m_z{tag}", 1, complex_valued=False)
        m_r = sys.add_block(f"m_r{tag}", 1, complex_valued=False)
        lam_m = sys.add_block(f"lam_m{tag}", d)
        _box(sys, m_z, m_z_min, 1.0)
        _box(sys, m_r, 0.0, 1.0)
        _product_rows(sys, unc, u_z, m_z, lam_m, f"u_z{tag}")
        _product_rows(sys, unc, u_r, m_r, lam_m, f"u_r{tag}")
        _hyperbolic_noise(sys, unc, lam_m, m_z, m_r, tag)
        return sys

    m_z = sys.add_block(f"m_z{tag}", 1, complex_valued=False)
    m_r = sys.add_block(f"m_r{tag}", 1, complex_valued=False)
    _box(sys, m_z, m_z_min, 1.0)
    _box(sys, m_r, 0.0, 1.0)
    if variant in (WVariant.REL1, WVariant.REL3, WVariant.EXACT):
        lam_z = sys.add_block(f"lam_z{tag}", d)
        lam_r = sys.add_block(f"lam_r{tag}", d)
        _product_rows(sys, unc, u_z, m_z, lam_z, f"u_z{tag}:unit")
        _product_rows(sys, unc, u_r, m_r, lam_r, f"u_r{tag}:unit")
        _noise_rows(sys, unc, lam_z, None, f"lam_z{tag}")
        _noise_rows(sys, unc, lam_r, None, f"lam_r{tag}")
    if variant in (WVariant.REL2, WVariant.REL3):
        lam_mz = sys.add_block(f"lam_mz{tag}", d)
        lam_mr = sys.add_block(f"lam_mr{tag}", d)
        _product_rows(sys, unc, u_z, m_z, lam_mz, f"u_z{tag}:scaled")
        _product_rows(sys, unc, u_r, m_r, lam_mr, f"u_r{tag}:scaled")
        _noise_rows(sys, unc, lam_mz, m_z, f"lam_mz{tag}")
        _noise_rows(sys, unc, lam_mr, m_r, f"lam_mr{tag}")
    if variant is WVariant.EXACT:
        sys.bilinear.append(
            f"u_z{tag} - m_z{tag} u0 = m_z{tag} sigma lam_z{tag}")
        sys.bilinear.append(
            f"u_r{tag} - m_r{tag} u0 = m_r{tag} sigma lam_r{tag}")
    return sys


def _hyperbolic_noise(sys: ConstraintSystem, unc: SourceUncertainty, lam_m: str,
                      m_z: str, m_r: str, tag: str):
    """(P_k lam)^2 <= m_z m_r rows (or the ball norm), as rotated cones.

    v^2 <= t u with t, u >= 0 is ||[2v, t - u]|| <= t + u.
    """
    noise = unc.noise
    if noise.kind is NoiseKind.ZONOTOPE:
        rows = noise.h_rows
        for idx in range(rows.shape[0]):
            v_mat = {
                lam_m: np.vstack([2.0 * rows[idx].reshape(1, -1),
                                  np.zeros((1, rows.shape[1]))]),
                m_z: np.array([[0.0], [1.0]]),
                m_r: np.array([[0.0], [-1.0]]),
            }
            sys.add_soc(v_mat, np.zeros(2),
                        {m_z: np.array([1.0]), m_r: np.array([1.0])}, 0.0,
                        label=f"hyp{tag}:{idx}")
    else:
        d2 = 2 * noise.dim
        v_mat = {
            lam_m: np.vstack([(2.0 / noise.radius) * np.eye(d2),
                              np.zeros((1, d2))]),
            m_z: np.vstack([np.zeros((d2, 1)), np.array([[1.0]])]),
            m_r: np.vstack([np.zeros((d2, 1)), np.array([[-1.0]])]),
        }
        sys.add_soc(v_mat, np.zeros(d2 + 1),
                    {m_z: np.array([1.0]), m_r: np.array([1.0])}, 0.0,
                    label=f"hyp{tag}:ball")


def build_pretest(scenario: Scenario, variant: WVariant, coeffs: PretestCoeffs,
                  unc: SourceUncertainty, m_z_min: float, tag: str | None = None,
                  sys: ConstraintSystem | None = None,
                  share_v_l: bool = False) -> ConstraintSystem:
    """Loop-voltage uncertainty set of one scenario as a constraint system.

    Normal operation has no bilinear products: it is
    ``v_L = omega_n (u0 + sigma lam)`` with unit noise.  Faults join the
    loop row with the requested product-set variant.
    """
    if sys is None:
        sys = ConstraintSystem()
    if tag is None:
        tag = f"@{scenario.value}"
    if not share_v_l or "v_L" not in sys.blocks:
        sys.add_block("v_L", 3)
    if scenario is Scenario.N:
        d = unc.noise.dim
        s_dim = unc.nominal().size
        u = sys.add_block(f"u{tag}", s_dim)
        lam = sys.add_block(f"lam{tag}", d)
        sys.add_eq({u: _eye(s_dim), lam: -unc.sigma}, unc.nominal(),
                   label=f"u{tag}")
        _noise_rows(sys, unc, lam, None, f"lam{tag}")
        sys.add_eq({"v_L": _eye(3), u: -coeffs.omega_n}, np.zeros(3),
                   label=f"kvl{tag}")
        return sys
    build_w(variant, unc, m_z_min, tag=tag, sys=sys)
    sys.add_eq({
        "v_L": coeffs.psi.reshape(1, 3),
        f"u_z{tag}": -coeffs.omega_z,
        f"u_r{tag}": -coeffs.omega_r,
    }, np.zeros(1), label=f"kvl{tag}")
    return sys


@dataclass(frozen=True)
class IntersectionContext:
    """Everything needed to build pairwise intersections."""

    mats: dict[Scenario, NetworkMatrices]
    unc: SourceUncertainty
    z: complex
    k: complex
    r_f: float
    m_z_min: float

    def coeffs(self, scenario: Scenario) -> PretestCoeffs:
        return pretest_coeffs(scenario, self.mats[scenario], self.z, self.k,
                              self.r_f)


def build_intersection(s1: Scenario, s2: Scenario, variant: WVariant,
                       signal: AuxSignal | None, ctx: IntersectionContext,
                       ) -> ConstraintSystem:
    """Joint system for two scenarios sharing one observation.

    The shared quantities are the measured voltage (identical ``v_L`` block)
    and the measured current, coupled through the scenario current maps at
    the realized sources.
    """
    if s1 is s2:
        raise ValueError("intersection needs two distinct scenarios")
    if variant is WVariant.REL2:
        raise VariantError(
            "the m-scaled-only relaxation has no unit-scaled noise to couple; "
            "use rel1, rel3, res, or soc")
    if variant is WVariant.EXACT:
        raise VariantError("the exact intersection is bilinear; use a convex variant")
    unc = ctx.unc.with_signal(signal)
    sys = ConstraintSystem()
    for s in (s1, s2):
        build_pretest(s, variant, ctx.coeffs(s), unc, ctx.m_z_min,
                      sys=sys, share_v_l=True)

    u0 = unc.nominal()
    gam1, gam2 = ctx.mats[s1].gamma, ctx.mats[s2].gamma
    rhs = (gam2 - gam1) @ u0

    def coupling_noise(s: Scenario, tag: str) -> str:
        if s is Scenario.N:
            return f"lam{tag}"  # normal operation's own noise vector
        name = f"lam_c{tag}"
        sys.add_block(name, unc.noise.dim)
        _noise_rows(sys, unc, name, None, name)
        return name

    if variant in (WVariant.REL1, WVariant.REL3):
        lam1 = coupling_noise(s1, f"@{s1.value}")
        lam2 = coupling_noise(s2, f"@{s2.value}")
        sys.add_eq({lam1: gam1 @ unc.sigma, lam2: -(gam2 @ unc.sigma)}, rhs,
                   label="i_L coupling")
        return sys

    if variant is WVariant.SOC:
        # Couple through the m-scaled noise of each side (N keeps its own).
        name1 = f"lam@{s1.value}" if s1 is Scenario.N else f"lam_m@{s1.value}"
        name2 = f"lam@{s2.value}" if s2 is Scenario.N else f"lam_m@{s2.value}"
        sys.add_eq({name1: gam1 @ unc.sigma, name2: -(gam2 @ unc.sigma)}, rhs,
                   label="i_L coupling (m-scaled)")
        return sys

    # Restriction: couple the product blocks themselves.  With one shared
    # fraction (pinned to 1 against normal operation) any feasible point
    # maps back to a genuine common observation of the two scenarios.
    for s, other in ((s1, s2), (s2, s1)):
        if s is Scenario.N:
            continue
        if other is Scenario.N:
            m_name = f"m_res@{s.value}"
            sys.add_eq({m_name: np.array([[1.0 + 0j]])}, np.array([1.0 + 0j]),
                       label=f"{m_name}=1")
    if s1.is_fault and s2.is_fault:
        sys.add_eq({f"m_res@{s1.value}": np.array([[1.0 + 0j]]),
                    f"m_res@{s2.value}": np.array([[-1.0 + 0j]])},
                   np.zeros(1), label="shared fraction")

    def product_block(s: Scenario) -> tuple[str, str]:
        if s is Scenario.N:
            return f"u@{s.value}", f"u@{s.value}"
        return f"u_z@{s.value}", f"u_r@{s.value}"

    uz1, ur1 = product_block(s1)
    uz2, ur2 = product_block(s2)
    sys.add_eq({uz1: gam1, uz2: -gam2}, np.zeros(3), label="i_L coupling (u_z)")
    if (uz1, uz2) != (ur1, ur2):
        sys.add_eq({ur1: gam1, ur2: -gam2}, np.zeros(3),
                   label="i_L coupling (u_r)")
    return sys


def sample_exact_w(unc: SourceUncertainty, m_z_min: float, count: int,
                   seed: int) -> list[dict]:
    """Members of the exact product set, by construction.

    Each sample carries the generating (m_z, m_r, lam) and the products
    (u_z, u_r); noise must be sampleable (zonotope or ball).
    """
    rng = np.random.default_rng(seed)
    lams = unc.noise.sample(rng, count)
    m_zs = rng.uniform(m_z_min, 1.0, size=count)
    m_rs = rng.uniform(0.0, 1.0, size=count)
    u0 = unc.nominal()
    out = []
    for m_z, m_r, lam in zip(m_zs, m_rs, lams):
        u = u0 + unc.sigma @ lam
        out.append({"m_z": float(m_z), "m_r": float(m_r), "lam": lam,
                    "u_z": m_z * u, "u_r": m_r * u})
    return out


def exact_sample_in_variant(sys_variant: WVariant, unc: SourceUncertainty,
                            m_z_min: float, sample: dict,
                            tag: str = "") -> dict[str, np.ndarray]:
    """Witness assignment showing an exact-W sample inside a convex variant.

    Returns block values keyed like ``build_w`` names them; feeding them to
    ``ConstraintSystem.residuals`` checks membership constructively.
    """
    m_z, m_r, lam = sample["m_z"], sample["m_r"], sample["lam"]
    point = {f"u_z{tag}": sample["u_z"], f"u_r{tag}": sample["u_r"]}
    if sys_variant is WVariant.RES:
        raise VariantError("exact samples are generally outside the restriction")
    if sys_variant is WVariant.SOC:
        raise VariantError("exact samples are generally outside the soc set")
    point[f"m_z{tag}"] = np.array([m_z])
    point[f"m_r{tag}"] = np.array([m_r])
    if sys_variant in (WVariant.REL1, WVariant.REL3, WVariant.EXACT):
        point[f"lam_z{tag}"] = m_z * lam
        point[f"lam_r{tag}"] = m_r * lam
    if sys_variant in (WVariant.REL2, WVariant.REL3):
        point[f"lam_mz{tag}"] = m_z * lam
        point[f"lam_mr{tag}"] = m_r * lam
    return point


def sample_res_w(unc: SourceUncertainty, m_z_min: float, count: int,
                 seed: int) -> list[dict]:
    """Members of the restricted set (shared fraction, m-scaled noise)."""
    rng = np.random.default_rng(seed)
    lams = unc.noise.sample(rng, count)
    ms = rng.uniform(m_z_min, 1.0, size=count)
    u0 = unc.nominal()
    out = []
    for m, lam in zip(ms, lams):
        lam_m = m * lam
        u = m * u0 + unc.sigma @ lam_m
        out.append({"m": float(m), "lam_m": lam_m, "u_z": u, "u_r": u.copy()})
    return out


def res_sample_in_variant(variant: WVariant, sample: dict, tag: str = "",
                          ) -> dict[str, np.ndarray]:
    """Witness assignment for a restricted-set sample in a larger variant."""
    m, lam_m = sample["m"], sample["lam_m"]
    point = {f"u_z{tag}": sample["u_z"], f"u_r{tag}": sample["u_r"]}
    if variant is WVariant.RES:
        point[f"m_res{tag}"] = np.array([m])
        point[f"lam_m{tag}"] = lam_m
        return point
    if variant is WVariant.SOC:
        point[f"m_z{tag}"] = np.array([m])
        point[f"m_r{tag}"] = np.array([m])
        point[f"lam_m{tag}"] = lam_m
        return point
    point[f"m_z{tag}"] = np.array([m])
    point[f"m_r{tag}"] = np.array([m])
    if variant in (WVariant.REL1, WVariant.REL3, WVariant.EXACT):
        point[f"lam_z{tag}"] = lam_m
        point[f"lam_r{tag}"] = lam_m
    if variant in (WVariant.REL2, WVariant.REL3):
        point[f"lam_mz{tag}"] = lam_m
        point[f"lam_mr{tag}"] = lam_m
    return point
