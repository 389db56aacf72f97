"""Separation certificates for scenario pairs.

A signal separates two scenarios when no observation is consistent with
both, i.e. their joint constraint system is empty.  Emptiness of the convex
relaxation is certified by a feasible point of its alternative (dual)
system; non-separation is certified by a feasible point of the restricted
intersection.  The two certificates are mutually exclusive because the
restriction sits inside the relaxation.

Two dual constructions are provided: a mechanical one (alternative system of
the realified relaxation, immune to transcription slips; authoritative for
verdicts) and a structured transcription with named multiplier blocks whose
bilinear signal-dependence is tagged for the alternating optimizer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .convexsolve import (
    ConstraintSystem,
    FeasibilityResult,
    StandardForm,
    farkas_alternative_form,
    solve_feasibility,
)
from .faults import pretest_coeffs
from .netmodel import Scenario
from .pretest import IntersectionContext, WVariant, build_intersection
from .uncertainty import AuxSignal, NoiseKind, SourceUncertainty, injection_map


class Verdict(Enum):
    SEPARATED = "separated"
    NOT_SEPARATED = "not_separated"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SeparationVerdict:
    pair: tuple[Scenario, Scenario]
    verdict: Verdict
    certificate: object = None
    message: str = ""

    @property
    def separated(self) -> bool:
        return self.verdict is Verdict.SEPARATED


def restricted_intersection(s1: Scenario, s2: Scenario,
                            signal: AuxSignal | None,
                            ctx: IntersectionContext) -> ConstraintSystem:
    return build_intersection(s1, s2, WVariant.RES, signal, ctx)


def relaxed_intersection(s1: Scenario, s2: Scenario,
                         signal: AuxSignal | None,
                         ctx: IntersectionContext) -> ConstraintSystem:
    return build_intersection(s1, s2, WVariant.REL3, signal, ctx)


def mechanical_dual(s1: Scenario, s2: Scenario, signal: AuxSignal | None,
                    ctx: IntersectionContext) -> StandardForm:
    """Alternative system of the relaxed intersection at a fixed signal."""
    sf = relaxed_intersection(s1, s2, signal, ctx).realify()
    return farkas_alternative_form(sf)


def check_separation(s1: Scenario, s2: Scenario, signal: AuxSignal | None,
                     ctx: IntersectionContext,
                     want_certificates: bool = True) -> SeparationVerdict:
    """Three-way verdict via the restriction and the dual system.

    A feasible restricted intersection witnesses an observation consistent
    with both scenarios; a feasible dual certifies the relaxation empty.
    At most one can hold.
    """
    pair = (s1, s2)
    res_sys = restricted_intersection(s1, s2, signal, ctx)
    res = solve_feasibility(res_sys.realify(), want_certificate=False)
    dual = solve_feasibility(mechanical_dual(s1, s2, signal, ctx),
                             want_certificate=False)
    if res.feasible and dual.feasible:
        return SeparationVerdict(pair, Verdict.UNKNOWN,
                                 message="contradictory certificates (numerical)")
    if res.feasible:
        cert = res_sys.realify().point_dict(res.x) if want_certificates else None
        return SeparationVerdict(pair, Verdict.NOT_SEPARATED, certificate=cert)
    if dual.feasible:
        cert = dual.x if want_certificates else None
        return SeparationVerdict(pair, Verdict.SEPARATED, certificate=cert)
    if res.status == "numerical" or dual.status == "numerical":
        return SeparationVerdict(pair, Verdict.UNKNOWN,
                                 message=f"solver: res={res.status} dual={dual.status}")
    return SeparationVerdict(pair, Verdict.UNKNOWN)


# ---------------------------------------------------------------------------
# Transcribed dual systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BilinearTerm:
    """alias = Re[u0(signal)^H (sum_b M_b x_b)] with M_b constant."""

    alias: str
    terms: dict[str, np.ndarray]


@dataclass
class DualSystem:
    """Structured dual with signal-dependent rows replaced by aliases."""

    pair: tuple[Scenario, Scenario]
    system: ConstraintSystem
    bilinears: list[BilinearTerm]
    unc: SourceUncertainty  # nominal sources without any signal
    drop_r: bool = False

    @property
    def upsilon1_blocks(self) -> list[str]:
        """Variables multiplying the signal (extracted from bilinear tags)."""
        names: list[str] = []
        for term in self.bilinears:
            for name in term.terms:
                if name not in names:
                    names.append(name)
        return names

    def u0_at(self, signal: AuxSignal | None) -> np.ndarray:
        return self.unc.with_signal(signal).nominal()

    def full_injection_map(self, kind) -> np.ndarray:
        """Map from the signal vector to source space (zero at SG rows)."""
        t_ibr = injection_map(kind, self.unc.n_ibr)
        pad = self.unc.nominal().size - t_ibr.shape[0]
        return np.vstack([t_ibr, np.zeros((pad, t_ibr.shape[1]))])


def _real_map(c: np.ndarray) -> np.ndarray:
    """Real matrix acting on realified coordinates like the complex map c."""
    return np.block([[c.real, -c.imag], [c.imag, c.real]])


def _re_inner_row(q: np.ndarray) -> np.ndarray:
    """Row over realified x with value Re[q^H x]."""
    return np.concatenate([q.real, q.imag])


def build_dual(s1: Scenario, s2: Scenario, ctx: IntersectionContext,
               drop_r: bool = False) -> DualSystem:
    """Transcribed dual of the relaxed intersection, alias form.

    The returned system is linear; the signal enters only through the
    bilinear alias definitions (one per leading row and per fraction
    stationarity row).  ``drop_r`` builds the reduced system used for
    bolted-fault studies: the resistance-side multipliers and rows are
    omitted, which is valid when the resistance coefficients vanish.
    """
    if s1 is s2:
        raise ValueError("dual system needs two distinct scenarios")
    if s2 is Scenario.N:
        s1, s2 = s2, s1  # normal operation leads, matching the listed system
    unc = ctx.unc
    if unc.noise.kind is not NoiseKind.ZONOTOPE:
        raise ValueError("dual systems are built for polyhedral noise")
    p_rows = unc.noise.h_rows
    n_p = p_rows.shape[0]
    d = unc.noise.dim
    sigma = unc.sigma
    s_dim = unc.nominal().size
    sys = ConstraintSystem()
    sys.add_block("alpha", 3)
    bilinears: list[BilinearTerm] = []

    faults = [s for s in (s1, s2) if s.is_fault]
    lead_ineq: dict[str, np.ndarray] = {}

    def nonneg(name: str, dim: int) -> str:
        sys.add_block(name, dim, complex_valued=False)
        sys.add_ineq({name: -np.eye(dim)}, np.zeros(dim), label=f"{name}>=0")
        return name

    gamma_of = {s: ctx.mats[s].gamma for s in (s1, s2)}
    sign_of = {s1: 1.0, s2: -1.0}

    for s in faults:
        tag = f"@{s.value}"
        coeffs = pretest_coeffs(s, ctx.mats[s], ctx.z, ctx.k, ctx.r_f)
        sys.add_block(f"beta{tag}", 1)
        sys.add_block(f"gamma_z{tag}", s_dim)
        sys.add_block(f"sigma_z{tag}", s_dim)
        phi_z = nonneg(f"phi_z{tag}", n_p)
        phi_c = nonneg(f"phi_c{tag}", n_p)
        tau_z = nonneg(f"tau_z{tag}", n_p)
        mu_zl = nonneg(f"mu_zl{tag}", 1)
        mu_zu = nonneg(f"mu_zu{tag}", 1)
        sys.add_block(f"chi_z{tag}", 1, complex_valued=False)

        # u_z stationarity.
        sys.add_eq({
            f"beta{tag}": np.conj(coeffs.omega_z).reshape(s_dim, 1),
            f"gamma_z{tag}": -np.eye(s_dim, dtype=complex),
            f"sigma_z{tag}": -np.eye(s_dim, dtype=complex),
        }, np.zeros(s_dim), label=f"u_z{tag}")
        # lam_z stationarity.
        sys.add_real_eq({
            f"gamma_z{tag}": _real_map(sigma.conj().T),
            phi_z: p_rows.T,
        }, np.zeros(2 * d), label=f"lam_z{tag}")
        # lam_mz stationarity.
        sys.add_real_eq({
            f"sigma_z{tag}": _real_map(sigma.conj().T),
            tau_z: p_rows.T,
        }, np.zeros(2 * d), label=f"lam_mz{tag}")
        # coupling-noise stationarity.
        sys.add_real_eq({
            "alpha": sign_of[s] * _real_map(sigma.conj().T @ gamma_of[s].conj().T),
            phi_c: p_rows.T,
        }, np.zeros(2 * d), label=f"lam_c{tag}")
        # m_z stationarity via its alias.
        sys.add_real_eq({
            f"chi_z{tag}": np.array([[1.0]]),
            tau_z: -np.ones((1, n_p)),
            mu_zu: np.array([[1.0]]),
            mu_zl: np.array([[-1.0]]),
        }, np.zeros(1), label=f"m_z{tag}")
        bilinears.append(BilinearTerm(f"chi_z{tag}", {
            f"gamma_z{tag}": np.eye(s_dim, dtype=complex),
            f"sigma_z{tag}": np.eye(s_dim, dtype=complex),
        }))
        for name in (phi_z, phi_c):
            lead_ineq[name] = np.ones((1, n_p))
        lead_ineq[mu_zu] = np.ones((1, 1))
        lead_ineq[mu_zl] = -ctx.m_z_min * np.ones((1, 1))

        if not drop_r:
            sys.add_block(f"gamma_r{tag}", s_dim)
            sys.add_block(f"sigma_r{tag}", s_dim)
            phi_r = nonneg(f"phi_r{tag}", n_p)
            tau_r = nonneg(f"tau_r{tag}", n_p)
            mu_rl = nonneg(f"mu_rl{tag}", 1)
            mu_ru = nonneg(f"mu_ru{tag}", 1)
            sys.add_block(f"chi_r{tag}", 1, complex_valued=False)
            sys.add_eq({
                f"beta{tag}": np.conj(coeffs.omega_r).reshape(s_dim, 1),
                f"gamma_r{tag}": -np.eye(s_dim, dtype=complex),
                f"sigma_r{tag}": -np.eye(s_dim, dtype=complex),
            }, np.zeros(s_dim), label=f"u_r{tag}")
            sys.add_real_eq({
                f"gamma_r{tag}": _real_map(sigma.conj().T),
                phi_r: p_rows.T,
            }, np.zeros(2 * d), label=f"lam_r{tag}")
            sys.add_real_eq({
                f"sigma_r{tag}": _real_map(sigma.conj().T),
                tau_r: p_rows.T,
            }, np.zeros(2 * d), label=f"lam_mr{tag}")
            sys.add_real_eq({
                f"chi_r{tag}": np.array([[1.0]]),
                tau_r: -np.ones((1, n_p)),
                mu_ru: np.array([[1.0]]),
                mu_rl: np.array([[-1.0]]),
            }, np.zeros(1), label=f"m_r{tag}")
            bilinears.append(BilinearTerm(f"chi_r{tag}", {
                f"gamma_r{tag}": np.eye(s_dim, dtype=complex),
                f"sigma_r{tag}": np.eye(s_dim, dtype=complex),
            }))
            lead_ineq[phi_r] = np.ones((1, n_p))
            lead_ineq[mu_ru] = np.ones((1, 1))

    # Measured-voltage stationarity and, for pairs with normal operation,
    # the voltage-map multipliers.
    if s1 is Scenario.N:
        eta = s2
        coeffs_n = pretest_coeffs(Scenario.N, ctx.mats[Scenario.N], ctx.z,
                                  ctx.k, ctx.r_f)
        sys.add_block("eps", 3)
        sys.add_block("zeta", s_dim)
        phi_n = nonneg("phi@N", n_p)
        loop = pretest_coeffs(eta, ctx.mats[eta], ctx.z, ctx.k, ctx.r_f)
        sys.add_eq({
            "eps": np.eye(3, dtype=complex),
            f"beta@{eta.value}": loop.psi.reshape(3, 1),
        }, np.zeros(3), label="v_L")
        sys.add_eq({
            "eps": np.conj(coeffs_n.omega_n).T,
            "zeta": -np.eye(s_dim, dtype=complex),
        }, np.zeros(s_dim), label="u@N")
        sys.add_real_eq({
            "alpha": _real_map(sigma.conj().T @ gamma_of[Scenario.N].conj().T),
            "zeta": _real_map(sigma.conj().T),
            phi_n: p_rows.T,
        }, np.zeros(2 * d), label="lam@N")
        lead_ineq[phi_n] = np.ones((1, n_p))
        lead_terms = {"alpha": (gamma_of[s1] - gamma_of[s2]).conj().T,
                      "zeta": np.eye(s_dim, dtype=complex)}
    else:
        psis = {s: pretest_coeffs(s, ctx.mats[s], ctx.z, ctx.k, ctx.r_f).psi
                for s in (s1, s2)}
        sys.add_eq({
            f"beta@{s1.value}": psis[s1].reshape(3, 1),
            f"beta@{s2.value}": psis[s2].reshape(3, 1),
        }, np.zeros(3), label="v_L")
        lead_terms = {"alpha": (gamma_of[s1] - gamma_of[s2]).conj().T}

    sys.add_block("chi", 1, complex_valued=False)
    bilinears.insert(0, BilinearTerm("chi", lead_terms))
    # Leading inequality: chi - sum(...) >= 1, stored as <= form.
    coeffs_ineq = {"chi": np.array([[-1.0]])}
    for name, row in lead_ineq.items():
        if np.any(row):
            coeffs_ineq[name] = row
    sys.add_ineq(coeffs_ineq, np.array([-1.0]), label="leading")

    sys.bilinear = [f"{b.alias} = Re[u0(delta)^H ({' + '.join(b.terms)})]"
                    for b in bilinears]
    return DualSystem(pair=(s1, s2), system=sys, bilinears=bilinears,
                      unc=ctx.unc, drop_r=drop_r)


def bind_dual(dual: DualSystem, signal: AuxSignal | None) -> ConstraintSystem:
    """Pin the alias variables to their products at a fixed signal."""
    import copy

    sys = copy.deepcopy(dual.system)
    u0 = dual.u0_at(signal)
    for term in dual.bilinears:
        coeffs = {term.alias: np.array([[1.0]])}
        for name, mat in term.terms.items():
            q = mat.conj().T @ u0  # so that Re[u0^H M x] = Re[q^H x]
            coeffs[name] = -_re_inner_row(q).reshape(1, -1)
        sys.add_real_eq(coeffs, np.zeros(1), label=f"bind:{term.alias}")
    return sys


def transcribed_feasibility(dual: DualSystem, signal: AuxSignal | None,
                            ) -> FeasibilityResult:
    return solve_feasibility(bind_dual(dual, signal).realify(),
                             want_certificate=False)


# ---------------------------------------------------------------------------
# Uniform-injection scan
# ---------------------------------------------------------------------------


@dataclass
class ScanResult:
    points: np.ndarray  # complex gridpoints
    pairs: list[tuple[Scenario, Scenario]]
    separated: np.ndarray  # bool (n_points, n_pairs)
    n_ibr: int

    def all_pair_mask(self) -> np.ndarray:
        return self.separated.all(axis=1)

    def best_point(self) -> complex | None:
        """Minimum-norm gridpoint separating every requested pair."""
        mask = self.all_pair_mask()
        if not np.any(mask):
            return None
        idx = np.flatnonzero(mask)
        best = idx[np.argmin(np.abs(self.points[idx]))]
        return complex(self.points[best])

    def best_signal_norm(self) -> float | None:
        p = self.best_point()
        if p is None:
            return None
        return abs(p) * np.sqrt(self.n_ibr)


def scan_uniform_injection(pairs, grid_points, ctx: IntersectionContext,
                           progress=None) -> ScanResult:
    """Separation flags for a uniform injection over a complex grid.

    One dual-system feasibility problem per gridpoint and pair; a feasible
    dual marks the pair separated at that signal.
    """
    n_ibr = ctx.unc.n_ibr
    pts = np.asarray(list(grid_points), dtype=complex).reshape(-1)
    flags = np.zeros((pts.size, len(pairs)), dtype=bool)
    for i, delta in enumerate(pts):
        signal = AuxSignal.uniform(complex(delta), n_ibr)
        for j, (s1, s2) in enumerate(pairs):
            dual = solve_feasibility(mechanical_dual(s1, s2, signal, ctx),
                                     want_certificate=False)
            flags[i, j] = dual.feasible
        if progress is not None:
            progress(i + 1, pts.size)
    return ScanResult(points=pts, pairs=list(pairs), separated=flags,
                      n_ibr=n_ibr)
