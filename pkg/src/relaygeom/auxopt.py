"""Minimally disruptive auxiliary-signal design.

The design problem minimizes the quadratic disruption of the signal subject
to every requested scenario pair having a feasible (hence separating) dual
system.  The dual rows that multiply the signal are replaced by alias
variables; the gap between each alias and its true product is the residual
that an alternating scheme drives to zero:

  step 1  with the signal fixed, minimize the penalized residual over all
          dual variables (one QP per pair);
  step 2  with the product-side variables fixed, minimize disruption plus
          penalized residual over the signal, the aliases, and the
          remaining dual variables (one joint QP);
  step 3  add the residual into the scaled multiplier and repeat.

Convergence is declared when both the objective and the residual settle.
Returned signals are re-verified pair by pair against the mechanical dual;
verification is never inferred from convergence alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .convexsolve import SolverError, solve_qp
from .pretest import IntersectionContext
from .sep import (
    DualSystem,
    SeparationVerdict,
    Verdict,
    build_dual,
    check_separation,
)
from .uncertainty import AuxSignal, InjectionKind


@dataclass
class AdmmConfig:
    q_matrix: np.ndarray | None = None  # Hermitian PSD over the signal
    rho: float = 1.0
    delta0: AuxSignal | None = None
    max_iters: int = 200
    res_tol: float = 1e-6
    obj_tol: float = 1e-8
    obj_window: int = 5
    injection: InjectionKind = InjectionKind.NEGATIVE_SEQUENCE
    cap: float | None = None  # per-IBR |delta_k| bound
    cap_sides: int = 16
    # The dual-variable step has degenerate optima (dual rays scale freely);
    # a tiny linear pull toward larger signal products tie-breaks toward
    # rays that carry gradient information for the signal step.  Without it
    # a minimum-norm QP solution stalls cold starts.
    ray_pull: float = 1e-6
    ray_ridge: float = 1e-12


@dataclass
class AdmmTrace:
    objective: list[float] = field(default_factory=list)
    residual_norm: list[float] = field(default_factory=list)
    multiplier_norm: list[float] = field(default_factory=list)


@dataclass
class AuxOptResult:
    signal: AuxSignal
    trace: AdmmTrace
    verified: bool
    verdicts: dict[tuple, SeparationVerdict]
    flag: str  # "already_separated" | "converged" | "max_iters"

    @property
    def objective_value(self) -> float:
        return self.trace.objective[-1] if self.trace.objective else 0.0


def objective(signal, q_matrix=None) -> float:
    """Disruption cost Re[delta^H Q delta] (the squared norm for Q = I)."""
    delta = signal.delta if isinstance(signal, AuxSignal) else np.asarray(
        signal, dtype=complex).reshape(-1)
    if q_matrix is None:
        return float(np.real(np.vdot(delta, delta)))
    q = np.asarray(q_matrix, dtype=complex)
    _check_psd(q)
    return float(np.real(np.vdot(delta, q @ delta)))


def _check_psd(q: np.ndarray):
    if not np.allclose(q, q.conj().T, atol=1e-10):
        raise ValueError("cost matrix must be Hermitian")
    w = np.linalg.eigvalsh(q)
    if w.min() < -1e-10 * max(1.0, w.max()):
        raise ValueError("cost matrix must be positive semidefinite")


def _real_quad(q: np.ndarray) -> np.ndarray:
    """Real symmetric matrix with x_r' Q_r x_r = Re[x^H Q x]."""
    return np.block([[q.real, -q.imag], [q.imag, q.real]])


def _re_row(q: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(q).real, np.asarray(q).imag])


class _PairWorkspace:
    """Realified alias-form dual system of one pair, ready for the QPs."""

    def __init__(self, dual: DualSystem, injection: InjectionKind):
        self.dual = dual
        self.sf = dual.system.realify()
        self.n = self.sf.width
        lay = self.sf.layout
        self.alias_idx = np.array([lay[t.alias].start for t in dual.bilinears])
        self.n_terms = len(dual.bilinears)
        s_dim = dual.unc.nominal().size
        # Real maps x -> realify(M x) per bilinear term.
        self.m_maps = []
        for term in dual.bilinears:
            m = np.zeros((2 * s_dim, self.n))
            for name, mat in term.terms.items():
                blk = lay[name]
                rb = np.block([[mat.real, -mat.imag], [mat.imag, mat.real]])
                m[:, blk.start: blk.stop] += rb
            self.m_maps.append(m)
        self.t_full = dual.full_injection_map(injection)
        # Upsilon-1 coordinates: realified columns of signal-multiplied blocks.
        ones = np.zeros(self.n, dtype=bool)
        for name in dual.upsilon1_blocks:
            blk = lay[name]
            ones[blk.start: blk.stop] = True
        self.ups1_mask = ones
        self.free_mask = ~ones

    def bootstrap_ray(self, u0_real: np.ndarray) -> np.ndarray | None:
        """System point maximizing the leading signal product (capped at 1).

        When the dual systems are infeasible at the current signal, the
        penalized dual step settles on a near-zero ray that carries no
        information about how the signal should move.  This LP recovers the
        steepest certificate direction instead.
        """
        from scipy.optimize import linprog

        lead = u0_real @ self.m_maps[0]
        a_ub = np.vstack([self.sf.a_in, lead.reshape(1, -1)])
        b_ub = np.concatenate([self.sf.b_in, [1.0]])
        res = linprog(c=-lead, A_ub=a_ub, b_ub=b_ub,
                      A_eq=self.sf.a_eq if self.sf.a_eq.size else None,
                      b_eq=self.sf.b_eq if self.sf.a_eq.size else None,
                      bounds=(None, None), method="highs")
        if res.status != 0 or res.x is None:
            return None
        if float(lead @ res.x) < 1e-9:
            return None
        return np.asarray(res.x, dtype=float)

    def residual_matrix(self, u0_real: np.ndarray) -> np.ndarray:
        """K with R = K x at a fixed signal (u0_real = realify(u0(delta)))."""
        k = np.zeros((self.n_terms, self.n))
        for t, m in enumerate(self.m_maps):
            k[t, :] = -(u0_real @ m)
            k[t, self.alias_idx[t]] += 1.0
        return k

    def product_vectors(self, x: np.ndarray) -> np.ndarray:
        """Complex products w_t = M_t x for fixed dual variables."""
        s_dim = self.dual.unc.nominal().size
        out = np.zeros((self.n_terms, s_dim), dtype=complex)
        for t, m in enumerate(self.m_maps):
            w = m @ x
            out[t] = w[:s_dim] + 1j * w[s_dim:]
        return out


def optimize_auxiliary(pairs, ctx: IntersectionContext,
                       cfg: AdmmConfig | None = None,
                       ) -> AuxOptResult:
    """Alternating signal design over the requested scenario pairs."""
    cfg = cfg or AdmmConfig()
    pairs = [tuple(p) for p in pairs]
    n_ibr = ctx.unc.n_ibr
    n_delta = 3 * n_ibr if cfg.injection is InjectionKind.PER_PHASE else n_ibr
    q = np.eye(n_delta, dtype=complex) if cfg.q_matrix is None \
        else np.asarray(cfg.q_matrix, dtype=complex)
    _check_psd(q)
    if q.shape != (n_delta, n_delta):
        raise ValueError(f"cost matrix must be {n_delta}x{n_delta}")
    q_real = _real_quad(q)

    spaces = [_PairWorkspace(build_dual(s1, s2, ctx), cfg.injection)
              for s1, s2 in pairs]
    delta = (cfg.delta0.delta.copy() if cfg.delta0 is not None
             else np.zeros(n_delta, dtype=complex))
    if delta.size != n_delta:
        raise ValueError(
            f"starting signal has {delta.size} entries, expected {n_delta}")
    cold_start = not np.any(delta)
    pis = [np.zeros(ws.n_terms) for ws in spaces]
    xs: list[np.ndarray] = [np.zeros(ws.n) for ws in spaces]
    trace = AdmmTrace()
    candidates: list[np.ndarray] = []
    flag = "max_iters"

    def u0_real_at(dvec: np.ndarray) -> list[np.ndarray]:
        sig = AuxSignal(dvec, cfg.injection)
        return [_re_row(ws.dual.u0_at(sig)) for ws in spaces]

    for it in range(cfg.max_iters):
        u0_reals = u0_real_at(delta)
        # Step 1: per-pair dual-variable QPs at the current signal.
        residual_after_1 = []
        w_products = []
        for idx, ws in enumerate(spaces):
            k = ws.residual_matrix(u0_reals[idx])
            ridge = max(cfg.ray_ridge, 1e-12)
            p_mat = 2.0 * cfg.rho * (k.T @ k) + 2.0 * ridge * np.eye(ws.n)
            q_vec = 2.0 * cfg.rho * (k.T @ pis[idx])
            if cfg.ray_pull:
                for t, m in enumerate(ws.m_maps):
                    q_vec = q_vec - cfg.ray_pull * (u0_reals[idx] @ m)
            try:
                xs[idx] = solve_qp(p_mat, q_vec, ws.sf.a_eq, ws.sf.b_eq,
                                   ws.sf.a_in, ws.sf.b_in)
            except SolverError:
                pass  # keep the previous iterate
            residual_after_1.append(k @ xs[idx])
            w_products.append(ws.product_vectors(xs[idx]))
        res1 = float(np.linalg.norm(np.concatenate(residual_after_1)))
        if it == 0 and cold_start and res1 < cfg.res_tol:
            flag = "already_separated"
            candidates.append(delta.copy())
            trace.objective.append(objective(delta, q))
            trace.residual_norm.append(res1)
            trace.multiplier_norm.append(0.0)
            break

        # Step 2: joint QP over the signal with linearized products.
        delta = _signal_step(spaces, xs, w_products, pis, q_real, cfg, n_delta)

        # Residuals at the new signal with step-1 product vectors.
        u0_reals = u0_real_at(delta)
        res_parts = []
        for idx, ws in enumerate(spaces):
            aliases = xs[idx][ws.alias_idx]
            prods = np.array([float(u0_reals[idx] @ _re_row(w))
                              for w in w_products[idx]])
            r = aliases - prods
            res_parts.append(r)
            pis[idx] = pis[idx] + r
        res_norm = float(np.linalg.norm(np.concatenate(res_parts)))
        obj = objective(delta, q)
        trace.objective.append(obj)
        trace.residual_norm.append(res_norm)
        trace.multiplier_norm.append(
            float(np.linalg.norm(np.concatenate(pis))))
        if res_norm < cfg.res_tol:
            candidates.append(delta.copy())
            w = cfg.obj_window
            if len(trace.objective) > w and abs(
                    trace.objective[-1] - trace.objective[-1 - w]) < cfg.obj_tol:
                flag = "converged"
                break

    # Post-hoc verification, preferring the cheapest verified candidate.
    ranked = sorted({tuple(np.round(c, 12)) for c in candidates},
                    key=lambda c: objective(np.array(c), q))
    ranked = [np.array(c) for c in ranked] or [delta]
    best_signal, best_verdicts, verified = None, {}, False
    for cand in ranked:
        sig = AuxSignal(cand, cfg.injection)
        verdicts = {p: check_separation(p[0], p[1], sig, ctx,
                                        want_certificates=False)
                    for p in pairs}
        if all(v.verdict is Verdict.SEPARATED for v in verdicts.values()):
            best_signal, best_verdicts, verified = sig, verdicts, True
            break
        if best_signal is None:
            best_signal, best_verdicts = sig, verdicts
    if not verified:
        flag = "max_iters"
    return AuxOptResult(signal=best_signal, trace=trace, verified=verified,
                        verdicts=best_verdicts, flag=flag)


def _signal_step(spaces, xs, w_products, pis, q_real, cfg: AdmmConfig,
                 n_delta: int) -> np.ndarray:
    """Joint QP over the signal, the aliases, and the non-product variables.

    The product-side variables are held at their dual-step values
    (substituted into the constraint right-hand sides); a small two-sided
    slack absorbs the round-off they carry.
    """
    frees = [np.flatnonzero(ws.free_mask) for ws in spaces]
    offsets = [2 * n_delta]
    for free in frees:
        offsets.append(offsets[-1] + free.size)
    total = offsets[-1]

    k_rows, consts = [], []
    aeq_rows, beq_rows, ain_rows, bin_rows = [], [], [], []
    for idx, ws in enumerate(spaces):
        free, fixed = frees[idx], np.flatnonzero(ws.ups1_mask)
        x_fix = xs[idx]
        u0 = ws.dual.unc.nominal()
        k = sp.lil_matrix((ws.n_terms, total))
        const = np.zeros(ws.n_terms)
        free_pos = {col: p for p, col in enumerate(free)}
        for t in range(ws.n_terms):
            w = w_products[idx][t]
            k[t, offsets[idx] + free_pos[ws.alias_idx[t]]] = 1.0
            k[t, : 2 * n_delta] = -_re_row(ws.t_full.conj().T @ w)
            const[t] = float(np.real(np.vdot(u0, w))) - pis[idx][t]
        k_rows.append(k.tocsr())
        consts.append(const)
        pad_l = sp.csr_matrix((ws.sf.a_eq.shape[0], offsets[idx]))
        pad_r = sp.csr_matrix((ws.sf.a_eq.shape[0], total - offsets[idx + 1]))
        aeq_rows.append(sp.hstack([pad_l, sp.csr_matrix(ws.sf.a_eq[:, free]),
                                   pad_r]))
        beq_rows.append(ws.sf.b_eq - ws.sf.a_eq[:, fixed] @ x_fix[fixed])
        pad_l = sp.csr_matrix((ws.sf.a_in.shape[0], offsets[idx]))
        pad_r = sp.csr_matrix((ws.sf.a_in.shape[0], total - offsets[idx + 1]))
        ain_rows.append(sp.hstack([pad_l, sp.csr_matrix(ws.sf.a_in[:, free]),
                                   pad_r]))
        bin_rows.append(ws.sf.b_in - ws.sf.a_in[:, fixed] @ x_fix[fixed])

    k_all = sp.vstack(k_rows, format="csr")
    c_all = np.concatenate(consts)
    p_quad = sp.lil_matrix((total, total))
    p_quad[: 2 * n_delta, : 2 * n_delta] = 2.0 * q_real
    p_full = (p_quad.tocsr() + 2.0 * cfg.rho * (k_all.T @ k_all)
              + 1e-12 * sp.eye(total, format="csr"))
    q_full = -2.0 * cfg.rho * (k_all.T @ c_all)

    if cfg.cap is not None:
        rows, rhs = _cap_rows(cfg, n_delta, total)
        ain_rows.append(sp.csr_matrix(rows))
        bin_rows.append(rhs)

    x = solve_qp(p_full, q_full,
                 sp.vstack(aeq_rows, format="csr"),
                 np.concatenate(beq_rows),
                 sp.vstack(ain_rows, format="csr"),
                 np.concatenate(bin_rows),
                 eq_slack=1e-7)
    for idx, ws in enumerate(spaces):
        xs[idx][frees[idx]] = x[offsets[idx]: offsets[idx + 1]]
    d = x[: 2 * n_delta]
    return d[:n_delta] + 1j * d[n_delta:]


def _cap_rows(cfg: AdmmConfig, n_delta: int, total: int):
    """Inner polygonal approximation of the per-IBR magnitude cap."""
    sides = cfg.cap_sides
    bound = cfg.cap * np.cos(np.pi / sides)
    angles = 2.0 * np.pi * np.arange(sides) / sides
    rows = []
    for k in range(n_delta):
        for a in angles:
            row = np.zeros(total)
            row[k] = np.cos(a)
            row[n_delta + k] = np.sin(a)
            rows.append(row)
    return np.array(rows), np.full(len(rows), bound)
