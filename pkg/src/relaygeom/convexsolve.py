"""Constraint containers, realification, and small dense LP/QP/SOC solves.

Constraint systems are kept legible: complex affine equalities over named
variable blocks, real linear inequalities over realified coordinates, and
second-order-cone rows.  Complex quantities are split into [Re; Im] only at
the solver boundary.  Feasibility and alternative (infeasibility
certificate) problems go to HiGHS, quadratic programs to OSQP, and cone
feasibility to Clarabel via cvxpy.  All solves are deterministic for
identical inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FEAS_TOL = 1e-7


class SolverError(RuntimeError):
    """Numerical failure inside an LP/QP/SOC solve."""


@dataclass(frozen=True)
class VarBlock:
    name: str
    dim: int
    complex_valued: bool = True

    @property
    def width(self) -> int:
        """Realified coordinate count."""
        return 2 * self.dim if self.complex_valued else self.dim


@dataclass
class ComplexEq:
    """sum_b C_b x_b = rhs with complex rows; real blocks allowed."""

    coeffs: dict[str, np.ndarray]
    rhs: np.ndarray
    label: str = ""


@dataclass
class RealIneq:
    """sum_b A_b x_b(realified) <= rhs."""

    coeffs: dict[str, np.ndarray]
    rhs: np.ndarray
    label: str = ""


@dataclass
class RealEq:
    """sum_b A_b x_b(realified) = rhs."""

    coeffs: dict[str, np.ndarray]
    rhs: np.ndarray
    label: str = ""


@dataclass
class SocRow:
    """|| V x + v0 ||_2 <= w . x + w0 over realified coordinates."""

    v_coeffs: dict[str, np.ndarray]
    v0: np.ndarray
    w_coeffs: dict[str, np.ndarray]
    w0: float
    label: str = ""


@dataclass
class ConstraintSystem:
    blocks: dict[str, VarBlock] = field(default_factory=dict)
    eqs: list[ComplexEq] = field(default_factory=list)
    real_eqs: list[RealEq] = field(default_factory=list)
    ineqs: list[RealIneq] = field(default_factory=list)
    socs: list[SocRow] = field(default_factory=list)
    bilinear: list[str] = field(default_factory=list)

    # -- construction -------------------------------------------------------

    def add_block(self, name: str, dim: int, complex_valued: bool = True) -> str:
        if name in self.blocks:
            raise ValueError(f"duplicate block {name!r}")
        self.blocks[name] = VarBlock(name, dim, complex_valued)
        return name

    def add_eq(self, coeffs: dict[str, np.ndarray], rhs, label: str = ""):
        rhs = np.atleast_1d(np.asarray(rhs, dtype=complex))
        checked = {}
        for name, c in coeffs.items():
            blk = self._require(name)
            c = np.atleast_2d(np.asarray(c, dtype=complex))
            if c.shape != (rhs.size, blk.dim):
                raise ValueError(
                    f"eq {label!r}: block {name} coeff shape {c.shape} != "
                    f"({rhs.size}, {blk.dim})")
            checked[name] = c
        self.eqs.append(ComplexEq(checked, rhs, label))

    def add_ineq(self, coeffs: dict[str, np.ndarray], rhs, label: str = ""):
        self.ineqs.append(RealIneq(*self._check_real(coeffs, rhs, label)))

    def add_real_eq(self, coeffs: dict[str, np.ndarray], rhs, label: str = ""):
        self.real_eqs.append(RealEq(*self._check_real(coeffs, rhs, label)))

    def _check_real(self, coeffs, rhs, label):
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        checked = {}
        for name, c in coeffs.items():
            blk = self._require(name)
            c = np.atleast_2d(np.asarray(c, dtype=float))
            if c.shape != (rhs.size, blk.width):
                raise ValueError(
                    f"row {label!r}: block {name} coeff shape {c.shape} != "
                    f"({rhs.size}, {blk.width})")
            checked[name] = c
        return checked, rhs, label

    def add_soc(self, v_coeffs: dict[str, np.ndarray], v0, w_coeffs, w0: float,
                label: str = ""):
        v0 = np.atleast_1d(np.asarray(v0, dtype=float))
        v_checked, w_checked = {}, {}
        for name, c in v_coeffs.items():
            blk = self._require(name)
            c = np.atleast_2d(np.asarray(c, dtype=float))
            if c.shape != (v0.size, blk.width):
                raise ValueError(f"soc {label!r}: bad V shape for block {name}")
            v_checked[name] = c
        for name, c in w_coeffs.items():
            blk = self._require(name)
            c = np.asarray(c, dtype=float).reshape(blk.width)
            w_checked[name] = c
        self.socs.append(SocRow(v_checked, v0, w_checked, float(w0), label))

    def _require(self, name: str) -> VarBlock:
        if name not in self.blocks:
            raise ValueError(f"unknown block {name!r}")
        return self.blocks[name]

    # -- realification ------------------------------------------------------

    def layout(self) -> dict[str, slice]:
        out, off = {}, 0
        for name, blk in self.blocks.items():
            out[name] = slice(off, off + blk.width)
            off += blk.width
        return out

    @property
    def width(self) -> int:
        return sum(b.width for b in self.blocks.values())

    def realify(self) -> "StandardForm":
        lay = self.layout()
        n = self.width
        eq_rows, eq_rhs = [], []
        for eq in self.eqs:
            m = eq.rhs.size
            re_row = np.zeros((m, n))
            im_row = np.zeros((m, n))
            for name, c in eq.coeffs.items():
                blk = self.blocks[name]
                s = lay[name]
                if blk.complex_valued:
                    d = blk.dim
                    re_row[:, s.start: s.start + d] += c.real
                    re_row[:, s.start + d: s.stop] += -c.imag
                    im_row[:, s.start: s.start + d] += c.imag
                    im_row[:, s.start + d: s.stop] += c.real
                else:
                    re_row[:, s] += c.real
                    im_row[:, s] += c.imag
            eq_rows += [re_row, im_row]
            eq_rhs += [eq.rhs.real, eq.rhs.imag]
        for req in self.real_eqs:
            m = req.rhs.size
            row = np.zeros((m, n))
            for name, c in req.coeffs.items():
                row[:, lay[name]] += c
            eq_rows.append(row)
            eq_rhs.append(req.rhs)
        in_rows, in_rhs = [], []
        for iq in self.ineqs:
            m = iq.rhs.size
            row = np.zeros((m, n))
            for name, c in iq.coeffs.items():
                row[:, lay[name]] += c
            in_rows.append(row)
            in_rhs.append(iq.rhs)
        socs = []
        for soc in self.socs:
            k = soc.v0.size
            v = np.zeros((k, n))
            for name, c in soc.v_coeffs.items():
                v[:, lay[name]] += c
            w = np.zeros(n)
            for name, c in soc.w_coeffs.items():
                w[lay[name]] += c
            socs.append((v, soc.v0.copy(), w, soc.w0))
        a_eq = np.vstack(eq_rows) if eq_rows else np.zeros((0, n))
        b_eq = np.concatenate(eq_rhs) if eq_rhs else np.zeros(0)
        a_in = np.vstack(in_rows) if in_rows else np.zeros((0, n))
        b_in = np.concatenate(in_rhs) if in_rhs else np.zeros(0)
        return StandardForm(a_eq=a_eq, b_eq=b_eq, a_in=a_in, b_in=b_in,
                            socs=socs, layout=lay, blocks=dict(self.blocks))

    # -- point checking -----------------------------------------------------

    def residuals(self, point: dict[str, np.ndarray]) -> dict[str, float]:
        """Worst violation per constraint family at a named point."""
        eq_res = 0.0
        for eq in self.eqs:
            val = -eq.rhs.astype(complex)
            for name, c in eq.coeffs.items():
                val = val + c @ np.atleast_1d(np.asarray(point[name]))
            if val.size:
                eq_res = max(eq_res, float(np.max(np.abs(val))))
        for req in self.real_eqs:
            val = -req.rhs.astype(float)
            for name, c in req.coeffs.items():
                val = val + c @ self._realified_value(name, point[name])
            if val.size:
                eq_res = max(eq_res, float(np.max(np.abs(val))))
        in_res = 0.0
        for iq in self.ineqs:
            val = -iq.rhs.astype(float)
            for name, c in iq.coeffs.items():
                val = val + c @ self._realified_value(name, point[name])
            if val.size:
                in_res = max(in_res, float(np.max(val)))
        soc_res = 0.0
        for soc in self.socs:
            v = soc.v0.astype(float).copy()
            for name, c in soc.v_coeffs.items():
                v = v + c @ self._realified_value(name, point[name])
            w = soc.w0
            for name, c in soc.w_coeffs.items():
                w = w + float(c @ self._realified_value(name, point[name]))
            soc_res = max(soc_res, float(np.linalg.norm(v)) - w)
        return {"eq": eq_res, "ineq": in_res, "soc": soc_res,
                "max": max(eq_res, in_res, soc_res)}

    def _realified_value(self, name: str, value) -> np.ndarray:
        blk = self.blocks[name]
        if blk.complex_valued:
            v = np.asarray(value, dtype=complex).reshape(blk.dim)
            return np.concatenate([v.real, v.imag])
        return np.asarray(value, dtype=float).reshape(blk.dim)

    def to_text(self) -> str:
        """Plain-text standard-form dump for golden tests."""
        out = ["blocks:"]
        for b in self.blocks.values():
            tag = "C" if b.complex_valued else "R"
            out.append(f"  {b.name} {tag}^{b.dim}")
        sf = self.realify()
        np.set_printoptions(precision=6, suppress=False, linewidth=200)
        out.append(f"eq rows: {sf.a_eq.shape[0]}")
        for row, rhs in zip(sf.a_eq, sf.b_eq):
            nz = np.flatnonzero(np.abs(row) > 0)
            terms = " + ".join(f"{row[j]:.6g}*x{j}" for j in nz) or "0"
            out.append(f"  {terms} = {rhs:.6g}")
        out.append(f"ineq rows: {sf.a_in.shape[0]}")
        for row, rhs in zip(sf.a_in, sf.b_in):
            nz = np.flatnonzero(np.abs(row) > 0)
            terms = " + ".join(f"{row[j]:.6g}*x{j}" for j in nz) or "0"
            out.append(f"  {terms} <= {rhs:.6g}")
        out.append(f"soc rows: {len(sf.socs)}")
        if self.bilinear:
            out.append("bilinear:")
            out.extend(f"  {tag}" for tag in self.bilinear)
        return "\n".join(out) + "\n"


@dataclass
class StandardForm:
    """Realified system A_eq x = b_eq, A_in x <= b_in, SOC rows."""

    a_eq: np.ndarray
    b_eq: np.ndarray
    a_in: np.ndarray
    b_in: np.ndarray
    socs: list[tuple[np.ndarray, np.ndarray, np.ndarray, float]]
    layout: dict[str, slice]
    blocks: dict[str, VarBlock]

    @property
    def width(self) -> int:
        return self.a_eq.shape[1] if self.a_eq.size else (
            self.a_in.shape[1] if self.a_in.size else
            sum(b.width for b in self.blocks.values()))

    def extract(self, x: np.ndarray, name: str):
        blk = self.blocks[name]
        seg = np.asarray(x, dtype=float)[self.layout[name]]
        if blk.complex_valued:
            return seg[: blk.dim] + 1j * seg[blk.dim:]
        return seg if blk.dim > 1 else float(seg[0])

    def point_dict(self, x: np.ndarray) -> dict:
        return {name: self.extract(x, name) for name in self.blocks}

    def violation(self, x: np.ndarray) -> float:
        v = 0.0
        if self.a_eq.size:
            v = max(v, float(np.max(np.abs(self.a_eq @ x - self.b_eq))))
        if self.a_in.size:
            v = max(v, float(np.max(self.a_in @ x - self.b_in)))
        for vr, v0, w, w0 in self.socs:
            v = max(v, float(np.linalg.norm(vr @ x + v0) - (w @ x + w0)))
        return v


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


@dataclass
class FeasibilityResult:
    status: str  # "feasible" | "infeasible" | "numerical"
    x: np.ndarray | None = None
    certificate: tuple[np.ndarray, np.ndarray] | None = None
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def infeasible(self) -> bool:
        return self.status == "infeasible"


def solve_feasibility(sf: StandardForm, want_certificate: bool = True,
                      ) -> FeasibilityResult:
    """Find a point of the system or an infeasibility certificate."""
    if sf.socs:
        return _solve_soc_feasibility(sf)
    n = sf.width
    if n == 0:
        ok = np.all(np.abs(sf.b_eq) <= FEAS_TOL) and np.all(sf.b_in >= -FEAS_TOL)
        return FeasibilityResult("feasible" if ok else "infeasible",
                                 x=np.zeros(0))
    res = linprog(
        c=np.zeros(n),
        A_ub=sf.a_in if sf.a_in.size else None,
        b_ub=sf.b_in if sf.a_in.size else None,
        A_eq=sf.a_eq if sf.a_eq.size else None,
        b_eq=sf.b_eq if sf.a_eq.size else None,
        bounds=(None, None),
        method="highs",
    )
    if res.status == 0:
        return FeasibilityResult("feasible", x=res.x)
    if res.status == 2:
        cert = farkas_certificate(sf) if want_certificate else None
        if want_certificate and cert is None:
            return FeasibilityResult(
                "numerical", message="infeasible but certificate search failed")
        return FeasibilityResult("infeasible", certificate=cert)
    return FeasibilityResult("numerical", message=f"linprog status {res.status}")


def farkas_certificate(sf: StandardForm,
                       ) -> tuple[np.ndarray, np.ndarray] | None:
    """Multipliers (y, s >= 0) with A_eq'y + A_in's = 0, b_eq'y + b_in's <= -1.

    Such a pair exists exactly when the linear system is empty.
    """
    n_eq, n_in = sf.a_eq.shape[0], sf.a_in.shape[0]
    n = sf.width
    if n_eq + n_in == 0:
        return None
    a_stat = np.hstack([sf.a_eq.T, sf.a_in.T])  # (n, n_eq + n_in)
    obj_row = np.concatenate([sf.b_eq, sf.b_in]).reshape(1, -1)
    bounds = [(None, None)] * n_eq + [(0, None)] * n_in
    res = linprog(
        c=np.zeros(n_eq + n_in),
        A_eq=a_stat, b_eq=np.zeros(n),
        A_ub=obj_row, b_ub=np.array([-1.0]),
        bounds=bounds, method="highs",
    )
    if res.status != 0:
        return None
    return res.x[:n_eq], res.x[n_eq:]


def farkas_alternative_form(sf: StandardForm) -> StandardForm:
    """The alternative system itself as a standard form over (y, s).

    Feasible exactly when ``sf`` (which must be purely linear) is empty.
    """
    if sf.socs:
        raise ValueError("alternative form is defined for linear systems only")
    n_eq, n_in = sf.a_eq.shape[0], sf.a_in.shape[0]
    n = sf.width
    a_eq = np.hstack([sf.a_eq.T, sf.a_in.T])
    b_eq = np.zeros(n)
    obj_row = np.concatenate([sf.b_eq, sf.b_in]).reshape(1, -1)
    nonneg = np.hstack([np.zeros((n_in, n_eq)), -np.eye(n_in)])
    a_in = np.vstack([obj_row, nonneg])
    b_in = np.concatenate([[-1.0], np.zeros(n_in)])
    layout = {"y": slice(0, n_eq), "s": slice(n_eq, n_eq + n_in)}
    blocks = {"y": VarBlock("y", n_eq, complex_valued=False),
              "s": VarBlock("s", n_in, complex_valued=False)}
    return StandardForm(a_eq=a_eq, b_eq=b_eq, a_in=a_in, b_in=b_in,
                        socs=[], layout=layout, blocks=blocks)


def verify_certificate(sf: StandardForm, y: np.ndarray, s: np.ndarray,
                       tol: float = FEAS_TOL) -> bool:
    """Check a Farkas pair against the stationarity and objective rows."""
    stat = sf.a_eq.T @ y + sf.a_in.T @ s
    obj = float(sf.b_eq @ y + sf.b_in @ s)
    return (float(np.max(np.abs(stat))) <= tol if np.size(stat) else True) \
        and bool(np.all(s >= -tol)) and obj <= -1.0 + tol


def _solve_soc_feasibility(sf: StandardForm) -> FeasibilityResult:
    import cvxpy as cp

    x = cp.Variable(sf.width)
    cons = []
    if sf.a_eq.size:
        cons.append(sf.a_eq @ x == sf.b_eq)
    if sf.a_in.size:
        cons.append(sf.a_in @ x <= sf.b_in)
    for v, v0, w, w0 in sf.socs:
        cons.append(cp.SOC(w @ x + w0, v @ x + v0))
    prob = cp.Problem(cp.Minimize(0), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as exc:
        return FeasibilityResult("numerical", message=str(exc))
    if prob.status in ("optimal", "optimal_inaccurate"):
        return FeasibilityResult("feasible", x=np.asarray(x.value).reshape(-1))
    if prob.status in ("infeasible", "infeasible_inaccurate"):
        return FeasibilityResult("infeasible")
    return FeasibilityResult("numerical", message=f"cone solver status {prob.status}")


def solve_qp(p_mat, q_vec, a_eq=None, b_eq=None, a_in=None, b_in=None,
             eps_abs: float = 1e-8, eps_rel: float = 1e-7,
             max_iter: int = 200_000, eq_slack: float = 0.0) -> np.ndarray:
    """Minimize 0.5 x'Px + q'x subject to A_eq x = b_eq, A_in x <= b_in.

    Operator-splitting solve with polishing; P must be positive
    semidefinite.  ``eq_slack`` widens the equalities into two-sided bands,
    which keeps systems solvable when their right-hand sides carry
    round-off from an earlier solve.
    """
    import osqp

    q_vec = np.asarray(q_vec, dtype=float).reshape(-1)
    n = q_vec.size
    p_csc = sp.csc_matrix(p_mat)
    rows, lows, ups = [], [], []
    if a_eq is not None and np.size(a_eq):
        rows.append(sp.csc_matrix(a_eq))
        beq = np.asarray(b_eq, dtype=float).reshape(-1)
        lows.append(beq - eq_slack)
        ups.append(beq + eq_slack)
    if a_in is not None and np.size(a_in):
        rows.append(sp.csc_matrix(a_in))
        lows.append(np.full(np.shape(a_in)[0], -np.inf))
        ups.append(np.asarray(b_in, dtype=float).reshape(-1))
    if rows:
        a = sp.vstack(rows, format="csc")
        lo = np.concatenate(lows)
        hi = np.concatenate(ups)
    else:
        a = sp.csc_matrix((0, n))
        lo = np.zeros(0)
        hi = np.zeros(0)
    solver = osqp.OSQP()
    solver.setup(P=p_csc, q=q_vec, A=a, l=lo, u=hi, verbose=False,
                 eps_abs=eps_abs, eps_rel=eps_rel, max_iter=max_iter,
                 polish=True)
    result = solver.solve()
    status = result.info.status.lower()
    if "solved" not in status:
        raise SolverError(f"qp solve failed: {result.info.status}")
    return np.asarray(result.x, dtype=float)
