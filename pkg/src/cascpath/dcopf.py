"""Re-dispatch LP: minimize generation plus load-shedding cost after failures.

Variables are per-bus net injections P and per-bus shedding dD.  The
inequality rows follow one fixed global ordering per line state:

    [ +flow rows (in-service lines, id order) ]   Psi P <= L
    [ -flow rows (same order)                 ]  -Psi P <= L
    [ capacity rows, bus order                ]   P - dD <= C (Gmax.S_G) - D
    [ shedding upper rows, bus order          ]   dD <= D
    [ shedding lower rows, bus order          ]  -dD <= 0

plus the single balance equality 1'P = 0.  Everything scenario-dependent
enters through the parameter vector phi = [Gmax.S_G ; D] via a constant
matrix F, so problems on the same line state differ only in phi.

Flow rows of out-of-service lines (0 <= 0 identically) are dropped so the
strict critical-region membership test stays meaningful.

A tiny deterministic index-based cost perturbation makes the optimum unique
for every phi; reported objectives always use the unperturbed costs.  Unique
optima are what make the cached affine fast path return exactly what a full
solve would, independent of cache contents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .casedata import CaseData
from .gsdf import GsdfMatrix
from .simplex import (
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    LpSolution,
    solve_inequality_lp,
)

COST_PERTURBATION_REL = 1e-7


class UnboundedDispatchError(Exception):
    """The dispatch LP reported unboundedness; the model is broken."""


@dataclass(frozen=True)
class DispatchProblem:
    """One re-dispatch instance: a line state's network plus scenario data."""

    case: CaseData
    gsdf: GsdfMatrix
    gen_state: np.ndarray   # binary per generator
    gen_caps: np.ndarray    # MW per generator, wind entries already scenario-valued
    loads: np.ndarray       # MW per bus

    def __post_init__(self):
        for name in ("gen_state", "gen_caps", "loads"):
            v = np.asarray(getattr(self, name), dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.gen_state.shape != (self.case.n_gen,):
            raise ValueError("gen_state length mismatch")
        if self.gen_caps.shape != (self.case.n_gen,):
            raise ValueError("gen_caps length mismatch")
        if self.loads.shape != (self.case.n_bus,):
            raise ValueError("loads length mismatch")

    @property
    def phi(self) -> np.ndarray:
        return np.concatenate([self.gen_caps * self.gen_state, self.loads])


@dataclass
class LpCanonical:
    """Inequality-form LP for one line state, parameterized by phi."""

    c_objective: np.ndarray   # unperturbed cost, used for reported objectives
    c_solve: np.ndarray       # perturbed cost handed to the solver
    a_ub: np.ndarray          # m x 2N
    b_base: np.ndarray        # m
    f_param: np.ndarray       # m x (n_gen + N)
    a_eq: np.ndarray          # 2N
    in_service: np.ndarray    # line indices (0-based) of the flow blocks
    n_bus: int
    phi: np.ndarray = None    # parameter vector of the generating problem
    _dual_form: tuple = field(default=None, repr=False, compare=False)

    def b_of(self, phi: np.ndarray) -> np.ndarray:
        return self.b_base + self.f_param @ phi

    @property
    def n_rows(self) -> int:
        return self.a_ub.shape[0]

    def dual_form(self):
        if self._dual_form is None:
            from .simplex import build_dual_form

            self._dual_form = build_dual_form(self.c_solve, self.a_ub, self.a_eq)
        return self._dual_form


@dataclass(frozen=True)
class DispatchSolution:
    injections: np.ndarray    # P, MW per bus
    shedding: np.ndarray      # dD, MW per bus
    objective: float          # unperturbed cost c_p'P + c_d'dD
    status: str               # "optimal" | "infeasible"
    active_set: tuple = ()    # tight inequality rows forming the basis
    duals: np.ndarray = None
    eq_multiplier: float = 0.0
    eq_in_basis: bool = False
    degenerate_basis: bool = False
    from_cache: bool = False

    @property
    def total_shed(self) -> float:
        return float(self.shedding.sum())


def build_lp_blocks(case: CaseData, gsdf: GsdfMatrix,
                    gen_nonnegative: bool = False) -> LpCanonical:
    """Constant LP data for a line state (everything except phi)."""
    n = case.n_bus
    ng = case.n_gen
    in_service = np.flatnonzero(gsdf.line_state == 1)
    psi = gsdf.values[in_service, :]
    limits = case.arr.flow_limit[in_service]
    k_in = in_service.size

    nx = 2 * n
    m = 2 * k_in + 3 * n + (n if gen_nonnegative else 0)
    a = np.zeros((m, nx))
    b = np.zeros(m)
    f = np.zeros((m, ng + n))

    r = 0
    a[r:r + k_in, :n] = psi
    b[r:r + k_in] = limits
    r += k_in
    a[r:r + k_in, :n] = -psi
    b[r:r + k_in] = limits
    r += k_in
    # capacity rows: P - dD <= C (Gmax.S_G) - D
    a[r:r + n, :n] = np.eye(n)
    a[r:r + n, n:] = -np.eye(n)
    f[r:r + n, :ng] = case.arr.connection
    f[r:r + n, ng:] = -np.eye(n)
    r += n
    # shedding upper rows: dD <= D
    a[r:r + n, n:] = np.eye(n)
    f[r:r + n, ng:] = np.eye(n)
    r += n
    # shedding lower rows: -dD <= 0
    a[r:r + n, n:] = -np.eye(n)
    r += n
    if gen_nonnegative:
        # optional physical floor: P + D - dD >= 0
        a[r:r + n, :n] = -np.eye(n)
        a[r:r + n, n:] = np.eye(n)
        f[r:r + n, ng:] = np.eye(n)

    a_eq = np.zeros(nx)
    a_eq[:n] = 1.0

    c_obj = np.concatenate([case.arr.bus_cost, case.arr.shed_cost])
    scale = max(np.abs(c_obj).max(), 1.0)
    pert = COST_PERTURBATION_REL * scale * (np.arange(1, nx + 1) / nx)
    return LpCanonical(
        c_objective=c_obj,
        c_solve=c_obj + pert,
        a_ub=a,
        b_base=b,
        f_param=f,
        a_eq=a_eq,
        in_service=in_service,
        n_bus=n,
    )


def build_lp(problem: DispatchProblem, gen_nonnegative: bool = False) -> LpCanonical:
    blocks = build_lp_blocks(problem.case, problem.gsdf, gen_nonnegative)
    blocks.phi = problem.phi
    return blocks


def _to_dispatch(lp: LpCanonical, sol: LpSolution, from_cache: bool = False) -> DispatchSolution:
    n = lp.n_bus
    if sol.status == PRIMAL_INFEASIBLE:
        return DispatchSolution(
            injections=np.zeros(n),
            shedding=np.zeros(n),
            objective=np.nan,
            status="infeasible",
        )
    if sol.status != OPTIMAL:
        raise UnboundedDispatchError(
            f"dispatch LP did not solve (solver status {sol.status}); "
            "this indicates a modeling bug"
        )
    x = sol.x
    return DispatchSolution(
        injections=x[:n].copy(),
        shedding=x[n:].copy(),
        objective=float(lp.c_objective @ x),
        status="optimal",
        active_set=tuple(int(i) for i in sol.active_rows),
        duals=sol.duals,
        eq_multiplier=sol.eq_multiplier,
        eq_in_basis=sol.eq_in_basis,
        degenerate_basis=sol.artificial_in_basis,
        from_cache=from_cache,
    )


def solve_baseline(lp: LpCanonical, phi: np.ndarray = None) -> DispatchSolution:
    """Full simplex solve; the exact reference the fast path must reproduce."""
    if phi is None:
        phi = lp.phi
    if phi is None:
        raise ValueError("phi required (LP built without a generating problem)")
    sol = solve_inequality_lp(
        lp.c_solve, lp.a_ub, lp.b_of(phi), lp.a_eq, dual_form=lp.dual_form()
    )
    return _to_dispatch(lp, sol)


def solve_problem(problem: DispatchProblem, gen_nonnegative: bool = False) -> DispatchSolution:
    return solve_baseline(build_lp(problem, gen_nonnegative))


def kkt_residuals(lp: LpCanonical, phi: np.ndarray, sol: DispatchSolution) -> dict:
    """Feasibility/optimality certificate numbers for a claimed optimum."""
    x = np.concatenate([sol.injections, sol.shedding])
    b = lp.b_of(phi)
    slack = b - lp.a_ub @ x
    stationarity = lp.c_solve + lp.a_ub.T @ sol.duals + sol.eq_multiplier * lp.a_eq
    comp = np.abs(sol.duals * slack)
    return {
        "primal_infeas": float(max(0.0, -slack.min())) if slack.size else 0.0,
        "eq_residual": float(abs(lp.a_eq @ x)),
        "stationarity": float(np.abs(stationarity).max()),
        "dual_negativity": float(max(0.0, -sol.duals.min())) if sol.duals.size else 0.0,
        "complementarity": float(comp.max()) if comp.size else 0.0,
    }


def dump_lp(lp: LpCanonical, phi: np.ndarray = None) -> str:
    """Text dump in LP interchange format for external cross-checks."""
    if phi is None:
        phi = lp.phi
    b = lp.b_of(phi)
    n = lp.n_bus
    names = [f"P{i + 1}" for i in range(n)] + [f"dD{i + 1}" for i in range(n)]

    def expr(coeffs):
        terms = []
        for j, v in enumerate(coeffs):
            if v != 0.0:
                terms.append(f"{'+' if v >= 0 else '-'} {abs(v):.12g} {names[j]}")
        return " ".join(terms) if terms else "0 P1"

    out = ["Minimize", " obj: " + expr(lp.c_objective), "Subject To"]
    out.append(" balance: " + expr(lp.a_eq) + " = 0")
    for i in range(lp.n_rows):
        out.append(f" r{i}: " + expr(lp.a_ub[i]) + f" <= {b[i]:.12g}")
    out.append("Bounds")
    for nm in names:
        out.append(f" {nm} free")
    out.append("End")
    return "\n".join(out) + "\n"
