"""Dense two-phase simplex with duals, plus an independent solution checker.

Problems are stated as maximization::

    maximize    c @ z
    subject to  A_eq @ z == b_eq
                A_le @ z <= b_le
                z[j] >= 0 unless free[j]

Dual multipliers follow the maximization convention: ``dual_le >= 0``,
``dual_eq`` free, ``A.T @ y >= c`` on nonnegative columns and ``== c`` on free
columns, and ``b @ y`` equals the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Tolerances:
    pivot: float = 1e-11          # smallest usable pivot element
    optimality: float = 1e-11     # reduced-cost threshold (scaled by max |c|)
    feasibility: float = 1e-9     # phase-I residual accepted as feasible
    verify: float = 1e-8          # checker tolerance
    degenerate_streak: int = 30   # degenerate pivots before switching to Bland's rule
    max_iter_factor: int = 50     # iteration cap = factor * (rows + columns)


TOL = Tolerances()


def _as_matrix(a, n: int, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    a = np.array(a, dtype=float)
    if a.ndim == 1 and a.size == 0:
        return np.zeros((0, n))
    if a.ndim != 2 or a.shape[1] != n:
        raise ConfigurationError(f"{name} must have {n} columns, got shape {a.shape}")
    return a


def _as_vector(b, m: int, name: str) -> np.ndarray:
    if b is None:
        b = np.zeros(0)
    b = np.array(b, dtype=float).reshape(-1)
    if b.shape != (m,):
        raise ConfigurationError(f"{name} must have length {m}, got {b.shape[0]}")
    return b


@dataclass
class LinearProgram:
    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_le: np.ndarray | None = None
    b_le: np.ndarray | None = None
    free: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.array(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_eq = _as_matrix(self.A_eq, n, "A_eq")
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0], "b_eq")
        self.A_le = _as_matrix(self.A_le, n, "A_le")
        self.b_le = _as_vector(self.b_le, self.A_le.shape[0], "b_le")
        free = np.zeros(n, dtype=bool) if self.free is None else np.array(self.free, dtype=bool)
        if free.shape != (n,):
            raise ConfigurationError(f"free mask must have length {n}")
        self.free = free
        for name in ("c", "A_eq", "b_eq", "A_le", "b_le"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigurationError(f"{name} has non-finite entries")

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    dual_le: np.ndarray | None = None
    objective: float | None = None
    dual_objective: float | None = None
    iterations: int = 0
    basis: list = field(default_factory=list)

    @property
    def dual(self) -> np.ndarray | None:
        if self.dual_eq is None:
            return None
        return np.concatenate([self.dual_eq, self.dual_le])

    def __bool__(self) -> bool:
        return self.status == OPTIMAL


class _Tableau:
    """Dense tableau ``B^-1 [A | b]`` with a reduced-cost row."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], tol: Tolerances,
                 max_iter: int):
        self.T = A.copy()
        self.rhs = b.copy()
        self.basis = list(basis)
        self.tol = tol
        self.max_iter = max_iter
        self.iterations = 0

    def pivot(self, r: int, e: int) -> None:
        T, rhs = self.T, self.rhs
        piv = T[r, e]
        T[r] /= piv
        rhs[r] /= piv
        col = T[:, e].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if nz.size:
            T[nz] -= np.outer(col[nz], T[r])
            rhs[nz] -= col[nz] * rhs[r]
        T[nz, e] = 0.0
        T[r, e] = 1.0
        self.basis[r] = e

    def run(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        """Minimize ``cost @ z`` from the current basis; returns a status."""
        tol = self.tol
        scale = max(1.0, float(np.abs(cost).max()) if cost.size else 1.0)
        rc = cost - cost[self.basis] @ self.T
        streak = 0
        while True:
            if self.iterations >= self.max_iter:
                raise SolverError(f"iteration cap {self.max_iter} reached", self.basis)
            cand = np.nonzero(allowed & (rc < -tol.optimality * scale))[0]
            if cand.size == 0:
                return OPTIMAL
            bland = streak >= tol.degenerate_streak
            e = int(cand[0]) if bland else int(cand[np.argmin(rc[cand])])
            d = self.T[:, e]
            pos = np.nonzero(d > tol.pivot)[0]
            if pos.size == 0:
                return UNBOUNDED
            rhs_pos = np.maximum(self.rhs[pos], 0.0)
            ratios = rhs_pos / d[pos]
            theta = ratios.min()
            ties = pos[ratios <= theta + 1e-12 * max(1.0, theta)]
            if bland or ties.size == 1:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(max(ties, key=lambda i: (d[i], -self.basis[i])))
            streak = streak + 1 if theta <= 1e-14 else 0
            self.pivot(r, e)
            rc -= rc[e] * self.T[r]
            rc[e] = 0.0
            self.iterations += 1


def solve(lp: LinearProgram, tol: Tolerances = TOL) -> LpSolution:
    """Solve ``lp`` with a deterministic two-phase simplex."""
    n = lp.n
    m_eq, m_le = lp.A_eq.shape[0], lp.A_le.shape[0]
    m = m_eq + m_le
    free_idx = np.nonzero(lp.free)[0]
    nf = free_idx.size

    # standard form: [z (free vars as plus part) | minus parts | slacks], all >= 0
    A = np.zeros((m, n + nf + m_le))
    A[:m_eq, :n] = lp.A_eq
    A[m_eq:, :n] = lp.A_le
    A[:m_eq, n:n + nf] = -lp.A_eq[:, free_idx]
    A[m_eq:, n:n + nf] = -lp.A_le[:, free_idx]
    A[m_eq:, n + nf:] = np.eye(m_le)
    b = np.concatenate([lp.b_eq, lp.b_le])
    cost = np.concatenate([-lp.c, lp.c[free_idx], np.zeros(m_le)])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    n_std = A.shape[1]

    basis, art_rows = [], []
    for r in range(m):
        if r >= m_eq and sign[r] > 0:
            basis.append(n + nf + (r - m_eq))
        else:
            basis.append(None)
            art_rows.append(r)
    n_art = len(art_rows)
    A_full = np.hstack([A, np.zeros((m, n_art))])
    for j, r in enumerate(art_rows):
        A_full[r, n_std + j] = 1.0
        basis[r] = n_std + j
    n_tot = n_std + n_art
    max_iter = tol.max_iter_factor * (m + n_tot)

    if m == 0:
        if np.any(cost < 0):
            return LpSolution(UNBOUNDED)
        return LpSolution(OPTIMAL, np.zeros(n), np.zeros(0), np.zeros(0), 0.0, 0.0)

    tab = _Tableau(A_full, b, basis, tol, max_iter)
    is_art = np.zeros(n_tot, dtype=bool)
    is_art[n_std:] = True

    if n_art:
        phase1 = is_art.astype(float)
        tab.run(phase1, np.ones(n_tot, dtype=bool))
        infeas = float(phase1[tab.basis] @ tab.rhs)
        if infeas > tol.feasibility * max(1.0, float(np.abs(b).max())):
            return LpSolution(INFEASIBLE, iterations=tab.iterations, basis=list(tab.basis))
        for r in range(m):
            if tab.basis[r] >= n_std:
                row = np.abs(tab.T[r, :n_std])
                j = int(np.argmax(row))
                if row[j] > tol.pivot:
                    tab.pivot(r, j)

    cost_full = np.concatenate([cost, np.zeros(n_art)])
    status = tab.run(cost_full, ~is_art)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=tab.iterations, basis=list(tab.basis))

    B = A_full[:, tab.basis]
    try:
        xb = np.linalg.solve(B, b)
        y_min = np.linalg.solve(B.T, cost_full[tab.basis])
    except np.linalg.LinAlgError:
        raise SolverError("final basis is singular", tab.basis) from None
    z = np.zeros(n_tot)
    z[tab.basis] = xb
    z = np.where((z < 0) & (z > -tol.feasibility), 0.0, z)
    x = z[:n].copy()
    x[free_idx] -= z[n:n + nf]
    u = -y_min * sign
    return LpSolution(OPTIMAL, x, u[:m_eq], u[m_eq:], float(lp.c @ x),
                      dual_objective=float(np.concatenate([lp.b_eq, lp.b_le]) @ u),
                      iterations=tab.iterations, basis=list(tab.basis))


@dataclass(frozen=True)
class Verification:
    primal_residual: float
    dual_residual: float
    complementarity: float
    gap: float
    ok: bool


def verify_solution(lp: LinearProgram, sol: LpSolution, tol: float = TOL.verify) -> Verification:
    """Re-check an optimal solution from the raw problem data.

    Works only from ``lp`` and the reported primal/dual vectors, never from the
    solver's internal state.
    """
    if sol.status != OPTIMAL:
        raise ConfigurationError("only optimal solutions carry a checkable certificate")
    x, ye, yl = sol.x, sol.dual_eq, sol.dual_le
    c, free = lp.c, lp.free
    eq_res = lp.A_eq @ x - lp.b_eq
    le_slack = lp.b_le - lp.A_le @ x
    primal = max(
        float(np.abs(eq_res).max(initial=0.0)),
        float(np.maximum(-le_slack, 0).max(initial=0.0)),
        float(np.maximum(-x[~free], 0).max(initial=0.0)),
    )
    red = lp.A_eq.T @ ye + lp.A_le.T @ yl - c
    dual = max(
        float(np.maximum(-yl, 0).max(initial=0.0)),
        float(np.maximum(-red[~free], 0).max(initial=0.0)),
        float(np.abs(red[free]).max(initial=0.0)),
    )
    comp = max(
        float(np.abs(yl * le_slack).max(initial=0.0)),
        float(np.abs(x[~free] * red[~free]).max(initial=0.0)),
    )
    primal_obj = float(c @ x)
    dual_obj = float(lp.b_eq @ ye + lp.b_le @ yl)
    gap = abs(primal_obj - dual_obj)
    ok = primal <= tol and dual <= tol and comp <= tol and gap <= tol * (1 + abs(primal_obj))
    return Verification(primal, dual, comp, gap, ok)


def solve_verified(lp: LinearProgram, tol: Tolerances = TOL) -> LpSolution:
    """Solve and insist that an optimal answer passes the independent checker."""
    sol = solve(lp, tol)
    if sol.status == OPTIMAL:
        check = verify_solution(lp, sol, tol.verify)
        if not check.ok:
            raise SolverError(
                f"solution failed verification (primal {check.primal_residual:.2e}, "
                f"dual {check.dual_residual:.2e}, gap {check.gap:.2e})", sol.basis)
    return sol
