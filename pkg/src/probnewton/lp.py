"""Embedded linear-program solver.

Primal simplex on a dense tableau, two phases, Bland's anti-cycling rule.
A presolve step dispatches square pure-equality systems (the common case
for linearized equation systems without min/max nodes) to a direct sparse
solve; the unique feasible point is optimal for any objective.

Problems are small and dense enough that a tableau is the simplest correct
representation.  Determinism: with a fixed variable order the pivot
sequence, and hence the solution, is bit-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class NumericalInstability(RuntimeError):
    pass


@dataclass
class LpProblem:
    name: str = "lp"
    # variable name -> (lower bound or None for -inf, upper bound or None)
    variables: dict = field(default_factory=dict)
    # (coeffs: {var: float}, relation: '=', '<=', '>=', rhs: float)
    constraints: list = field(default_factory=list)
    objective_sense: str = "max"
    objective: dict = field(default_factory=dict)

    def add_variable(self, name: str, lb=0.0, ub=None) -> str:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        self.variables[name] = (lb, ub)
        return name

    def add_constraint(self, coeffs: dict, relation: str, rhs: float) -> None:
        if relation not in ("=", "<=", ">="):
            raise ValueError(f"bad relation {relation!r}")
        for v in coeffs:
            if v not in self.variables:
                raise ValueError(f"constraint references undeclared variable {v!r}")
        for c in coeffs.values():
            if not np.isfinite(c):
                raise ValueError("non-finite constraint coefficient")
        if not np.isfinite(rhs):
            raise ValueError("non-finite right-hand side")
        self.constraints.append((dict(coeffs), relation, float(rhs)))

    def set_objective(self, sense: str, coeffs: dict) -> None:
        if sense not in ("max", "min"):
            raise ValueError(f"bad sense {sense!r}")
        for v in coeffs:
            if v not in self.variables:
                raise ValueError(f"objective references undeclared variable {v!r}")
        self.objective_sense = sense
        self.objective = dict(coeffs)


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    assignment: dict
    objective_value: Optional[float] = None


def write_lp(problem: LpProblem, path: str) -> None:
    """Dump in CPLEX-LP-style text for external cross-checking."""
    def term(coeffs):
        parts = []
        for v, c in coeffs.items():
            sign = "+" if c >= 0 else "-"
            parts.append(f"{sign} {abs(c)} {v}")
        return " ".join(parts) if parts else "0"

    rel = {"=": "=", "<=": "<=", ">=": ">="}
    lines = ["Maximize" if problem.objective_sense == "max" else "Minimize",
             " obj: " + term(problem.objective), "Subject To"]
    for i, (coeffs, relation, rhs) in enumerate(problem.constraints):
        lines.append(f" c{i}: {term(coeffs)} {rel[relation]} {rhs}")
    lines.append("Bounds")
    for v, (lb, ub) in problem.variables.items():
        lo = "-inf" if lb is None else str(lb)
        hi = "+inf" if ub is None else str(ub)
        lines.append(f" {lo} <= {v} <= {hi}")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# presolve: square equality systems have a unique candidate point
# ---------------------------------------------------------------------------

def _presolve_square_equalities(problem: LpProblem, feas_tol: float) -> Optional[LpSolution]:
    cons = problem.constraints
    names = list(problem.variables)
    if not cons or len(cons) != len(names):
        return None
    if any(rel != "=" for _, rel, _ in cons):
        return None
    index = {v: j for j, v in enumerate(names)}
    n = len(names)
    try:
        import scipy.sparse as sp
        import scipy.sparse.linalg as spla
        rows, cols, data = [], [], []
        b = np.zeros(n)
        for i, (coeffs, _, rhs) in enumerate(cons):
            b[i] = rhs
            for v, c in coeffs.items():
                rows.append(i)
                cols.append(index[v])
                data.append(c)
        a = sp.csc_matrix((data, (rows, cols)), shape=(n, n))
        with np.errstate(all="ignore"):
            x = spla.spsolve(a, b)
        if not np.all(np.isfinite(x)):
            return None
        residual = np.abs(a @ x - b).max() if n else 0.0
    except Exception:
        return None
    scale = max(1.0, float(np.abs(b).max()) if n else 1.0)
    if residual > 1e-8 * scale:
        return None
    for v, (lb, ub) in problem.variables.items():
        xv = x[index[v]]
        if lb is not None and xv < lb - 1e-7:
            return None
        if ub is not None and xv > ub + 1e-7:
            return None
    assignment = {v: float(x[index[v]]) for v in names}
    obj = sum(c * assignment[v] for v, c in problem.objective.items())
    return LpSolution("optimal", assignment, obj)


# ---------------------------------------------------------------------------
# simplex
# ---------------------------------------------------------------------------

_EPS = 1e-9
_PIVOT_EPS = 1e-12
_MAX_ITERS = 200_000


def _simplex_min(tab: np.ndarray, basis: list, cost: np.ndarray, feas_tol: float):
    """Minimize over {x >= 0 : tab[:, :-1] x = tab[:, -1]} from the given basis.

    `cost` is the reduced-cost row (already priced out).  Mutates tab/basis/
    cost in place; returns 'optimal' or 'unbounded'.
    """
    m = tab.shape[0]
    tiny_pivots = 0
    for _ in range(_MAX_ITERS):
        candidates = np.nonzero(cost[:-1] < -feas_tol)[0]
        if candidates.size == 0:
            return "optimal"
        j = int(candidates[0])  # Bland: smallest index enters
        col = tab[:, j]
        pos = np.nonzero(col > _EPS)[0]
        if pos.size == 0:
            return "unbounded"
        ratios = tab[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[np.nonzero(ratios <= best + 1e-12)[0]]
        r = int(min(ties, key=lambda i: basis[i]))  # Bland: smallest basic index leaves
        pivot = tab[r, j]
        if abs(pivot) < _PIVOT_EPS:
            tiny_pivots += 1
            if tiny_pivots > 3:
                raise NumericalInstability(f"pivot magnitude {pivot} below threshold repeatedly")
            continue
        tiny_pivots = 0
        tab[r] /= pivot
        factors = tab[:, j].copy()
        factors[r] = 0.0
        tab -= np.outer(factors, tab[r])
        cost -= cost[j] * tab[r]
        basis[r] = j
    raise NumericalInstability("simplex iteration limit exceeded")


def _solve_standard_form(a: np.ndarray, b: np.ndarray, c: np.ndarray, feas_tol: float):
    """minimize c·x subject to a x = b, x >= 0 with b >= 0."""
    m, n = a.shape
    # phase 1: artificial basis
    tab = np.hstack([a, np.eye(m), b.reshape(-1, 1)]).astype(float)
    basis = list(range(n, n + m))
    cost = np.zeros(n + m + 1)
    cost[n:n + m] = 1.0
    for i in range(m):  # price out the artificial basis
        cost -= tab[i]
    status = _simplex_min(tab, basis, cost, feas_tol)
    if status != "optimal" or -cost[-1] > feas_tol * max(1.0, abs(b).max() if m else 1.0):
        return "infeasible", None
    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= n:
            row = tab[i, :n]
            nz = np.nonzero(np.abs(row) > _EPS)[0]
            if nz.size == 0:
                continue  # redundant constraint
            j = int(nz[0])
            tab[i] /= tab[i, j]
            factors = tab[:, j].copy()
            factors[i] = 0.0
            tab -= np.outer(factors, tab[i])
            basis[i] = j
        keep.append(i)
    tab = tab[keep][:, list(range(n)) + [n + m]]
    basis = [basis[i] for i in keep]
    # phase 2
    cost = np.zeros(n + 1)
    cost[:n] = c
    for i, bj in enumerate(basis):
        if abs(cost[bj]) > 0:
            cost -= cost[bj] * tab[i]
    status = _simplex_min(tab, basis, cost, feas_tol)
    if status == "unbounded":
        return "unbounded", None
    x = np.zeros(n)
    for i, bj in enumerate(basis):
        x[bj] = tab[i, -1]
    return "optimal", x


def solve_lp(problem: LpProblem, feas_tol: float = 1e-9) -> LpSolution:
    """Solve `problem`; returns an optimal basic solution or a status."""
    shortcut = _presolve_square_equalities(problem, feas_tol)
    if shortcut is not None:
        return shortcut

    names = list(problem.variables)
    # column layout: shifted/plus columns first, then minus columns of free vars
    col_of = {}
    minus_col_of = {}
    shift = {}
    ncols = 0
    for v in names:
        lb, _ = problem.variables[v]
        col_of[v] = ncols
        ncols += 1
        shift[v] = 0.0 if lb is None else float(lb)
        if lb is None:
            minus_col_of[v] = ncols
            ncols += 1

    rows = []
    rhs = []
    rels = []
    for coeffs, rel, b in problem.constraints:
        row = np.zeros(ncols)
        shift_total = 0.0
        for v, cf in coeffs.items():
            row[col_of[v]] += cf
            if v in minus_col_of:
                row[minus_col_of[v]] -= cf
            shift_total += cf * shift[v]
        rows.append(row)
        rels.append(rel)
        rhs.append(b - shift_total)
    for v, (lb, ub) in problem.variables.items():
        if ub is None:
            continue
        row = np.zeros(ncols)
        row[col_of[v]] = 1.0
        if v in minus_col_of:
            row[minus_col_of[v]] = -1.0
        rows.append(row)
        rels.append("<=")
        rhs.append(float(ub) - shift[v])

    m = len(rows)
    nslack = sum(1 for r in rels if r in ("<=", ">="))
    a = np.zeros((m, ncols + nslack))
    b = np.zeros(m)
    si = ncols
    for i, (row, rel, r) in enumerate(zip(rows, rels, rhs)):
        a[i, :ncols] = row
        b[i] = r
        if rel == "<=":
            a[i, si] = 1.0
            si += 1
        elif rel == ">=":
            a[i, si] = -1.0
            si += 1
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1

    c = np.zeros(ncols + nslack)
    sign = 1.0 if problem.objective_sense == "min" else -1.0
    for v, cf in problem.objective.items():
        c[col_of[v]] += sign * cf
        if v in minus_col_of:
            c[minus_col_of[v]] -= sign * cf

    status, x = _solve_standard_form(a, b, c, feas_tol)
    if status != "optimal":
        return LpSolution(status, {})
    assignment = {}
    for v in names:
        val = x[col_of[v]] + shift[v]
        if v in minus_col_of:
            val -= x[minus_col_of[v]]
        assignment[v] = float(val)
    obj = sum(cf * assignment[v] for v, cf in problem.objective.items())
    return LpSolution("optimal", assignment, float(obj))
