"""Differentiation and normalization of algebraic tree expressions.

``differentiate`` produces, for one procedure variable, a *linear* tree
expression (no call node; linearized calls become arity-0 ``calllin``
leaves whose continuation has been folded into a constant).  The case
table needs the values of subterms at the current summary vector, which
is why it carries a solve strategy: those subterms may contain μ-binders.

``normalize`` implements the judgment Γ ⊢ E ⇓ F | Θ that strips μ-binders
from a linear expression, minting one fresh unknown and one equation per
binder.  ``solve_linear_system`` is the three-step method: normalize every
right-hand side, hand the combined μ-free system to the strategy, and
evaluate the normalized forms under the returned least solution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

from .algebra import OmegaPma, interpret
from .errors import SolveFailure
from .treeexpr import (
    Call, CallLinSym, Concat, Cond, ConstSym, FreeVar, Leaf, MinusSym, Mu,
    Ndet, Node, PlusSym, Prob, SeqConstSym, TreeExpr, call_lin, const,
    contains_mu, free_vars, is_linear, minus, plus, seqc, var,
)


class NameGen:
    """Fresh-name mint; one instance per analysis run keeps output stable."""

    def __init__(self, prefix: str = "$mu"):
        self.prefix = prefix
        self._count = 0

    def fresh(self) -> str:
        self._count += 1
        return f"{self.prefix}{self._count}"


@dataclass
class EquationSystem:
    """Named unknowns and their right-hand sides, in insertion order.

    ``proc_names[i]`` is the unknown a ``calllin`` leaf with index ``i``
    refers to.  ``kind`` is one of general | linear | linear-mu-free.
    """

    equations: dict
    proc_names: tuple = ()
    kind: str = "general"

    def validate(self) -> None:
        if self.kind not in ("general", "linear", "linear-mu-free"):
            raise ValueError(f"bad kind {self.kind!r}")
        for name, rhs in self.equations.items():
            if self.kind in ("linear", "linear-mu-free") and not is_linear(rhs):
                raise ValueError(f"equation {name} is not linear")
            if self.kind == "linear-mu-free" and contains_mu(rhs):
                raise ValueError(f"equation {name} contains a mu-binder")

    def unknowns(self) -> list:
        return list(self.equations)


# ---------------------------------------------------------------------------
# cached subterm evaluation (one cache per Newton round)
# ---------------------------------------------------------------------------

class Evaluator:
    """Memoizes interpret() per (subterm, relevant γ bindings, ν)."""

    def __init__(self, dom: OmegaPma, nu, solve):
        self.dom = dom
        self.nu = nu
        self.solve = solve
        self._memo = {}
        self._fv = {}

    def fv(self, e: TreeExpr) -> frozenset:
        key = id(e)
        got = self._fv.get(key)
        if got is None:
            got = free_vars(e)
            self._fv[key] = (got, e)  # keep e alive so ids stay unique
        else:
            got = got[0]
        return got

    def value(self, e: TreeExpr, gamma: dict):
        key = (id(e), tuple(sorted((v, id(gamma[v])) for v in self.fv(e))))
        if key in self._memo:
            return self._memo[key][0]
        val = interpret(e, {v: gamma[v] for v in self.fv(e)}, self.nu, self.dom, self.solve)
        self._memo[key] = (val, e)
        return val


# ---------------------------------------------------------------------------
# differentials
# ---------------------------------------------------------------------------

def differentiate(f: TreeExpr, j: int, nu, gamma: Optional[dict] = None,
                  dom: OmegaPma = None, solve: Optional[Callable] = None,
                  _ev: Optional[Evaluator] = None) -> TreeExpr:
    """Differential of `f` with respect to procedure `j` at ν under γ.

    The result is linear: call nodes are gone, and the only references to
    the unknowns are ``calllin`` leaves (for procedure j) and the free
    variables of `f` itself.
    """
    gamma = dict(gamma or {})
    ev = _ev or Evaluator(dom, nu, solve)

    def d(e: TreeExpr, env: dict) -> TreeExpr:
        if isinstance(e, Leaf):
            s = e.sym
            if isinstance(s, ConstSym):
                return const(dom.zero())
            if isinstance(s, FreeVar):
                return e
            raise TypeError(f"cannot differentiate leaf {s!r}")
        if isinstance(e, Node):
            s = e.sym
            if isinstance(s, SeqConstSym):
                return seqc(s.value, d(e.children[0], env))
            if isinstance(s, Call):
                g = e.children[0]
                if s.proc != j:
                    return seqc(nu[s.proc], d(g, env))
                return plus(call_lin(j, ev.value(g, env)), seqc(nu[j], d(g, env)))
            if isinstance(s, Cond):
                return Node(s, (d(e.children[0], env), d(e.children[1], env)))
            if isinstance(s, Prob):
                return Node(s, (d(e.children[0], env), d(e.children[1], env)))
            if isinstance(s, Ndet):
                g, h = e.children
                gv, hv = ev.value(g, env), ev.value(h, env)
                fv = dom.ndet_choice(gv, hv)
                return minus(Node(Ndet(), (plus(const(gv), d(g, env)),
                                           plus(const(hv), d(h, env)))),
                             const(fv))
            raise TypeError(f"cannot differentiate node {s!r}")
        if isinstance(e, Concat):
            bound = ev.value(e.right, env)
            left = d(e.left, {**env, e.var: bound})
            return Concat(left, e.var, d(e.right, env))
        if isinstance(e, Mu):
            self_val = ev.value(e, env)
            return Mu(e.var, d(e.body, {**env, e.var: self_val}))
        raise TypeError(f"not a tree expression: {e!r}")

    return d(f, gamma)


def multivariate_differential(fs: list, nu, gamma: Optional[dict] = None,
                              dom: OmegaPma = None,
                              solve: Optional[Callable] = None) -> list:
    """Componentwise ⊕-fold of the per-procedure differentials, j ascending.

    Procedures that a component never calls contribute the zero expression
    and are skipped; the fold order is fixed so floating-point sums are
    reproducible.  An empty fold is the constant zero.
    """
    from .treeexpr import called_procedures

    gamma = dict(gamma or {})
    ev = Evaluator(dom, nu, solve)
    out = []
    for f in fs:
        acc = None
        for j in sorted(called_procedures(f)):
            term = differentiate(f, j, nu, gamma, dom, solve, _ev=ev)
            acc = term if acc is None else plus(acc, term)
        out.append(acc if acc is not None else const(dom.zero()))
    return out


# ---------------------------------------------------------------------------
# normalization: Γ ⊢ E ⇓ F | Θ
# ---------------------------------------------------------------------------

def normalize(e: TreeExpr, gamma_map: Optional[dict] = None,
              namegen: Optional[NameGen] = None) -> tuple:
    """Extract a μ-free expression and auxiliary equations from linear `e`.

    `gamma_map` renames free variables (seed it with the identity on the
    free variables of `e`); each μ-binder becomes a fresh unknown with one
    emitted equation.  Returns ``(F, theta)`` with `theta` an ordered dict.
    """
    if not is_linear(e):
        raise ValueError("normalize requires a linear expression")
    gamma_map = dict(gamma_map if gamma_map is not None else
                     {v: v for v in free_vars(e)})
    ng = namegen or NameGen("$mu")
    theta: dict = {}

    def go(t: TreeExpr, gm: dict) -> TreeExpr:
        if isinstance(t, Leaf):
            s = t.sym
            if isinstance(s, FreeVar):
                return var(gm[s.name])
            return t
        if isinstance(t, Node):
            return Node(t.sym, tuple(go(c, gm) for c in t.children))
        if isinstance(t, Concat):
            left = go(t.left, {**gm, t.var: t.var})
            right = go(t.right, gm)
            return Concat(left, t.var, right)
        if isinstance(t, Mu):
            fresh = ng.fresh()
            body = go(t.body, {**gm, t.var: fresh})
            if fresh in theta:
                raise AssertionError("fresh-name collision in normalize")
            theta[fresh] = body
            return var(fresh)
        raise TypeError(f"not a tree expression: {t!r}")

    f = go(e, gamma_map)
    return f, theta


# ---------------------------------------------------------------------------
# the three-step linear-system solve
# ---------------------------------------------------------------------------

def solve_linear_system(system: EquationSystem, gamma: dict, dom: OmegaPma,
                        solve: Optional[Callable] = None) -> tuple:
    """Least solution of a linear equation system.

    (1) normalize each right-hand side, (2) run the strategy on the combined
    μ-free system, (3) evaluate each normalized form under γ ∪ ι and ν.
    Returns ``(values, nu)``: a mapping for the named unknowns and the
    summary vector aligned with ``system.proc_names``.
    """
    solver = solve or dom.solve_strategy
    ng = NameGen("$mu")
    normalized: dict = {}
    theta: dict = {}
    for name, rhs in system.equations.items():
        fv = free_vars(rhs)
        f, th = normalize(rhs, {v: v for v in fv}, ng)
        overlap = set(th) & set(theta)
        if overlap:
            raise AssertionError(f"theta collision: {overlap}")
        normalized[name] = f
        theta.update(th)

    combined = EquationSystem({**normalized, **theta},
                              proc_names=system.proc_names,
                              kind="linear-mu-free")
    iota, nu = solver(combined, gamma)

    values = {}
    for name, f in normalized.items():
        env = {**gamma, **iota}
        values[name] = interpret(f, {v: env[v] for v in free_vars(f)}, nu, dom, solver)
    return values, nu
