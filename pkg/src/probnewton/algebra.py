"""Abstract-domain contract and interpretation of tree expressions.

A domain supplies the carrier operations (combine ⊕, extend ⊗, subtract ⊖,
the three confluences, order, distance, action interpretation) plus a small
flattening interface that lets one generic LP reduction serve every shipped
linear-recursion-solving strategy:

* ``flatten``/``unflatten`` map elements to fixed-length float vectors;
* ``left_mul(c)`` / ``right_mul(c)`` are the matrices of x ↦ c ⊗ x and
  x ↦ x ⊗ c on flattened vectors (⊗ by a constant is linear in every
  shipped carrier);
* ``lp_sense``/``ndet_relation`` say whether the strategy encodes the least
  solution as ``maximize Σ`` with ``W <= branch`` rows (min-style
  confluences: lower-bound analyses) or ``minimize Σ`` with ``W >= branch``
  rows (max-style confluences: upper-bound analyses).

Interpretation is syntax-directed; a μ-binder is evaluated *non-iteratively*
by substituting the current procedure summaries into call nodes, extracting
a μ-free linear system, and handing it to the domain's solve strategy.
"""

from __future__ import annotations

import abc
from typing import Any, Callable, Optional

import numpy as np

from .errors import SubtractUndefined, UnknownAction, UnknownCondition
from .treeexpr import (
    Call, CallLinSym, Concat, Cond, ConstSym, Eps, FreeVar, Leaf, MinusSym,
    Mu, Ndet, Node, PlusSym, Prob, SeqAct, SeqConstSym, TreeExpr, const,
    contains_mu, free_vars, seqc,
)

SUBTRACT_CLAMP = 1e-12  # float noise below this is clamped to 0 by ⊖


class OmegaPma(abc.ABC):
    """Contract every abstract domain implements."""

    name: str = "abstract"
    # LP-reduction behaviour
    lp_sense: str = "max"        # objective sense realizing the least solution
    ndet_relation: str = "<="    # row relation for ndet branches
    lp_nonneg: bool = True       # carrier components are nonnegative

    # --- carrier operations -------------------------------------------------
    @abc.abstractmethod
    def zero(self): ...

    @abc.abstractmethod
    def one(self): ...

    @abc.abstractmethod
    def combine(self, a, b): ...

    @abc.abstractmethod
    def extend(self, a, b): ...

    def subtract(self, a, b):
        """Some d with b ⊕ d = a; componentwise with clamping in shipped domains."""
        diff = self.flatten(a) - self.flatten(b)
        low = diff.min() if diff.size else 0.0
        if self.lp_nonneg:
            if low < -SUBTRACT_CLAMP:
                raise SubtractUndefined(f"{self.name}: subtrahend not below minuend (gap {low})")
            diff = np.maximum(diff, 0.0)
        return self.unflatten(diff)

    def cond_choice(self, phi: str, a, b):
        raise UnknownCondition(phi, self.name)

    @abc.abstractmethod
    def prob_choice(self, p: float, a, b): ...

    @abc.abstractmethod
    def ndet_choice(self, a, b): ...

    def leq(self, a, b) -> bool:
        fa, fb = self.flatten(a), self.flatten(b)
        return bool(np.all(fa <= fb + SUBTRACT_CLAMP))

    def leq_within(self, a, b, tol: float) -> bool:
        fa, fb = self.flatten(a), self.flatten(b)
        return bool(np.all(fa <= fb + tol))

    def distance(self, a, b) -> float:
        return float(np.abs(self.flatten(a) - self.flatten(b)).max())

    @abc.abstractmethod
    def interpret_action(self, action: str): ...

    def render(self, a) -> str:
        return repr(a)

    # --- flattening interface for the LP reduction --------------------------
    @abc.abstractmethod
    def dim(self) -> int: ...

    @abc.abstractmethod
    def flatten(self, a) -> np.ndarray: ...

    @abc.abstractmethod
    def unflatten(self, vec: np.ndarray): ...

    @abc.abstractmethod
    def left_mul(self, c) -> np.ndarray: ...

    @abc.abstractmethod
    def right_mul(self, c) -> np.ndarray: ...

    def cond_linear(self, phi: str):
        """(M_then, M_else) when cond_φ is linear on flattened vectors, else None."""
        return None

    def cond_rewrites(self, phi: str):
        """Rewrite vectors (then_list, else_list) for LP-tightened conditionals, else None."""
        return None

    # --- solve strategy ------------------------------------------------------
    def solve_strategy(self, system, gamma):
        from .domains.strategy import lp_strategy
        return lp_strategy(self, system, gamma)


# ---------------------------------------------------------------------------
# program trees -> algebraic trees
# ---------------------------------------------------------------------------

def to_algebraic(e: TreeExpr, dom: OmegaPma) -> TreeExpr:
    """Replace data actions by their domain interpretations; ε becomes 1̄."""
    if isinstance(e, Leaf):
        if isinstance(e.sym, Eps):
            return const(dom.one())
        if isinstance(e.sym, FreeVar):
            return e
        if isinstance(e.sym, (ConstSym, CallLinSym)):
            return e
        raise TypeError(f"unexpected leaf {e.sym!r}")
    if isinstance(e, Node):
        kids = tuple(to_algebraic(c, dom) for c in e.children)
        if isinstance(e.sym, SeqAct):
            return seqc(dom.interpret_action(e.sym.action), kids[0])
        return Node(e.sym, kids)
    if isinstance(e, Concat):
        return Concat(to_algebraic(e.left, dom), e.var, to_algebraic(e.right, dom))
    if isinstance(e, Mu):
        return Mu(e.var, to_algebraic(e.body, dom))
    raise TypeError(f"not a tree expression: {e!r}")


def resolve_calls(e: TreeExpr, nu, dom: OmegaPma) -> TreeExpr:
    """Substitute concrete summaries for call nodes, making `e` call-free."""
    if isinstance(e, Leaf):
        if isinstance(e.sym, CallLinSym):
            return const(dom.extend(nu[e.sym.proc], e.sym.right_const))
        return e
    if isinstance(e, Node):
        kids = tuple(resolve_calls(c, nu, dom) for c in e.children)
        if isinstance(e.sym, Call):
            return seqc(nu[e.sym.proc], kids[0])
        return Node(e.sym, kids)
    if isinstance(e, Concat):
        return Concat(resolve_calls(e.left, nu, dom), e.var, resolve_calls(e.right, nu, dom))
    if isinstance(e, Mu):
        return Mu(e.var, resolve_calls(e.body, nu, dom))
    raise TypeError(f"not a tree expression: {e!r}")


# ---------------------------------------------------------------------------
# interpretation
# ---------------------------------------------------------------------------

def interpret(e: TreeExpr, gamma: dict, nu, dom: OmegaPma,
              solve: Optional[Callable] = None):
    """Value of algebraic expression `e` under valuation γ and summaries ν.

    μ-binders are dispatched to the linear reduction:  calls are resolved
    against ν, the binder is normalized away, and the resulting μ-free
    linear system is solved by `solve` (default: the domain's strategy).
    """
    missing = free_vars(e) - set(gamma)
    if missing:
        raise ValueError(f"valuation does not cover {sorted(missing)}")
    return _eval(e, dict(gamma), nu, dom, solve)


def _eval(e: TreeExpr, env: dict, nu, dom: OmegaPma, solve):
    if isinstance(e, Leaf):
        s = e.sym
        if isinstance(s, ConstSym):
            return s.value
        if isinstance(s, FreeVar):
            return env[s.name]
        if isinstance(s, CallLinSym):
            return dom.extend(nu[s.proc], s.right_const)
        if isinstance(s, Eps):
            raise TypeError("program tree reached the interpreter; call to_algebraic first")
        raise TypeError(f"unexpected leaf {s!r}")
    if isinstance(e, Node):
        s = e.sym
        if isinstance(s, SeqConstSym):
            return dom.extend(s.value, _eval(e.children[0], env, nu, dom, solve))
        if isinstance(s, Call):
            return dom.extend(nu[s.proc], _eval(e.children[0], env, nu, dom, solve))
        if isinstance(s, Prob):
            return dom.prob_choice(float(s.p), _eval(e.children[0], env, nu, dom, solve),
                                   _eval(e.children[1], env, nu, dom, solve))
        if isinstance(s, Cond):
            return dom.cond_choice(s.cond, _eval(e.children[0], env, nu, dom, solve),
                                   _eval(e.children[1], env, nu, dom, solve))
        if isinstance(s, Ndet):
            return dom.ndet_choice(_eval(e.children[0], env, nu, dom, solve),
                                   _eval(e.children[1], env, nu, dom, solve))
        if isinstance(s, PlusSym):
            return dom.combine(_eval(e.children[0], env, nu, dom, solve),
                               _eval(e.children[1], env, nu, dom, solve))
        if isinstance(s, MinusSym):
            return dom.subtract(_eval(e.children[0], env, nu, dom, solve),
                                _eval(e.children[1], env, nu, dom, solve))
        if isinstance(s, SeqAct):
            raise TypeError("program tree reached the interpreter; call to_algebraic first")
        raise TypeError(f"unexpected node {s!r}")
    if isinstance(e, Concat):
        bound = _eval(e.right, env, nu, dom, solve)
        return _eval(e.left, {**env, e.var: bound}, nu, dom, solve)
    if isinstance(e, Mu):
        return _eval_mu(e, env, nu, dom, solve)
    raise TypeError(f"not a tree expression: {e!r}")


def _eval_mu(e: Mu, env: dict, nu, dom: OmegaPma, solve):
    from .linearize import EquationSystem, normalize, NameGen

    solver = solve or dom.solve_strategy
    flat = resolve_calls(e, nu, dom)
    fv = free_vars(flat)
    f, theta = normalize(flat, {v: v for v in fv}, NameGen("$mu"))
    gamma = {v: env[v] for v in fv}
    system = EquationSystem(dict(theta), proc_names=(), kind="linear-mu-free")
    iota, _ = solver(system, gamma)
    return _eval(f, {**gamma, **iota}, (), dom, None)
