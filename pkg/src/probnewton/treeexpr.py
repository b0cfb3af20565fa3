"""Regular infinite-tree expressions: the program IR.

A finite term built from Leaf / Node / Concat / Mu denotes a possibly
infinite tree.  ``Concat(e1, z, e2)`` substitutes the tree of ``e2`` for
every free leaf ``z`` in ``e1``; ``Mu(z, e)`` self-substitutes ``e`` for
``z`` indefinitely, which is how loops and tail recursion are encoded.

Two ranked alphabets share the node shapes:

* the program alphabet (``Eps``, ``SeqAct``, ``Cond``, ``Prob``, ``Ndet``,
  ``Call``), whose actions and conditions are opaque text ids, and
* the algebraic alphabet (``ConstSym``, ``SeqConstSym``, plus the linear
  extras ``PlusSym``, ``MinusSym``, ``CallLinSym``), whose constants are
  elements of some analysis domain.

Everything here is immutable and safe to share across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterator, Optional


# ---------------------------------------------------------------------------
# symbols (program alphabet)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Eps:
    """No-op leaf; interpreted as the multiplicative unit."""

    def __repr__(self) -> str:
        return "eps"


@dataclass(frozen=True)
class FreeVar:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SeqAct:
    """Unary sequencing node carrying an opaque data-action id."""
    action: str

    def __repr__(self) -> str:
        return f"seq[{self.action}]"


@dataclass(frozen=True)
class Cond:
    """Binary conditional-choice node carrying an opaque condition id."""
    cond: str

    def __repr__(self) -> str:
        return f"cond[{self.cond}]"


@dataclass(frozen=True)
class Prob:
    """Binary probabilistic-choice node; left branch taken with probability p."""
    p: Fraction

    def __post_init__(self):
        if not (0 <= self.p <= 1):
            raise ValueError(f"probability {self.p} outside [0,1]")

    def __repr__(self) -> str:
        return f"prob[{self.p}]"


@dataclass(frozen=True)
class Ndet:
    """Binary nondeterministic-choice node."""

    def __repr__(self) -> str:
        return "ndet"


@dataclass(frozen=True)
class Call:
    """Unary procedure-call node; the child is the continuation."""
    proc: int  # 0-based procedure index

    def __repr__(self) -> str:
        return f"call[{self.proc}]"


# ---------------------------------------------------------------------------
# symbols (algebraic alphabet; constants are domain elements)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConstSym:
    """Leaf holding a domain element."""
    value: Any

    def __repr__(self) -> str:
        return f"const({self.value!r})"


@dataclass(frozen=True, eq=False)
class SeqConstSym:
    """Unary node extending by a constant on the left: c ⊗ child."""
    value: Any

    def __repr__(self) -> str:
        return f"seqc({self.value!r})"


@dataclass(frozen=True)
class PlusSym:
    """Binary combine; linear alphabet only."""

    def __repr__(self) -> str:
        return "plus"


@dataclass(frozen=True)
class MinusSym:
    """Binary subtract; linear alphabet only."""

    def __repr__(self) -> str:
        return "minus"


@dataclass(frozen=True, eq=False)
class CallLinSym:
    """Leaf for a linearized call: summary(proc) ⊗ right_const."""
    proc: int
    right_const: Any

    def __repr__(self) -> str:
        return f"calllin[{self.proc}; {self.right_const!r}]"


# ---------------------------------------------------------------------------
# tree nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    sym: Any  # Eps | FreeVar | ConstSym | CallLinSym

    def __repr__(self) -> str:
        return repr(self.sym)


@dataclass(frozen=True)
class Node:
    sym: Any
    children: tuple

    def __repr__(self) -> str:
        return f"{self.sym!r}({', '.join(map(repr, self.children))})"


@dataclass(frozen=True)
class Concat:
    """left ++_var right: substitute `right` for free `var` in `left`."""
    left: Any
    var: str
    right: Any

    def __repr__(self) -> str:
        return f"({self.left!r} ++_{self.var} {self.right!r})"


@dataclass(frozen=True)
class Mu:
    var: str
    body: Any

    def __repr__(self) -> str:
        return f"(mu {self.var}. {self.body!r})"


TreeExpr = Any  # Leaf | Node | Concat | Mu

# convenience constructors used throughout the code base and tests
EPS = Leaf(Eps())


def var(name: str) -> Leaf:
    return Leaf(FreeVar(name))


def seq(action: str, child: TreeExpr) -> Node:
    return Node(SeqAct(action), (child,))


def cond(phi: str, left: TreeExpr, right: TreeExpr) -> Node:
    return Node(Cond(phi), (left, right))


def prob(p, left: TreeExpr, right: TreeExpr) -> Node:
    return Node(Prob(Fraction(p)), (left, right))


def ndet(left: TreeExpr, right: TreeExpr) -> Node:
    return Node(Ndet(), (left, right))


def call(proc: int, child: TreeExpr) -> Node:
    return Node(Call(proc), (child,))


def const(value) -> Leaf:
    return Leaf(ConstSym(value))


def seqc(value, child: TreeExpr) -> Node:
    return Node(SeqConstSym(value), (child,))


def plus(left: TreeExpr, right: TreeExpr) -> Node:
    return Node(PlusSym(), (left, right))


def minus(left: TreeExpr, right: TreeExpr) -> Node:
    return Node(MinusSym(), (left, right))


def call_lin(proc: int, right_const) -> Leaf:
    return Leaf(CallLinSym(proc, right_const))


# ---------------------------------------------------------------------------
# basic queries
# ---------------------------------------------------------------------------

def free_vars(e: TreeExpr) -> frozenset:
    """Free variables of `e`; Mu binds in its body, Concat binds in its left."""
    if isinstance(e, Leaf):
        if isinstance(e.sym, FreeVar):
            return frozenset((e.sym.name,))
        return frozenset()
    if isinstance(e, Node):
        out = frozenset()
        for c in e.children:
            out |= free_vars(c)
        return out
    if isinstance(e, Concat):
        return (free_vars(e.left) - {e.var}) | free_vars(e.right)
    if isinstance(e, Mu):
        return free_vars(e.body) - {e.var}
    raise TypeError(f"not a tree expression: {e!r}")


def contains_mu(e: TreeExpr) -> bool:
    if isinstance(e, Mu):
        return True
    if isinstance(e, Node):
        return any(contains_mu(c) for c in e.children)
    if isinstance(e, Concat):
        return contains_mu(e.left) or contains_mu(e.right)
    return False


def called_procedures(e: TreeExpr) -> frozenset:
    """Indices referenced by Call nodes (CallLin leaves are not counted)."""
    if isinstance(e, Leaf):
        return frozenset()
    if isinstance(e, Node):
        out = frozenset()
        if isinstance(e.sym, Call):
            out |= {e.sym.proc}
        for c in e.children:
            out |= called_procedures(c)
        return out
    if isinstance(e, Concat):
        return called_procedures(e.left) | called_procedures(e.right)
    if isinstance(e, Mu):
        return called_procedures(e.body)
    raise TypeError(f"not a tree expression: {e!r}")


def is_linear(e: TreeExpr) -> bool:
    """True iff `e` lies in the linear alphabet: no Call node anywhere.

    CallLin leaves terminate their path, so the at-most-one-linear-call-per-
    path property holds by construction; `linearity_path_scan` asserts it.
    """
    if isinstance(e, Leaf):
        return True
    if isinstance(e, Node):
        if isinstance(e.sym, Call):
            return False
        return all(is_linear(c) for c in e.children)
    if isinstance(e, Concat):
        return is_linear(e.left) and is_linear(e.right)
    if isinstance(e, Mu):
        return is_linear(e.body)
    raise TypeError(f"not a tree expression: {e!r}")


def linearity_path_scan(e: TreeExpr) -> bool:
    """Explicit check: no Call node, and ≤ 1 CallLin on any root-to-leaf path.

    Paths may re-enter Mu bodies and cross Concat seams, so the bound for a
    binder counts the worst continuation through its bound variable.
    """

    def scan(t, via: dict) -> tuple[bool, int]:
        # returns (ok, max CallLin count on any path from t)
        if isinstance(t, Leaf):
            if isinstance(t.sym, CallLinSym):
                return True, 1
            if isinstance(t.sym, FreeVar) and t.sym.name in via:
                return True, via[t.sym.name]
            return True, 0
        if isinstance(t, Node):
            if isinstance(t.sym, Call):
                return False, 0
            ok, worst = True, 0
            for c in t.children:
                cok, ccount = scan(c, via)
                ok = ok and cok
                worst = max(worst, ccount)
            return ok, worst
        if isinstance(t, Concat):
            rok, rcount = scan(t.right, via)
            lok, lcount = scan(t.left, {**via, t.var: rcount})
            return lok and rok, max(lcount, rcount)
        if isinstance(t, Mu):
            # a path may traverse the body arbitrarily often; demand that
            # re-entry adds no CallLin, i.e. counts are stable at their value
            bok, bcount = scan(t.body, {**via, t.var: 0})
            bok2, bcount2 = scan(t.body, {**via, t.var: bcount})
            return bok and bok2 and bcount2 <= 1, bcount2
        raise TypeError(f"not a tree expression: {t!r}")

    ok, count = scan(e, {})
    return ok and count <= 1


# ---------------------------------------------------------------------------
# substitution
# ---------------------------------------------------------------------------

def fresh_name(base: str, avoid) -> str:
    name = base + "'"
    while name in avoid:
        name += "'"
    return name


def substitute(e: TreeExpr, name: str, replacement: TreeExpr) -> TreeExpr:
    """Capture-avoiding substitution of `replacement` for free `name` in `e`."""
    if name not in free_vars(e):
        return e
    repl_fv = free_vars(replacement)

    def go(t):
        if isinstance(t, Leaf):
            if isinstance(t.sym, FreeVar) and t.sym.name == name:
                return replacement
            return t
        if isinstance(t, Node):
            if name not in free_vars(t):
                return t
            return Node(t.sym, tuple(go(c) for c in t.children))
        if isinstance(t, Concat):
            right = go(t.right)
            if t.var == name:
                return Concat(t.left, t.var, right)
            left = t.left
            bound = t.var
            if name in free_vars(left):
                if bound in repl_fv:
                    nb = fresh_name(bound, repl_fv | free_vars(left) | {name})
                    left = substitute(left, bound, var(nb))
                    bound = nb
                left = go(left)
            return Concat(left, bound, right)
        if isinstance(t, Mu):
            if t.var == name or name not in free_vars(t.body):
                return t
            bound, body = t.var, t.body
            if bound in repl_fv:
                nb = fresh_name(bound, repl_fv | free_vars(body) | {name})
                body = substitute(body, bound, var(nb))
                bound = nb
            return Mu(bound, go(body))
        raise TypeError(f"not a tree expression: {t!r}")

    return go(e)


# ---------------------------------------------------------------------------
# alpha-equivalence
# ---------------------------------------------------------------------------

def alpha_equal(a: TreeExpr, b: TreeExpr, values_equal: Optional[Callable] = None) -> bool:
    """Structural equality up to renaming of bound variables.

    `values_equal` compares constants of the algebraic alphabet (needed when
    domain elements are numpy arrays); defaults to ``==``.
    """
    veq = values_equal or (lambda x, y: x == y)

    def go(x, y, envx: dict, envy: dict) -> bool:
        if type(x) is not type(y):
            return False
        if isinstance(x, Leaf):
            sx, sy = x.sym, y.sym
            if isinstance(sx, FreeVar) or isinstance(sy, FreeVar):
                if not (isinstance(sx, FreeVar) and isinstance(sy, FreeVar)):
                    return False
                return envx.get(sx.name, ("f", sx.name)) == envy.get(sy.name, ("f", sy.name))
            if isinstance(sx, ConstSym) and isinstance(sy, ConstSym):
                return veq(sx.value, sy.value)
            if isinstance(sx, CallLinSym) and isinstance(sy, CallLinSym):
                return sx.proc == sy.proc and veq(sx.right_const, sy.right_const)
            return sx == sy
        if isinstance(x, Node):
            sx, sy = x.sym, y.sym
            if isinstance(sx, SeqConstSym) and isinstance(sy, SeqConstSym):
                if not veq(sx.value, sy.value):
                    return False
            elif sx != sy:
                return False
            if len(x.children) != len(y.children):
                return False
            return all(go(cx, cy, envx, envy) for cx, cy in zip(x.children, y.children))
        if isinstance(x, Concat):
            if not go(x.right, y.right, envx, envy):
                return False
            tag = ("b", len(envx))
            return go(x.left, y.left, {**envx, x.var: tag}, {**envy, y.var: tag})
        if isinstance(x, Mu):
            tag = ("b", len(envx))
            return go(x.body, y.body, {**envx, x.var: tag}, {**envy, y.var: tag})
        return False

    return go(a, b, {}, {})


# ---------------------------------------------------------------------------
# depth-bounded unfolding (test oracle only)
# ---------------------------------------------------------------------------

UNKNOWN = "?"  # truncation marker; never appears in TreeExpr itself


@dataclass(frozen=True)
class FiniteTree:
    """A concrete depth-bounded tree; `sym` is a symbol or UNKNOWN."""
    sym: Any
    children: tuple = ()

    def __repr__(self) -> str:
        if self.sym is UNKNOWN:
            return "?"
        if not self.children:
            return repr(self.sym)
        return f"{self.sym!r}({', '.join(map(repr, self.children))})"


FT_UNKNOWN = FiniteTree(UNKNOWN)

# cap on binder expansions between symbol emissions; a binder that makes no
# progress (e.g. mu Z. Z) denotes the fully-unknown tree
_UNFOLD_FUEL = 10_000


def unfold(e: TreeExpr, depth: int) -> FiniteTree:
    """Depth-`depth` truncation of the infinite tree denoted by closed `e`."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if free_vars(e):
        raise ValueError(f"unfold requires a closed expression; free: {sorted(free_vars(e))}")

    def go(t, env: dict, d: int, fuel: int) -> FiniteTree:
        if d == 0:
            return FT_UNKNOWN
        if fuel <= 0:
            return FT_UNKNOWN
        if isinstance(t, Leaf):
            if isinstance(t.sym, FreeVar):
                sub, senv = env[t.sym.name]
                return go(sub, senv, d, fuel - 1)
            return FiniteTree(t.sym)
        if isinstance(t, Node):
            kids = tuple(go(c, env, d - 1, _UNFOLD_FUEL) for c in t.children)
            return FiniteTree(t.sym, kids)
        if isinstance(t, Concat):
            env2 = {**env, t.var: (t.right, env)}
            return go(t.left, env2, d, fuel - 1)
        if isinstance(t, Mu):
            env2 = dict(env)
            env2[t.var] = (t, env)
            return go(t.body, env2, d, fuel - 1)
        raise TypeError(f"not a tree expression: {t!r}")

    return go(e, {}, depth, _UNFOLD_FUEL)


def refines(a: FiniteTree, b: FiniteTree) -> bool:
    """Tree-refinement order: UNKNOWN refines to anything."""
    if a.sym is UNKNOWN:
        return True
    if a.sym != b.sym or len(a.children) != len(b.children):
        return False
    return all(refines(ca, cb) for ca, cb in zip(a.children, b.children))


# ---------------------------------------------------------------------------
# S-expression text form
# ---------------------------------------------------------------------------

def _fmt_number(p: Fraction) -> str:
    if p.denominator == 1:
        return str(p.numerator)
    return f"{p.numerator}/{p.denominator}"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_sexpr(e: TreeExpr, proc_names: Optional[list] = None,
                 render_value: Optional[Callable] = None) -> str:
    """Canonical S-expression form, e.g. ``(mu Z (prob 3/4 (seq "x := x + 1" Z) eps))``."""
    rv = render_value or repr

    def name_of(i: int) -> str:
        return proc_names[i] if proc_names is not None else str(i)

    def go(t) -> str:
        if isinstance(t, Leaf):
            s = t.sym
            if isinstance(s, Eps):
                return "eps"
            if isinstance(s, FreeVar):
                return s.name
            if isinstance(s, ConstSym):
                return f"(const {rv(s.value)})"
            if isinstance(s, CallLinSym):
                return f"(calllin {name_of(s.proc)} {rv(s.right_const)})"
            raise TypeError(f"unknown leaf symbol: {s!r}")
        if isinstance(t, Node):
            s = t.sym
            kids = " ".join(go(c) for c in t.children)
            if isinstance(s, SeqAct):
                return f"(seq {_quote(s.action)} {kids})"
            if isinstance(s, Cond):
                return f"(cond {_quote(s.cond)} {kids})"
            if isinstance(s, Prob):
                return f"(prob {_fmt_number(s.p)} {kids})"
            if isinstance(s, Ndet):
                return f"(ndet {kids})"
            if isinstance(s, Call):
                return f"(call {name_of(s.proc)} {kids})"
            if isinstance(s, SeqConstSym):
                return f"(seqc {rv(s.value)} {kids})"
            if isinstance(s, PlusSym):
                return f"(plus {kids})"
            if isinstance(s, MinusSym):
                return f"(minus {kids})"
            raise TypeError(f"unknown node symbol: {s!r}")
        if isinstance(t, Concat):
            return f"(concat {t.var} {go(t.left)} {go(t.right)})"
        if isinstance(t, Mu):
            return f"(mu {t.var} {go(t.body)})"
        raise TypeError(f"not a tree expression: {t!r}")

    return go(e)


class SexprError(ValueError):
    pass


def _tokenize_sexpr(text: str) -> Iterator[str]:
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise SexprError("unterminated string literal")
            yield '"' + "".join(buf)
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()"':
                j += 1
            yield text[i:j]
            i = j


def parse_sexpr(text: str, proc_names: Optional[list] = None) -> TreeExpr:
    """Parse the canonical S-expression form of a program tree expression."""
    toks = list(_tokenize_sexpr(text))
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take():
        nonlocal pos
        if pos >= len(toks):
            raise SexprError("unexpected end of input")
        tok = toks[pos]
        pos += 1
        return tok

    def expect(t):
        tok = take()
        if tok != t:
            raise SexprError(f"expected {t!r}, found {tok!r}")

    def string_tok() -> str:
        tok = take()
        if not tok.startswith('"'):
            raise SexprError(f"expected a string literal, found {tok!r}")
        return tok[1:]

    def proc_index(tok: str) -> int:
        if proc_names is not None:
            if tok not in proc_names:
                raise SexprError(f"unknown procedure name {tok!r}")
            return proc_names.index(tok)
        try:
            return int(tok)
        except ValueError:
            raise SexprError(f"procedure index expected, found {tok!r}") from None

    def expr() -> TreeExpr:
        tok = take()
        if tok == "(":
            head = take()
            if head == "seq":
                out = seq(string_tok(), expr())
            elif head == "cond":
                out = cond(string_tok(), expr(), expr())
            elif head == "prob":
                out = prob(Fraction(take()), expr(), expr())
            elif head == "ndet":
                out = ndet(expr(), expr())
            elif head == "call":
                out = call(proc_index(take()), expr())
            elif head == "mu":
                out = Mu(take(), expr())
            elif head == "concat":
                v = take()
                out = Concat(expr(), v, expr())
            else:
                raise SexprError(f"unknown form {head!r}")
            expect(")")
            return out
        if tok == ")":
            raise SexprError("unexpected ')'")
        if tok == "eps":
            return EPS
        if tok.startswith('"'):
            raise SexprError("string literal outside a form")
        return var(tok)

    out = expr()
    if pos != len(toks):
        raise SexprError(f"trailing tokens: {toks[pos:]}")
    return out


def validate_tree(e: TreeExpr) -> None:
    """Check structural invariants; raises ValueError on violation."""
    if isinstance(e, Leaf):
        return
    if isinstance(e, Node):
        sym = e.sym
        arity = {SeqAct: 1, Call: 1, SeqConstSym: 1, Cond: 2, Prob: 2, Ndet: 2,
                 PlusSym: 2, MinusSym: 2}.get(type(sym))
        if arity is None:
            raise ValueError(f"symbol {sym!r} cannot head a Node")
        if len(e.children) != arity:
            raise ValueError(f"{sym!r} expects {arity} children, got {len(e.children)}")
        for c in e.children:
            validate_tree(c)
        return
    if isinstance(e, Concat):
        if e.var in free_vars(e.right):
            raise ValueError(f"Concat-bound {e.var!r} occurs free in the right part")
        validate_tree(e.left)
        validate_tree(e.right)
        return
    if isinstance(e, Mu):
        validate_tree(e.body)
        return
    raise TypeError(f"not a tree expression: {e!r}")
