"""Generic LP reduction behind every linear-recursion-solving strategy.

A μ-free linear equation system over a flattenable carrier becomes one LP:

* every unknown contributes one LP variable per carrier component;
* sequencing by constants and probabilistic/conditional mixing are linear
  maps on flattened vectors, so each right-hand side folds into an affine
  form ``const + Σ M_u · u``;
* an equation becomes componentwise equality rows;
* a min-style confluence (reals, pairs, Bayes matrices) becomes a fresh
  vector W with ``W <= branch`` rows under ``maximize Σ``, a max-style one
  (moments, expectation matrices) ``W >= branch`` under ``minimize Σ`` —
  both characterize the least solution of the monotone system;
* the expectation domain's rewrite-tightened conditional adds one
  nonnegative multiplier per (rewrite, output column) and inequality rows,
  via the domain hook ``encode_cond``.

Divergent systems surface as infeasible or unbounded LPs -> SolveFailure.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import SolveFailure, UnknownCondition
from ..lp import LpProblem, solve_lp
from ..treeexpr import (
    CallLinSym, Concat, Cond, ConstSym, FreeVar, Leaf, MinusSym, Ndet, Node,
    PlusSym, Prob, SeqConstSym,
)


class Affine:
    """const + Σ lin[u] · vec(u) over the flattened carrier."""

    __slots__ = ("const", "lin")

    def __init__(self, const: np.ndarray, lin: dict | None = None):
        self.const = const
        self.lin = lin or {}

    def __add__(self, other: "Affine") -> "Affine":
        lin = dict(self.lin)
        for u, m in other.lin.items():
            lin[u] = lin[u] + m if u in lin else m
        return Affine(self.const + other.const, lin)

    def __sub__(self, other: "Affine") -> "Affine":
        lin = dict(self.lin)
        for u, m in other.lin.items():
            lin[u] = lin[u] - m if u in lin else -m
        return Affine(self.const - other.const, lin)

    def scaled(self, factor: float) -> "Affine":
        return Affine(self.const * factor, {u: m * factor for u, m in self.lin.items()})

    def mapped(self, matrix: np.ndarray) -> "Affine":
        return Affine(matrix @ self.const, {u: matrix @ m for u, m in self.lin.items()})


class LpEncoder:
    """Builds the LP for one system; domains call back into it for cond."""

    def __init__(self, dom, system, gamma):
        self.dom = dom
        self.system = system
        self.gamma = gamma
        self.dim = dom.dim()
        self.problem = LpProblem(name=f"{dom.name}-solve")
        self.lb = 0.0 if dom.lp_nonneg else None
        self._fresh = itertools.count(1)
        self.vector_unknowns = []

    def comp(self, unknown: str, k: int) -> str:
        return f"{unknown}#{k}"

    def add_vector_unknown(self, unknown: str) -> None:
        for k in range(self.dim):
            self.problem.add_variable(self.comp(unknown, k), lb=self.lb)
        self.vector_unknowns.append(unknown)

    def fresh_vector(self, tag: str) -> str:
        name = f"$w{next(self._fresh)}_{tag}"
        self.add_vector_unknown(name)
        return name

    def fresh_scalar(self, tag: str) -> str:
        name = f"$c{next(self._fresh)}_{tag}"
        self.problem.add_variable(name, lb=0.0)
        return name

    def unknown_affine(self, unknown: str) -> Affine:
        return Affine(np.zeros(self.dim), {unknown: np.eye(self.dim)})

    def add_rows(self, lhs: Affine, relation: str, rhs: Affine,
                 extra: dict | None = None) -> None:
        """One row per component: lhs - rhs REL 0 (constants moved right)."""
        diff = lhs - rhs
        for k in range(self.dim):
            coeffs = {}
            for u, m in diff.lin.items():
                row = m[k]
                for j in np.nonzero(row)[0]:
                    coeffs[self.comp(u, int(j))] = coeffs.get(self.comp(u, int(j)), 0.0) + float(row[j])
            if extra:
                for name, vec in extra.items():
                    if vec[k]:
                        coeffs[name] = coeffs.get(name, 0.0) + float(vec[k])
            self.problem.add_constraint(coeffs, relation, -float(diff.const[k]))

    def encode(self, e, env: dict) -> Affine:
        dom = self.dom
        if isinstance(e, Leaf):
            s = e.sym
            if isinstance(s, ConstSym):
                return Affine(dom.flatten(s.value).astype(float))
            if isinstance(s, FreeVar):
                name = s.name
                if name in env:
                    return env[name]
                if name in self.system.equations:
                    return self.unknown_affine(name)
                if name in self.gamma:
                    return Affine(dom.flatten(self.gamma[name]).astype(float))
                raise KeyError(f"unbound variable {name!r} in linear system")
            if isinstance(s, CallLinSym):
                target = self.system.proc_names[s.proc]
                return self.unknown_affine(target).mapped(dom.right_mul(s.right_const))
            raise TypeError(f"cannot encode leaf {s!r}")
        if isinstance(e, Node):
            s = e.sym
            if isinstance(s, SeqConstSym):
                return self.encode(e.children[0], env).mapped(dom.left_mul(s.value))
            if isinstance(s, Prob):
                p = float(s.p)
                return (self.encode(e.children[0], env).scaled(p)
                        + self.encode(e.children[1], env).scaled(1.0 - p))
            if isinstance(s, PlusSym):
                return self.encode(e.children[0], env) + self.encode(e.children[1], env)
            if isinstance(s, MinusSym):
                return self.encode(e.children[0], env) - self.encode(e.children[1], env)
            if isinstance(s, Ndet):
                left = self.encode(e.children[0], env)
                right = self.encode(e.children[1], env)
                w = self.fresh_vector("ndet")
                waff = self.unknown_affine(w)
                self.add_rows(waff, dom.ndet_relation, left)
                self.add_rows(waff, dom.ndet_relation, right)
                return waff
            if isinstance(s, Cond):
                linear = dom.cond_linear(s.cond)
                if linear is not None:
                    m_then, m_else = linear
                    return (self.encode(e.children[0], env).mapped(m_then)
                            + self.encode(e.children[1], env).mapped(m_else))
                left = self.encode(e.children[0], env)
                right = self.encode(e.children[1], env)
                return dom.encode_cond(self, s.cond, left, right)
            raise TypeError(f"cannot encode node {s!r}")
        if isinstance(e, Concat):
            bound = self.encode(e.right, env)
            return self.encode(e.left, {**env, e.var: bound})
        raise TypeError(f"cannot encode {e!r} (mu-free linear expression expected)")


def lp_strategy(dom, system, gamma) -> tuple:
    """Least solution of a μ-free linear system; returns (mapping, summaries)."""
    system.validate()
    enc = LpEncoder(dom, system, gamma)
    for name in system.equations:
        enc.add_vector_unknown(name)
    for name, rhs in system.equations.items():
        enc.add_rows(enc.unknown_affine(name), "=", enc.encode(rhs, {}))
    objective = {enc.comp(u, k): 1.0
                 for u in enc.vector_unknowns for k in range(enc.dim)}
    enc.problem.set_objective(dom.lp_sense, objective)

    sol = solve_lp(enc.problem)
    if sol.status != "optimal":
        raise SolveFailure(
            f"{dom.name}: linear-recursion solve failed ({sol.status}); "
            f"{len(system.equations)} unknowns — the system appears divergent "
            "or contradictory", status=sol.status)

    out = {}
    for name in system.equations:
        vec = np.array([sol.assignment[enc.comp(name, k)] for k in range(enc.dim)])
        out[name] = dom.unflatten(vec)
    nu = [out[p] for p in system.proc_names]
    return out, nu
