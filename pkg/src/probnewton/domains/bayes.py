"""Posterior-distribution domain for probabilistic Boolean programs.

An element is an |S|×|S| nonnegative matrix over the state space
S = assignments to the program's Boolean variables; entry (s, s') lower
bounds the probability of terminating in s' when started in s.  Sequencing
is matrix product, conditionals multiply by the 0/1 diagonal projections
of the condition and its negation, nondeterminism is the pointwise
minimum (a demonic lower bound).

State order: variables sorted by name; states enumerated in binary
counting order with `true` first, so for two variables the rows read
TT, TF, FT, FF.

Actions:  ``skip``, ``x := <bool expr>``, ``x ~ Ber(p)``.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..algebra import OmegaPma
from ..errors import UnknownAction, UnknownCondition
from . import minilang


class BayesMatrix(OmegaPma):
    lp_sense = "max"
    ndet_relation = "<="
    lp_nonneg = True

    def __init__(self, variables):
        self.variables = tuple(sorted(set(variables)))
        if not self.variables:
            raise ValueError("the Bayes domain needs at least one Boolean variable")
        self.k = len(self.variables)
        self.n_states = 1 << self.k
        self.name = f"bayes({','.join(self.variables)})"
        self._action_cache: dict = {}
        self._gamma_cache: dict = {}

    # --- state helpers -------------------------------------------------------

    def state_value(self, state: int, var: str) -> bool:
        i = self.variables.index(var)
        return ((state >> (self.k - 1 - i)) & 1) == 0  # bit 0 encodes `true`

    def state_dict(self, state: int) -> dict:
        return {v: self.state_value(state, v) for v in self.variables}

    def with_value(self, state: int, var: str, value: bool) -> int:
        i = self.variables.index(var)
        bit = 1 << (self.k - 1 - i)
        return (state & ~bit) | (0 if value else bit)

    def state_label(self, state: int) -> str:
        return "".join("T" if self.state_value(state, v) else "F" for v in self.variables)

    # --- carrier ---------------------------------------------------------------

    def zero(self):
        return np.zeros((self.n_states, self.n_states))

    def one(self):
        return np.eye(self.n_states)

    def combine(self, a, b):
        return a + b

    def extend(self, a, b):
        return a @ b

    def prob_choice(self, p, a, b):
        return p * a + (1.0 - p) * b

    def ndet_choice(self, a, b):
        return np.minimum(a, b)

    def gamma_matrix(self, phi: str) -> np.ndarray:
        got = self._gamma_cache.get(phi)
        if got is None:
            try:
                fn, names = minilang.parse_bool(phi)
            except minilang.MiniLangError:
                raise UnknownCondition(phi, self.name) from None
            unknown = names - set(self.variables)
            if unknown:
                raise UnknownCondition(phi, self.name)
            got = np.diag([1.0 if fn(self.state_dict(s)) else 0.0
                           for s in range(self.n_states)])
            self._gamma_cache[phi] = got
        return got

    def cond_choice(self, phi, a, b):
        g = self.gamma_matrix(phi)
        ng = np.eye(self.n_states) - g
        return g @ a + ng @ b

    def interpret_action(self, action: str):
        got = self._action_cache.get(action)
        if got is not None:
            return got
        mat = self._build_action(action)
        self._action_cache[action] = mat
        return mat

    def _build_action(self, action: str) -> np.ndarray:
        if action == "skip":
            return self.one()
        sample = minilang.split_sample(action)
        if sample is not None:
            x, dist, args = sample
            if x in self.variables and dist == "Ber" and len(args) == 1:
                p = float(minilang.number_of(args[0]))
                m = np.zeros((self.n_states, self.n_states))
                for s in range(self.n_states):
                    m[s, self.with_value(s, x, True)] += p
                    m[s, self.with_value(s, x, False)] += 1.0 - p
                return m
            raise UnknownAction(action, self.name)
        assign = minilang.split_assign(action)
        if assign is not None:
            x, rhs = assign
            if x in self.variables:
                try:
                    fn, names = minilang.parse_bool(rhs)
                except minilang.MiniLangError:
                    raise UnknownAction(action, self.name) from None
                if names <= set(self.variables):
                    m = np.zeros((self.n_states, self.n_states))
                    for s in range(self.n_states):
                        m[s, self.with_value(s, x, fn(self.state_dict(s)))] = 1.0
                    return m
            raise UnknownAction(action, self.name)
        raise UnknownAction(action, self.name)

    def render(self, a):
        labels = [self.state_label(s) for s in range(self.n_states)]
        width = max(8, max(len(l) for l in labels) + 1)
        head = " " * width + "".join(f"{l:>{width}}" for l in labels)
        rows = [head]
        for s in range(self.n_states):
            cells = "".join(f"{a[s, t]:>{width}.6f}" for t in range(self.n_states))
            rows.append(f"{labels[s]:>{width}}" + cells)
        return "\n".join(rows)

    # --- flattening (row-major) --------------------------------------------------

    def dim(self):
        return self.n_states * self.n_states

    def flatten(self, a):
        return np.asarray(a, dtype=float).reshape(-1)

    def unflatten(self, vec):
        return np.asarray(vec, dtype=float).reshape(self.n_states, self.n_states)

    def left_mul(self, c):
        return np.kron(np.asarray(c, dtype=float), np.eye(self.n_states))

    def right_mul(self, c):
        return np.kron(np.eye(self.n_states), np.asarray(c, dtype=float).T)

    def cond_linear(self, phi):
        g = self.gamma_matrix(phi)
        return self.left_mul(g), self.left_mul(np.eye(self.n_states) - g)


def bayes_solve_strategy(domain: BayesMatrix, system, gamma=None):
    """Least solution of a min-linear matrix system via the maximize-LP."""
    return domain.solve_strategy(system, gamma or {})
