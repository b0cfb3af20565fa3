"""Termination-probability / expected-increment pair domain.

Elements are pairs (p, d): p bounds the termination probability and d the
expected accumulated increment, scaled by p.  Extension composes runs:
(p1, d1) ⊗ (p2, d2) = (p1·p2, p1·d2 + p2·d1).

The only data actions with a meaning here are `skip` and self-increments
``x := x + c`` with c >= 0, which map to (1, c).  Nondeterminism is read
demonically as the componentwise minimum, which completes the structure;
conditionals are rejected.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..algebra import OmegaPma
from ..errors import SubtractUndefined, UnknownAction
from . import minilang

_CLAMP = 1e-12


class PairExpDiff(OmegaPma):
    name = "pair"
    lp_sense = "max"
    ndet_relation = "<="
    lp_nonneg = True

    def zero(self):
        return (0.0, 0.0)

    def one(self):
        return (1.0, 0.0)

    def combine(self, a, b):
        return (a[0] + b[0], a[1] + b[1])

    def extend(self, a, b):
        return (a[0] * b[0], a[0] * b[1] + b[0] * a[1])

    def subtract(self, a, b):
        p, d = a[0] - b[0], a[1] - b[1]
        if p < -_CLAMP or d < -_CLAMP:
            raise SubtractUndefined(f"pair: {b} above {a}")
        return (max(p, 0.0), max(d, 0.0))

    def prob_choice(self, p, a, b):
        q = 1.0 - p
        return (p * a[0] + q * b[0], p * a[1] + q * b[1])

    def ndet_choice(self, a, b):
        return (min(a[0], b[0]), min(a[1], b[1]))

    def interpret_action(self, action: str):
        if action == "skip":
            return self.one()
        parts = minilang.split_assign(action)
        if parts is not None:
            target, rhs = parts
            try:
                cst, coeffs = minilang.parse_affine(rhs)
            except minilang.MiniLangError:
                raise UnknownAction(action, self.name) from None
            if set(coeffs) == {target} and coeffs[target] == 1 and cst >= 0:
                return (1.0, float(cst))
        raise UnknownAction(action, self.name)

    def render(self, a):
        return f"⟨{a[0]:.9g}, {a[1]:.9g}⟩"

    def dim(self):
        return 2

    def flatten(self, a):
        return np.array([a[0], a[1]], dtype=float)

    def unflatten(self, vec):
        return (float(vec[0]), float(vec[1]))

    def left_mul(self, c):
        p, d = c
        return np.array([[p, 0.0], [d, p]])

    def right_mul(self, c):
        # pair extension is commutative
        return self.left_mul(c)


def pair_solve_strategy(system, gamma=None):
    return PairExpDiff().solve_strategy(system, gamma or {})
