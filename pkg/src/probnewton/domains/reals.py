"""Termination-probability domain: nonnegative reals with min for ndet.

Lower-bound analysis: the least solution of a min-linear system is the
optimum of  maximize Σ Z  subject to equality rows for linear equations
and Z <= branch rows for each min node.
"""

from __future__ import annotations

import numpy as np

from ..algebra import OmegaPma
from ..errors import SubtractUndefined

_CLAMP = 1e-12


class RealTermProb(OmegaPma):
    name = "reals"
    lp_sense = "max"
    ndet_relation = "<="
    lp_nonneg = True

    def zero(self):
        return 0.0

    def one(self):
        return 1.0

    def combine(self, a, b):
        return a + b

    def extend(self, a, b):
        return a * b

    def subtract(self, a, b):
        d = a - b
        if d < -_CLAMP:
            raise SubtractUndefined(f"reals: {b} above {a}")
        return max(d, 0.0)

    def prob_choice(self, p, a, b):
        return p * a + (1.0 - p) * b

    def ndet_choice(self, a, b):
        return min(a, b)

    def interpret_action(self, action: str):
        # data actions cannot change a termination weight
        return 1.0

    def leq(self, a, b):
        return a <= b + _CLAMP

    def leq_within(self, a, b, tol):
        return a <= b + tol

    def distance(self, a, b):
        return abs(a - b)

    def render(self, a):
        return f"{a:.12g}"

    def dim(self):
        return 1

    def flatten(self, a):
        return np.array([float(a)])

    def unflatten(self, vec):
        return float(vec[0])

    def left_mul(self, c):
        return np.array([[float(c)]])

    def right_mul(self, c):
        return np.array([[float(c)]])


def real_solve_strategy(system, gamma=None):
    """Least solution over the reals domain (min nodes via maximize-LP)."""
    return RealTermProb().solve_strategy(system, gamma or {})
