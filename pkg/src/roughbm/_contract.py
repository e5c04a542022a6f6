"""Exact evaluation of sums over index tuples of products of pairwise kernels.

A sum  sum_{i_1..i_p} prod_f F_f(i_{vars(f)})  with factors on at most two
variables is evaluated by variable elimination: each step sums one index out
of the product of the factors that touch it. For tree-like and chain-plus-pair
structures this keeps every intermediate at two variables, so the cost is
O(n^3) time and O(n^2) memory instead of n^p.
"""
import math
import string

import numpy as np

DEFAULT_BUDGET = 5e10
MAX_INTERMEDIATE = 2 ** 26


class BudgetExceeded(RuntimeError):
    """A computation was refused because its cost estimate is over budget."""

    def __init__(self, cost, budget, what="computation"):
        self.cost = float(cost)
        self.budget = float(budget)
        super().__init__(f"{what} refused: estimated cost {self.cost:.3g} exceeds budget {self.budget:.3g}")


def plan(sizes, scopes):
    """Greedy elimination order and its (flop, peak-size) estimate.

    sizes maps variable -> range length; scopes is a list of variable tuples.
    """
    scopes = [frozenset(s) for s in scopes]
    remaining = set(sizes)
    order, flops, peak = [], 0.0, 1.0
    while remaining:
        best = None
        for v in sorted(remaining):
            touching = [s for s in scopes if v in s]
            union = frozenset().union(*touching) if touching else frozenset([v])
            cost = math.prod(sizes[u] for u in union)
            out = cost / sizes[v]
            key = (out, cost, v)
            if best is None or key < best[0]:
                best = (key, v, touching, union)
        (out, cost, _), v, touching, union = best
        order.append(v)
        flops += cost * max(len(touching), 1)
        peak = max(peak, out)
        scopes = [s for s in scopes if v not in s] + [union - {v}]
        remaining.discard(v)
    return order, flops, peak


def contract(sizes, factors, budget=None, what="sum"):
    """Sum over all index tuples of the product of factors.

    sizes: dict variable -> length. factors: list of (vars, array) where the
    array has one axis per variable (a 0-d array for a constant). Raises
    BudgetExceeded when the elimination plan is too expensive.
    """
    budget = DEFAULT_BUDGET if budget is None else budget
    order, flops, peak = plan(sizes, [v for v, _ in factors])
    if flops > budget:
        raise BudgetExceeded(flops, budget, what)
    if peak > MAX_INTERMEDIATE:
        raise BudgetExceeded(peak, MAX_INTERMEDIATE, what + " (memory)")
    letters = {v: string.ascii_letters[i] for i, v in enumerate(sorted(sizes))}
    pool = [(tuple(v), np.asarray(a, dtype=float)) for v, a in factors]
    for v in order:
        touching = [f for f in pool if v in f[0]]
        pool = [f for f in pool if v not in f[0]]
        if not touching:
            pool.append(((), np.array(float(sizes[v]))))
            continue
        out_vars = tuple(sorted(set().union(*[set(f[0]) for f in touching]) - {v}))
        spec = ",".join("".join(letters[u] for u in f[0]) for f in touching)
        spec += "->" + "".join(letters[u] for u in out_vars)
        pool.append((out_vars, np.einsum(spec, *[f[1] for f in touching], optimize=True)))
    return math.prod(float(a) for _, a in pool)
