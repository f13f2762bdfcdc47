"""Independent reference implementations used only to check the package.

Everything here is deliberately written without reusing package internals:
tours by memoized recursion over subsets, selections by full enumeration,
binary programs by trying every assignment.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

from boxtour.model import Instance, SolveOptions, access_value


def cycle_cost(order, cost_of) -> float:
    if len(order) <= 1:
        return 0.0
    if len(order) == 2:
        return 2.0 * cost_of(order[0], order[1])
    return sum(cost_of(order[k], order[(k + 1) % len(order)]) for k in range(len(order)))


def best_tour_by_permutations(ids, cost_of) -> float:
    """Optimal cycle cost by trying every ordering (anchor the first node)."""
    ids = list(ids)
    if len(ids) <= 2:
        return cycle_cost(tuple(ids), cost_of)
    first, rest = ids[0], ids[1:]
    return min(
        cycle_cost((first,) + perm, cost_of)
        for perm in itertools.permutations(rest)
    )


def held_karp_cost(matrix) -> float:
    """Optimal cycle cost over all rows of a dense matrix (recursive memo)."""
    n = len(matrix)
    if n <= 1:
        return 0.0
    if n == 2:
        return 2.0 * matrix[0][1]
    full = (1 << (n - 1)) - 1  # bitmask over nodes 1..n-1

    @lru_cache(maxsize=None)
    def shortest(mask: int, last: int) -> float:
        rest = mask & ~(1 << (last - 1))
        if rest == 0:
            return matrix[0][last]
        return min(
            shortest(rest, k) + matrix[k][last]
            for k in range(1, n)
            if rest & (1 << (k - 1))
        )

    best = min(shortest(full, last) + matrix[last][0] for last in range(1, n))
    shortest.cache_clear()
    return best


def dblp_oracle(inst: Instance, options: SolveOptions):
    """(optimal value, one optimal selection) by full enumeration.

    Enumerates every selection containing the required set, checks coverage,
    access and the optional caps directly from the definitions, and prices
    each survivor with an exact tour.
    """
    ids = list(inst.ids)
    required = sorted(inst.required_ids)
    optional = [i for i in ids if i not in inst.required_ids]
    cost_of = inst.edge_costs.cost
    fixed = inst.fixed_costs
    cov_q = inst.q if options.objective_mode == "min_cost" else options.base_coverage

    best_value, best_sel = math.inf, None
    for k in range(len(optional) + 1):
        for extra in itertools.combinations(optional, k):
            selected = frozenset(required) | frozenset(extra)
            ok = True
            for pop in inst.populations:
                if len(pop.covering_set & selected) < cov_q:
                    ok = False
                    break
                if access_value(pop, selected) < options.r - 1e-12:
                    ok = False
                    break
            if not ok:
                continue
            members = sorted(selected)
            if len(members) <= 2:
                operational = cycle_cost(tuple(members), cost_of)
            else:
                matrix = [[cost_of(a, b) if a != b else 0.0 for b in members]
                          for a in members]
                operational = held_karp_cost(matrix)
            total_fixed = sum(fixed[i] for i in selected)
            if options.budget is not None and total_fixed + operational > options.budget + 1e-9:
                continue
            if options.tour_cost_cap is not None and operational > options.tour_cost_cap + 1e-9:
                continue
            if options.fixed_count is not None and len(selected) != options.fixed_count:
                continue
            if options.objective_mode == "min_cost":
                value = total_fixed + operational
            else:
                value = -sum(
                    pop.weight for pop in inst.populations
                    if inst.q == 0 or len(pop.covering_set & selected) >= inst.q
                )
            if value < best_value - 1e-12:
                best_value, best_sel = value, selected
    return best_value, best_sel


def enumerate_bip(num_vars, objective, rows, separator=None):
    """(optimal value, assignment) by trying every binary assignment."""
    best_value, best_assignment = math.inf, None
    for bits in itertools.product((0, 1), repeat=num_vars):
        if not all(row.satisfied_by(bits, tol=1e-9) for row in rows):
            continue
        if separator is not None and list(separator(bits)):
            continue
        value = sum(c * b for c, b in zip(objective, bits))
        if value < best_value - 1e-12:
            best_value, best_assignment = value, bits
    return best_value, best_assignment
