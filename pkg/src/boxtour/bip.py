"""Exact solver for minimization binary integer programs with lazily
separated constraint rows.

Branch and bound with best-first search. Node bounds come from the linear
relaxation (scipy's HiGHS); a constraint-free objective bound is used as a
fallback if the LP solve fails numerically. A separator callback, when
present, is invoked on every integral candidate before it can become the
incumbent; rows it returns are added globally and the node is re-bounded, so
the final optimum is always separator-clean.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

INTEGRALITY_TOL = 1e-6
ROW_TOL = 1e-6
# Nodes are pruned only when provably within this of the incumbent, so two
# assignments must be closer than this to ever be confused.
PRUNE_TOL = 1e-9
_SENSES = ("<=", ">=", "==")


@dataclass(frozen=True)
class LinearRow:
    """Sparse linear constraint: sum(coeffs[k] * x[indices[k]]) sense rhs."""

    indices: tuple[int, ...]
    coeffs: tuple[float, ...]
    sense: str
    rhs: float

    def __post_init__(self):
        if len(self.indices) != len(self.coeffs):
            raise ValueError("indices and coeffs must have equal length")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("row indices must be strictly increasing")
        if any(c == 0.0 for c in self.coeffs):
            raise ValueError("rows must not store zero coefficients")
        if self.sense not in _SENSES:
            raise ValueError(f"sense must be one of {_SENSES}")

    def satisfied_by(self, x: Sequence[float], tol: float = ROW_TOL) -> bool:
        lhs = sum(c * x[i] for i, c in zip(self.indices, self.coeffs))
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass
class BinaryProgram:
    """A minimization program over binary variables.

    ``lazy_separator`` takes an integral candidate assignment (tuple of 0/1)
    and returns zero or more new rows violated by that candidate; returning
    nothing certifies the candidate against the lazy family.

    ``branch_priority`` optionally groups variables into branching classes;
    lower values branch first. Within the most preferred class that still
    has a fractional variable, the most fractional one is chosen.
    """

    num_vars: int
    objective: Sequence[float]
    rows: list[LinearRow] = field(default_factory=list)
    lazy_separator: Optional[Callable[[tuple[int, ...]], Sequence[LinearRow]]] = None
    branch_priority: Optional[Sequence[int]] = None

    def __post_init__(self):
        self.objective = tuple(float(c) for c in self.objective)
        if len(self.objective) != self.num_vars:
            raise ValueError("objective length must equal num_vars")
        if self.branch_priority is not None and len(self.branch_priority) != self.num_vars:
            raise ValueError("branch_priority length must equal num_vars")
        for row in self.rows:
            if row.indices and row.indices[-1] >= self.num_vars:
                raise ValueError("row references a variable index out of range")


@dataclass(frozen=True)
class SolveResult:
    status: str  # "optimal" | "infeasible" | "node_limit"
    assignment: Optional[tuple[int, ...]]
    objective_value: Optional[float]
    nodes_explored: int
    lazy_rows_added: int


class _RowMatrices:
    """Cached ub/eq matrices for the current row set; rebuilt on lazy adds."""

    def __init__(self, num_vars: int, rows: list[LinearRow]):
        self.num_vars = num_vars
        self.rebuild(rows)

    def rebuild(self, rows: list[LinearRow]):
        ub_data, ub_rows, ub_cols, ub_rhs = [], [], [], []
        eq_data, eq_rows, eq_cols, eq_rhs = [], [], [], []
        for row in rows:
            if row.sense == "==":
                r = len(eq_rhs)
                eq_rhs.append(row.rhs)
                for i, c in zip(row.indices, row.coeffs):
                    eq_rows.append(r)
                    eq_cols.append(i)
                    eq_data.append(c)
            else:
                flip = -1.0 if row.sense == ">=" else 1.0
                r = len(ub_rhs)
                ub_rhs.append(flip * row.rhs)
                for i, c in zip(row.indices, row.coeffs):
                    ub_rows.append(r)
                    ub_cols.append(i)
                    ub_data.append(flip * c)
        n = self.num_vars
        self.a_ub = (
            sparse.csr_matrix((ub_data, (ub_rows, ub_cols)), shape=(len(ub_rhs), n))
            if ub_rhs else None
        )
        self.b_ub = np.array(ub_rhs) if ub_rhs else None
        self.a_eq = (
            sparse.csr_matrix((eq_data, (eq_rows, eq_cols)), shape=(len(eq_rhs), n))
            if eq_rhs else None
        )
        self.b_eq = np.array(eq_rhs) if eq_rhs else None


def _lp_bound(objective, mats: _RowMatrices, lower: np.ndarray, upper: np.ndarray,
              want_marginals: bool = False):
    """(bound, lp_solution, bound-dual marginals) under the given var bounds.

    Returns (inf, None, None) when the relaxation is infeasible and falls
    back to a constraint-free objective bound when the LP solver fails.
    """
    res = linprog(
        objective,
        A_ub=mats.a_ub,
        b_ub=mats.b_ub,
        A_eq=mats.a_eq,
        b_eq=mats.b_eq,
        bounds=np.column_stack([lower, upper]),
        method="highs",
    )
    if res.status == 0:
        marginals = None
        if want_marginals and res.lower is not None:
            marginals = (res.lower.marginals, res.upper.marginals)
        return float(res.fun), res.x, marginals
    if res.status == 2:
        return math.inf, None, None
    # Degenerate solve: bound by the best conceivable objective ignoring rows.
    c = np.asarray(objective)
    fallback = float(c @ np.where(c > 0, lower, upper))
    return fallback, None, None


def relax_bound(bp: BinaryProgram, fixed: Optional[dict[int, int]] = None) -> float:
    """Lower bound on the optimal completion of a partial assignment.

    Returns +inf when the relaxation is infeasible.
    """
    if bp.num_vars == 0:
        return 0.0
    lower = np.zeros(bp.num_vars)
    upper = np.ones(bp.num_vars)
    for idx, val in (fixed or {}).items():
        lower[idx] = upper[idx] = float(val)
    mats = _RowMatrices(bp.num_vars, bp.rows)
    bound, _, _ = _lp_bound(bp.objective, mats, lower, upper)
    return bound


def _branch_var(x: np.ndarray, free: np.ndarray,
                priority: Optional[np.ndarray]) -> Optional[int]:
    """Most fractional free variable, ties to the lowest index.

    With priorities, only the most preferred class containing a fractional
    variable competes.
    """
    frac = np.minimum(x, 1.0 - x)
    frac[~free] = -1.0
    fractional = frac > INTEGRALITY_TOL
    if not fractional.any():
        return None
    if priority is not None:
        best_class = priority[fractional].min()
        frac[priority != best_class] = -1.0
    return int(np.argmax(frac))


def _reduced_cost_fix(x: np.ndarray, marginals, lower: np.ndarray,
                      upper: np.ndarray, gap: float):
    """Fix variables whose LP reduced cost already exceeds the incumbent gap.

    A variable sitting at a bound with reduced cost beyond the remaining gap
    cannot move in any improving completion, so the subtree keeps it fixed.
    """
    if marginals is None or not math.isfinite(gap):
        return lower, upper
    margin = gap + 1e-7 * (1.0 + abs(gap))
    rc_low, rc_up = marginals
    at_low = (x <= lower + INTEGRALITY_TOL) & (rc_low > margin)
    at_up = (x >= upper - INTEGRALITY_TOL) & (rc_up < -margin)
    if not (at_low.any() or at_up.any()):
        return lower, upper
    lower, upper = lower.copy(), upper.copy()
    upper[at_low] = lower[at_low]
    lower[at_up] = upper[at_up]
    return lower, upper


def solve(bp: BinaryProgram, node_limit: Optional[int] = None,
          initial_incumbent: Optional[Sequence[int]] = None) -> SolveResult:
    """Solve to certified optimality over rows plus the lazy family.

    ``initial_incumbent`` primes the upper bound with a known assignment; it
    must satisfy the static rows and is checked against the separator (any
    rows the separator returns are retained, the candidate is discarded).

    Deterministic: best-first by relaxation bound with FIFO tie-breaking.
    """
    if bp.num_vars == 0:
        return SolveResult("optimal", (), 0.0, 0, 0)

    objective = np.asarray(bp.objective, dtype=float)
    priority = (np.asarray(bp.branch_priority, dtype=int)
                if bp.branch_priority is not None else None)
    rows = list(bp.rows)
    mats = _RowMatrices(bp.num_vars, rows)
    lazy_added = 0

    best_value = math.inf
    best_assignment: Optional[tuple[int, ...]] = None

    def separator_accepts(assignment: tuple[int, ...]) -> bool:
        """Run the separator, adding any returned rows. True when clean."""
        nonlocal lazy_added
        if bp.lazy_separator is None:
            return True
        new_rows = list(bp.lazy_separator(assignment))
        if not new_rows:
            return True
        for row in new_rows:
            if row.indices and row.indices[-1] >= bp.num_vars:
                raise ValueError("separator row references a variable out of range")
        if all(row.satisfied_by(assignment) for row in new_rows):
            raise ValueError(
                "separator returned rows but none are violated by the candidate"
            )
        rows.extend(new_rows)
        lazy_added += len(new_rows)
        mats.rebuild(rows)
        return False

    if initial_incumbent is not None:
        cand = tuple(int(v) for v in initial_incumbent)
        if len(cand) != bp.num_vars or any(v not in (0, 1) for v in cand):
            raise ValueError("initial incumbent must be a full binary assignment")
        if all(row.satisfied_by(cand) for row in bp.rows) and separator_accepts(cand):
            best_value = float(objective @ np.array(cand))
            best_assignment = cand

    counter = itertools.count()
    # Heap entries: (bound key, push order, lower bounds, upper bounds).
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = [
        (-math.inf, next(counter), np.zeros(bp.num_vars), np.ones(bp.num_vars))
    ]
    nodes = 0

    while heap:
        key, _, lower, upper = heapq.heappop(heap)
        if key >= best_value - PRUNE_TOL:
            continue
        if node_limit is not None and nodes >= node_limit:
            return SolveResult("node_limit", best_assignment,
                               best_value if best_assignment is not None else None,
                               nodes, lazy_added)
        nodes += 1

        # Re-bound against the current global row set; loop because accepting
        # an integral point may add lazy rows that change this node's LP.
        branch = None
        while True:
            bound, x, marginals = _lp_bound(objective, mats, lower, upper,
                                            want_marginals=True)
            if x is None or bound >= best_value - PRUNE_TOL:
                break
            branch = _branch_var(x, (upper - lower) > 0.5, priority)
            if branch is not None:
                break
            assignment = tuple(int(round(v)) for v in x)
            if separator_accepts(assignment):
                best_value = float(objective @ np.array(assignment))
                best_assignment = assignment
                break
            branch = None  # lazy rows added: re-solve this node

        if branch is None:
            continue
        lower, upper = _reduced_cost_fix(
            x, marginals, lower, upper, best_value - bound)
        for val in (0.0, 1.0):
            lo, hi = lower.copy(), upper.copy()
            lo[branch] = hi[branch] = val
            heapq.heappush(heap, (bound, next(counter), lo, hi))

    if best_assignment is None:
        return SolveResult("infeasible", None, None, nodes, lazy_added)
    return SolveResult("optimal", best_assignment, best_value, nodes, lazy_added)
