"""Pareto-frontier local search over drop box selections.

Starts from a cheap covering-tour construction feasible at access bound 0,
then repeatedly applies the best feasible swap (remove and/or insert one
location), ranked by the counter-clockwise angle from <-1, 0> to the
(access change, cost change) vector so that cost reductions always win.
The access bound ratchets up by a guaranteed-safe step each iteration; the
non-dominated iterates form the returned frontier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import (
    EdgeCosts,
    Infeasible,
    Instance,
    Solution,
    build_solution,
    dense_view,
    epsilon_default,
    reformulated_costs,
    validate_instance,
)

# Slack for access-bound comparisons; absorbs float non-associativity between
# incremental and fresh evaluations of the same selection.
_BOUND_SLACK = 1e-12

# Tours at or below this size are solved exactly by dynamic programming;
# larger ones get nearest-neighbor construction plus 2-opt.
EXACT_TOUR_LIMIT = 13

# Hard stop for the improvement loop; the access bound provably ratchets, so
# this only guards against cycling among solutions with tied access scores.
_MAX_STALL_FACTOR = 50


@dataclass(frozen=True)
class SwapCandidate:
    """One feasible move: drop ``remove`` and/or add ``insert``.

    ``delta_cost`` is the cheapest-insertion / shortcut-removal estimate on
    reformulated costs; ``delta_access`` the change in the worst population
    access score; ``angle`` the selection angle in (0, 2*pi].
    """

    remove: Optional[str]
    insert: Optional[str]
    delta_cost: float
    delta_access: float
    angle: float


@dataclass(frozen=True)
class FrontierEntry:
    solution: Solution
    r_satisfied: float


@dataclass(frozen=True)
class Frontier:
    """Mutually non-dominated solutions ordered by increasing min access."""

    entries: tuple[FrontierEntry, ...]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


# ---------------------------------------------------------------------------
# Angle rule


def angle(delta_access: float, delta_cost: float) -> float:
    """Counter-clockwise angle from <-1, 0> to <delta_access, delta_cost>.

    Lies in (0, 2*pi]; smaller is better. Raises on the zero vector.
    """
    norm = math.hypot(delta_access, delta_cost)
    if norm == 0.0:
        raise ValueError("angle undefined for a zero (access, cost) change")
    inner = max(-1.0, min(1.0, -delta_access / norm))
    if delta_cost >= 0:
        return 2.0 * math.pi - math.acos(inner)
    return math.acos(inner)


# ---------------------------------------------------------------------------
# Tour construction


def _held_karp(costs: list[list[float]]) -> list[int]:
    """Optimal cycle over all nodes of a small dense matrix, from node 0.

    Forward set-expansion dynamic program, vectorized over the next node.
    """
    full_costs = np.asarray(costs, dtype=float)
    n = full_costs.shape[0]
    m = n - 1  # nodes 1..n-1, relative to the fixed start 0
    size = 1 << m
    sub = full_costs[1:, 1:]
    dp = np.full((size, m), math.inf)
    parent = np.full((size, m), -1, dtype=np.int32)
    dp[[1 << j for j in range(m)], range(m)] = full_costs[0, 1:]
    all_nodes = np.arange(m)
    bits = 1 << all_nodes
    for mask in range(1, size):
        row = dp[mask]
        if not np.isfinite(row).any():
            continue
        extend = row[:, None] + sub
        best_prev = np.argmin(extend, axis=0)
        best_val = extend[best_prev, all_nodes]
        outside = (mask & bits) == 0
        targets = all_nodes[outside]
        nmasks = mask | bits[outside]
        improved = best_val[outside] < dp[nmasks, targets]
        if improved.any():
            dp[nmasks[improved], targets[improved]] = best_val[outside][improved]
            parent[nmasks[improved], targets[improved]] = best_prev[outside][improved]
    full = size - 1
    closing = dp[full] + full_costs[1:, 0]
    arg = int(np.argmin(closing))
    order = []
    mask, j = full, arg
    while j != -1:
        order.append(j + 1)
        mask, j = mask ^ (1 << j), int(parent[mask][j])
    order.reverse()
    return [0] + order


def _nearest_neighbor(costs: list[list[float]]) -> list[int]:
    n = len(costs)
    tour = [0]
    remaining = set(range(1, n))
    while remaining:
        here = tour[-1]
        nxt = min(remaining, key=lambda k: (costs[here][k], k))
        tour.append(nxt)
        remaining.remove(nxt)
    return tour


def _two_opt(tour: list[int], costs: list[list[float]]) -> list[int]:
    """Best-improvement 2-opt to local optimality.

    The gain threshold scales with the tour cost so float noise on large
    money values cannot masquerade as an improvement.
    """
    n = len(tour)
    total = sum(costs[tour[k]][tour[(k + 1) % n]] for k in range(n))
    tol = 1e-9 * max(1.0, abs(total))
    improved = True
    while improved:
        improved = False
        best_gain, best_move = tol, None
        for i in range(n - 1):
            a, b = tour[i], tour[i + 1]
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                c, d = tour[j], tour[(j + 1) % n]
                gain = costs[a][b] + costs[c][d] - costs[a][c] - costs[b][d]
                if gain > best_gain:
                    best_gain, best_move = gain, (i, j)
        if best_move is not None:
            i, j = best_move
            tour[i + 1:j + 1] = reversed(tour[i + 1:j + 1])
            improved = True
    return tour


def rebuild_tour(selected: Iterable[str], costs: EdgeCosts, start: str) -> tuple[str, ...]:
    """Cycle through the selected locations starting at ``start``.

    Exact for small selections, nearest-neighbor plus 2-opt beyond that.
    The orientation is normalized so repeated calls agree.
    """
    sel = set(selected)
    if start not in sel:
        raise ValueError("tour start must be among the selected locations")
    order = {loc_id: k for k, loc_id in enumerate(costs.ids)}
    nodes = [start] + sorted(sel - {start}, key=order.__getitem__)
    if len(nodes) <= 2:
        return tuple(nodes)
    idx = [order[i] for i in nodes]
    sub = costs.matrix[np.ix_(idx, idx)].tolist()
    if len(nodes) <= EXACT_TOUR_LIMIT:
        route = _held_karp(sub)
    else:
        route = _two_opt(_nearest_neighbor(sub), sub)
    tour = [nodes[k] for k in route]
    if order[tour[1]] > order[tour[-1]]:
        tour = [tour[0]] + tour[:0:-1]
    return tuple(tour)


def estimate_delta_cost(tour: tuple[str, ...], costs: EdgeCosts,
                        remove: Optional[str] = None,
                        insert: Optional[str] = None) -> float:
    """Tour-cost change estimate for removing and/or inserting one location.

    Removal shortcuts predecessor to successor; insertion takes the cheapest
    detour over the edges of the post-removal tour. Tours of one or two
    nodes are costed as out-and-back traversals.
    """
    if remove is None and insert is None:
        raise ValueError("nothing to estimate")
    work = list(tour)
    delta = 0.0
    if remove is not None:
        k = work.index(remove)
        if len(work) == 2:
            delta -= 2.0 * costs.cost(work[0], work[1])
            work = [work[1 - k]]
        else:
            pred, succ = work[k - 1], work[(k + 1) % len(work)]
            delta += costs.cost(pred, succ) - costs.cost(pred, remove) - costs.cost(remove, succ)
            work.pop(k)
    if insert is not None:
        if insert in work:
            raise ValueError(f"{insert!r} is already on the tour")
        if len(work) == 1:
            delta += 2.0 * costs.cost(work[0], insert)
        elif len(work) == 2:
            delta += (costs.cost(work[0], insert) + costs.cost(insert, work[1])
                      - costs.cost(work[0], work[1]))
        else:
            delta += min(
                costs.cost(work[k], insert) + costs.cost(insert, work[(k + 1) % len(work)])
                - costs.cost(work[k], work[(k + 1) % len(work)])
                for k in range(len(work))
            )
    return delta


# ---------------------------------------------------------------------------
# Covering tour construction


def ctp_construct(required: Iterable[str],
                  coverables: Sequence[tuple[str, frozenset[str]]],
                  costs: EdgeCosts, start: str) -> tuple[frozenset[str], tuple[str, ...]]:
    """Greedy covering tour: required locations plus enough others so every
    coverable population sees at least one selected member of its set.

    Locations are added by best newly-covered-per-insertion-cost ratio, then
    pruned (largest covering reach first) when nothing relies on them alone.
    """
    required = frozenset(required)
    if start not in required:
        raise ValueError("tour start must be required")
    for pop_id, members in coverables:
        if not members:
            raise Infeasible(
                f"population {pop_id!r} has no remaining coverage candidates",
                population_id=pop_id,
            )
    order = {loc_id: k for k, loc_id in enumerate(costs.ids)}
    selected = set(required)
    uncovered = {pop_id for pop_id, members in coverables if not members & selected}
    covers_of = {pop_id: members for pop_id, members in coverables}

    tour = list(rebuild_tour(required, costs, start))
    while uncovered:
        best = None
        for j in costs.ids:
            if j in selected:
                continue
            gain = sum(1 for w in uncovered if j in covers_of[w])
            if gain == 0:
                continue
            ins, pos = _cheapest_insertion(tour, costs, j)
            score = gain / max(ins, 1e-9)
            key = (-score, ins, j)
            if best is None or key < best[0]:
                best = (key, j, pos)
        if best is None:
            raise Infeasible("remaining populations cannot be covered")
        _, j, pos = best
        selected.add(j)
        tour.insert(pos, j)
        uncovered = {w for w in uncovered if j not in covers_of[w]}

    reach = {n: sum(1 for _, members in coverables if n in members)
             for n in selected - required}
    for n in sorted(reach, key=lambda n: (-reach[n], order[n])):
        rest = selected - {n}
        if all(members & rest for _, members in coverables):
            selected = rest
    return frozenset(selected), rebuild_tour(selected, costs, start)


def _cheapest_insertion(tour: list[str], costs: EdgeCosts, j: str) -> tuple[float, int]:
    """(cost delta, insertion index) of the cheapest slot for ``j``."""
    if len(tour) == 1:
        return 2.0 * costs.cost(tour[0], j), 1
    if len(tour) == 2:
        return (costs.cost(tour[0], j) + costs.cost(j, tour[1])
                - costs.cost(tour[0], tour[1])), 1
    best, pos = math.inf, 1
    for k in range(len(tour)):
        u, v = tour[k], tour[(k + 1) % len(tour)]
        delta = costs.cost(u, j) + costs.cost(j, v) - costs.cost(u, v)
        if delta < best:
            best, pos = delta, k + 1
    return best, pos


def initial_solution(inst: Instance) -> Solution:
    """Feasible solution at access bound 0.

    Coverage multiplicity 0 yields a tour over the required set alone; 1 a
    single covering tour; 2 or more builds up stage by stage, re-running the
    covering construction with everything already selected forced in and
    already-satisfied populations dropped.
    """
    chat = reformulated_costs(inst)
    selected = frozenset(inst.required_ids)
    if inst.q >= 1:
        coverables = [(p.id, p.covering_set) for p in inst.populations]
        selected, _ = ctp_construct(selected, coverables, chat, inst.start)
        for level in range(2, inst.q + 1):
            pending = [
                (p.id, p.covering_set - selected)
                for p in inst.populations
                if len(p.covering_set & selected) < level
            ]
            if pending:
                selected, _ = ctp_construct(selected, pending, chat, inst.start)
    tour = rebuild_tour(selected, chat, inst.start)
    return build_solution(inst, selected, tour)


# ---------------------------------------------------------------------------
# Swap neighborhood


class _SwapScanner:
    """Vectorized feasibility and scoring of the (remove, insert) moves."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.view = dense_view(inst)
        self.chat = reformulated_costs(inst)
        self.order = {loc_id: k for k, loc_id in enumerate(inst.ids)}
        self.required = inst.required_ids

    def _min_access(self, sums: np.ndarray) -> np.ndarray:
        v = self.view
        if len(v.pop_ids) == 0:
            return np.ones(sums.shape[1])
        acc = (v.v1[:, None] + sums) / (v.v0[:, None] + v.v1[:, None] + sums)
        return acc.min(axis=0)

    def scan(self, selected: frozenset[str], tour: tuple[str, ...],
             r: float, q: int) -> list[SwapCandidate]:
        inst, view, chat = self.inst, self.view, self.chat
        ids = inst.ids
        col = self.order
        sel_mask = np.array([i in selected for i in ids])
        removables = [i for i in ids if i in selected and i not in self.required]
        insertables = [j for j in ids if j not in selected]

        w = len(view.pop_ids)
        base_sum = view.a @ sel_mask.astype(float) if w else np.zeros(0)
        counts = view.covers @ sel_mask.astype(int) if w else np.zeros(0, dtype=int)
        if w:
            base_min = float(np.min(
                (view.v1 + base_sum) / (view.v0 + view.v1 + base_sum)))
        else:
            base_min = 1.0

        ins_idx = np.array([col[j] for j in insertables], dtype=int)
        n_ins = len(insertables)
        # Insertion detour costs over the incumbent tour's edges.
        L = len(tour)
        cmat = chat.matrix
        tour_idx = [col[t] for t in tour]
        if L >= 3:
            us = np.array(tour_idx)
            vs = np.array(tour_idx[1:] + tour_idx[:1])
            detour = (cmat[np.ix_(ins_idx, us)] + cmat[np.ix_(ins_idx, vs)]
                      - cmat[us, vs][None, :]) if n_ins else np.zeros((0, L))
        elif L == 2 and n_ins:
            detour = (cmat[np.ix_(ins_idx, [tour_idx[0]])]
                      + cmat[np.ix_(ins_idx, [tour_idx[1]])]
                      - cmat[tour_idx[0], tour_idx[1]])
        elif L == 1 and n_ins:
            detour = 2.0 * cmat[np.ix_(ins_idx, [tour_idx[0]])]
        else:
            detour = np.zeros((n_ins, 0))

        candidates: list[SwapCandidate] = []
        for rm in removables + [None]:
            if rm is None:
                sums = base_sum
                cnts = counts
                rm_cost = 0.0
                ins_cost = detour.min(axis=1) if detour.size else np.full(n_ins, 0.0)
                if n_ins and not detour.size:
                    ins_cost = np.zeros(n_ins)
            else:
                k = col[rm]
                sums = base_sum - view.a[:, k] if w else base_sum
                cnts = counts - view.covers[:, k].astype(int) if w else counts
                pos = tour.index(rm)
                if L == 2:
                    rm_cost = -2.0 * cmat[tour_idx[0], tour_idx[1]]
                    other = tour_idx[1 - pos]
                    ins_cost = 2.0 * cmat[ins_idx, other] if n_ins else np.zeros(0)
                else:
                    pred = tour_idx[pos - 1]
                    succ = tour_idx[(pos + 1) % L]
                    rm_cost = float(cmat[pred, succ] - cmat[pred, col[rm]]
                                    - cmat[col[rm], succ])
                    if n_ins:
                        keep = [e for e in range(L) if tour[e] != rm and tour[(e + 1) % L] != rm]
                        if L == 3:
                            # Post-removal tour is a 2-node out-and-back.
                            ins_cost = (cmat[ins_idx, pred] + cmat[ins_idx, succ]
                                        - cmat[pred, succ])
                        else:
                            new_edge = (cmat[ins_idx, pred] + cmat[ins_idx, succ]
                                        - cmat[pred, succ])
                            ins_cost = np.minimum(detour[:, keep].min(axis=1), new_edge)
                    else:
                        ins_cost = np.zeros(0)

            # Insert-location candidates, then the pure-removal candidate.
            if n_ins and w:
                mat = sums[:, None] + view.a[:, ins_idx]
                mins = self._min_access(mat)
                cov_ok = ((cnts[:, None] + view.covers[:, ins_idx].astype(int)) >= q).all(axis=0)
            elif n_ins:
                mins = np.ones(n_ins)
                cov_ok = np.ones(n_ins, dtype=bool)
            for jj, ins in enumerate(insertables):
                if not n_ins:
                    break
                if not cov_ok[jj] or mins[jj] < r - _BOUND_SLACK:
                    continue
                d_cost = rm_cost + float(ins_cost[jj])
                d_acc = float(mins[jj]) - base_min
                if d_cost > 0 and d_acc < 0:
                    continue
                if d_cost == 0.0 and d_acc == 0.0:
                    continue
                candidates.append(SwapCandidate(rm, ins, d_cost, d_acc,
                                                angle(d_acc, d_cost)))
            if rm is not None:
                if w:
                    if not (cnts >= q).all():
                        continue
                    m = float(np.min((view.v1 + sums) / (view.v0 + view.v1 + sums)))
                else:
                    m = 1.0
                if m < r - _BOUND_SLACK:
                    continue
                d_acc = m - base_min
                if rm_cost > 0 and d_acc < 0:
                    continue
                if rm_cost == 0.0 and d_acc == 0.0:
                    continue
                candidates.append(SwapCandidate(rm, None, rm_cost, d_acc,
                                                angle(d_acc, rm_cost)))
        return candidates


def feasible_swaps(inst: Instance, current: Iterable[str], r: float, q: int,
                   tour: Optional[tuple[str, ...]] = None) -> list[SwapCandidate]:
    """All feasible moves from the current selection at access bound ``r``.

    A move is feasible when the post-move selection keeps every population
    covered at least ``q`` times and its worst access score at or above
    ``r``; moves that both raise cost and lower access are dropped.
    """
    selected = frozenset(current)
    scanner = _SwapScanner(inst)
    if tour is None:
        tour = rebuild_tour(selected, scanner.chat, inst.start)
    return scanner.scan(selected, tour, r, q)


# ---------------------------------------------------------------------------
# Frontier loop


def nondominated(entries: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Filter (cost, access) pairs to the mutually non-dominated subset.

    A pair survives unless another has cost no higher and access no lower
    with at least one strict; exact duplicates collapse to one.
    """
    seen: list[tuple[float, float]] = []
    for e in entries:
        if e not in seen:
            seen.append(e)
    kept = []
    for cost, access in seen:
        dominated = any(
            oc <= cost and oa >= access and (oc < cost or oa > access)
            for oc, oa in seen
        )
        if not dominated:
            kept.append((cost, access))
    return kept


def _canonical(tour: tuple[str, ...]) -> tuple[str, ...]:
    """Rotation- and reflection-normalized form (start kept first)."""
    if len(tour) <= 2:
        return tour
    reverse = (tour[0],) + tuple(reversed(tour[1:]))
    return min(tour, reverse)


def _sort_key(value: Optional[str]) -> str:
    return "" if value is None else value


def frontier(inst: Instance, epsilon: Optional[float] = None) -> Frontier:
    """Approximate the cost/access Pareto frontier of an instance.

    Runs the swap local search from the covering-tour initial solution,
    ratcheting the access bound until every location is selected, and
    returns the non-dominated iterates tagged with the bound each satisfied.
    """
    diags = validate_instance(inst)
    if diags:
        raise ValueError("invalid instance: " + "; ".join(diags))
    if epsilon is None:
        epsilon = epsilon_default(inst) if inst.populations else 1.0
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    scanner = _SwapScanner(inst)
    sol = initial_solution(inst)
    selected = sol.selected
    tour = sol.tour
    all_ids = frozenset(inst.ids)

    history: list[tuple[Solution, float]] = [(sol, 0.0)]
    seen_tours = {_canonical(tour)}
    tour_cache: dict[frozenset[str], tuple[str, ...]] = {selected: tour}
    r = 0.0
    max_iters = 200 + _MAX_STALL_FACTOR * len(inst.ids)

    for _ in range(max_iters):
        if selected == all_ids:
            break
        candidates = scanner.scan(selected, tour, r, inst.q)
        assert candidates, (
            f"no feasible swap at bound {r}; the step size guarantee failed")
        best = min(candidates,
                   key=lambda c: (c.angle, c.delta_cost,
                                  _sort_key(c.remove), _sort_key(c.insert)))
        selected = frozenset(
            (selected - {best.remove}) | ({best.insert} if best.insert else set()))
        tour = tour_cache.get(selected)
        if tour is None:
            tour = rebuild_tour(selected, scanner.chat, inst.start)
            tour_cache[selected] = tour
        sol = build_solution(inst, selected, tour)
        history.append((sol, r))

        # Feasibility chain: the new incumbent must satisfy the bound it was
        # produced under.
        assert sol.min_access >= r - 1e-9
        assert all(len(p.covering_set & selected) >= inst.q for p in inst.populations)

        key = _canonical(tour)
        if key in seen_tours:
            r = sol.min_access
        else:
            r = min(sol.min_access, r + epsilon)
            seen_tours.add(key)

    frontier_pairs = set(nondominated(
        [(s.total_cost, s.min_access) for s, _ in history]))
    picked: dict[tuple[float, float], tuple[Solution, float]] = {}
    for s, bound in history:
        pair = (s.total_cost, s.min_access)
        if pair in frontier_pairs and pair not in picked:
            picked[pair] = (s, bound)
    entries = [FrontierEntry(solution=s, r_satisfied=bound)
               for s, bound in picked.values()]
    entries.sort(key=lambda e: (e.solution.min_access, e.solution.total_cost))
    return Frontier(tuple(entries))
