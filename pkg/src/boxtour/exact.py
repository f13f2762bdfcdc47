"""Exact solution of the drop box location problem.

Encodes an instance as a binary program (tour edge variables plus selection
variables), separates violated tour-connectivity rows lazily from integral
candidates, and drives the branch-and-bound engine. Selections of one or two
boxes fall outside the tour formulation and are enumerated directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from . import bip
from .model import (
    ACCESS_TOL,
    MONEY_TOL,
    Infeasible,
    Instance,
    Solution,
    SolveOptions,
    access_value,
    build_solution,
    dominance_filter,
    quantize,
    reformulated_costs,
    tour_cost,
    validate_instance,
)
from .heuristic import rebuild_tour


@dataclass(frozen=True)
class Subtour:
    """One cycle of an integral edge assignment (always three or more
    locations; the degree rows forbid shorter cycles)."""

    nodes: frozenset[str]


@dataclass(frozen=True)
class DblpEncoding:
    """Variable layout of the integer program for one instance.

    Edge variables come first (unordered pairs in location order), then one
    selection variable per location, then one coverage indicator per
    population when maximizing coverage.
    """

    instance: Instance
    options: SolveOptions
    edges: tuple[tuple[str, str], ...]
    x_index: Mapping[tuple[str, str], int]
    y_index: Mapping[str, int]
    delta_index: Mapping[str, int]
    access_exempt: frozenset[str]
    num_vars: int

    def decode(self, assignment: tuple[int, ...]) -> tuple[frozenset[tuple[str, str]], frozenset[str]]:
        """Used edges and selected locations of an integral assignment."""
        used = frozenset(e for e in self.edges if assignment[self.x_index[e]] == 1)
        selected = frozenset(
            j for j in self.instance.ids if assignment[self.y_index[j]] == 1
        )
        return used, selected

    def assignment_for(self, selected: Iterable[str], tour: tuple[str, ...]) -> tuple[int, ...]:
        """Full variable assignment describing a selection with its tour."""
        values = [0] * self.num_vars
        sel = frozenset(selected)
        for j in sel:
            values[self.y_index[j]] = 1
        if len(tour) >= 3:
            for k in range(len(tour)):
                values[self.x_index[(tour[k], tour[(k + 1) % len(tour)])]] = 1
        for pop_id, idx in self.delta_index.items():
            pop = next(p for p in self.instance.populations if p.id == pop_id)
            covered = len(pop.covering_set & sel)
            values[idx] = 1 if covered >= self.instance.q or self.instance.q == 0 else 0
        return tuple(values)


def _coverage_requirement(inst: Instance, options: SolveOptions) -> int:
    """Multiplicity enforced through the covering rows."""
    return inst.q if options.objective_mode == "min_cost" else options.base_coverage


def encode(inst: Instance, options: SolveOptions,
           access_exempt: frozenset[str] = frozenset()) -> tuple[DblpEncoding, bip.BinaryProgram]:
    """Build the integer program whose feasible integral points (under the
    lazy separator) are exactly the feasible selections with three or more
    boxes.

    ``access_exempt`` lists populations whose access rows are provably
    implied and therefore omitted; their covering rows are always kept.
    Raises Infeasible up front when even the full selection cannot reach the
    access bound for some population.
    """
    ids = inst.ids
    edges = tuple((ids[i], ids[j]) for i in range(len(ids)) for j in range(i + 1, len(ids)))
    x_index: dict[tuple[str, str], int] = {}
    for k, (i, j) in enumerate(edges):
        x_index[(i, j)] = k
        x_index[(j, i)] = k
    y_index = {loc_id: len(edges) + k for k, loc_id in enumerate(ids)}
    delta_index: dict[str, int] = {}
    if options.objective_mode == "max_coverage":
        base = len(edges) + len(ids)
        delta_index = {pop.id: base + k for k, pop in enumerate(inst.populations)}
    num_vars = len(edges) + len(ids) + len(delta_index)

    cov_q = _coverage_requirement(inst, options)
    for pop in inst.populations:
        if len(pop.covering_set) < cov_q:
            raise Infeasible(
                f"population {pop.id!r} has covering set smaller than the "
                f"required multiplicity {cov_q}",
                population_id=pop.id,
            )
        if pop.id not in access_exempt and access_value(pop, ids) < options.r - 1e-12:
            raise Infeasible(
                f"population {pop.id!r} cannot reach access {options.r} even "
                "with every box selected",
                population_id=pop.id,
            )

    cost = inst.edge_costs
    fixed = inst.fixed_costs
    objective = np.zeros(num_vars)
    if options.objective_mode == "min_cost":
        for e, k in ((e, x_index[e]) for e in edges):
            objective[k] = cost.cost(*e)
        for j, k in y_index.items():
            objective[k] = fixed[j]
    else:
        for pop in inst.populations:
            objective[delta_index[pop.id]] = -pop.weight

    rows: list[bip.LinearRow] = []
    # Tour degree: every selected location is entered and left exactly once.
    for j in ids:
        incident = sorted(x_index[(i, j)] for i in ids if i != j)
        rows.append(bip.LinearRow(
            indices=tuple(incident) + (y_index[j],),
            coeffs=(1.0,) * len(incident) + (-2.0,),
            sense="==", rhs=0.0,
        ))
    for t in ids:
        if t in inst.required_ids:
            rows.append(bip.LinearRow((y_index[t],), (1.0,), "==", 1.0))
    if cov_q > 0:
        for pop in inst.populations:
            members = sorted(y_index[j] for j in pop.covering_set)
            rows.append(bip.LinearRow(
                tuple(members), (1.0,) * len(members), ">=", float(cov_q)))
    if options.r > 0:
        for pop in inst.populations:
            if pop.id in access_exempt:
                continue
            v0, v1 = pop.access.v0, pop.access.v1
            rhs = options.r * (v0 + v1) - v1
            if rhs <= 0:
                continue  # already satisfied by the empty selection
            indices = tuple(y_index[j] for j in ids)
            coeffs = tuple(pop.access.a[j] * (1.0 - options.r) for j in ids)
            rows.append(bip.LinearRow(indices, coeffs, ">=", rhs))
    if options.objective_mode == "max_coverage" and inst.q > 0:
        for pop in inst.populations:
            members = sorted(y_index[j] for j in pop.covering_set)
            rows.append(bip.LinearRow(
                tuple(members) + (delta_index[pop.id],),
                (1.0,) * len(members) + (-float(inst.q),),
                ">=", 0.0,
            ))
    if options.budget is not None:
        idx_coef = [(x_index[e], cost.cost(*e)) for e in edges if cost.cost(*e) != 0.0]
        idx_coef += [(y_index[j], fixed[j]) for j in ids if fixed[j] != 0.0]
        idx_coef.sort()
        if idx_coef:
            rows.append(bip.LinearRow(
                tuple(i for i, _ in idx_coef), tuple(c for _, c in idx_coef),
                "<=", float(options.budget)))
        elif options.budget < 0:
            raise Infeasible("negative budget with zero-cost instance")
    if options.tour_cost_cap is not None:
        idx_coef = sorted(
            (x_index[e], cost.cost(*e)) for e in edges if cost.cost(*e) != 0.0)
        if idx_coef:
            rows.append(bip.LinearRow(
                tuple(i for i, _ in idx_coef), tuple(c for _, c in idx_coef),
                "<=", float(options.tour_cost_cap)))
    if options.fixed_count is not None:
        rows.append(bip.LinearRow(
            tuple(sorted(y_index.values())), (1.0,) * len(ids),
            "==", float(options.fixed_count)))

    enc = DblpEncoding(
        instance=inst, options=options, edges=edges, x_index=x_index,
        y_index=y_index, delta_index=delta_index,
        access_exempt=frozenset(access_exempt), num_vars=num_vars,
    )

    def separator(assignment: tuple[int, ...]):
        used, selected = enc.decode(assignment)
        return separate_subtours(enc, used, selected)

    # Selections drive the structure; branching them first keeps the tree
    # shallow and leaves the tour edges to the LP plus lazy cuts.
    priority = [1] * len(edges) + [0] * len(ids) + [0] * len(delta_index)
    program = bip.BinaryProgram(
        num_vars=num_vars, objective=objective, rows=rows,
        lazy_separator=separator, branch_priority=priority,
    )
    return enc, program


def _cycles(inst: Instance, used: Iterable[tuple[str, str]],
            selected: frozenset[str]) -> list[list[str]]:
    """Vertex-disjoint cycles of a degree-feasible edge assignment, ordered
    by their smallest member in instance order."""
    order = {loc_id: k for k, loc_id in enumerate(inst.ids)}
    adjacency: dict[str, list[str]] = {j: [] for j in selected}
    for i, j in used:
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen: set[str] = set()
    cycles = []
    for start in sorted(selected, key=order.__getitem__):
        if start in seen:
            continue
        cycle = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [n for n in adjacency[cur] if n != prev]
            step = min(nxt, key=order.__getitem__) if prev is None else nxt[0]
            if step == start:
                break
            cycle.append(step)
            seen.add(step)
            prev, cur = cur, step
        cycles.append(cycle)
    return cycles


def subtours(inst: Instance, used: Iterable[tuple[str, str]],
             selected: Iterable[str]) -> list[Subtour]:
    """The vertex-disjoint cycles of a degree-feasible assignment, ordered
    by their smallest member in instance order."""
    return [Subtour(nodes=frozenset(cycle))
            for cycle in _cycles(inst, used, frozenset(selected))]


def separate_subtours(enc: DblpEncoding, used: Iterable[tuple[str, str]],
                      selected: Iterable[str]) -> list[bip.LinearRow]:
    """Violated tour-connectivity rows for an integral candidate.

    Empty exactly when the candidate's edges form one cycle containing every
    required location. Otherwise returns, for the first cycle that misses
    part of the required set, one cut per location on that cycle requiring
    two crossing edges whenever that location is selected.
    """
    inst = enc.instance
    selected = frozenset(selected)
    cycles = _cycles(inst, used, selected)
    required = inst.required_ids
    for cycle in cycles:
        members = frozenset(cycle)
        if not (required - members):
            continue
        outside = [j for j in inst.ids if j not in members]
        crossing = sorted(
            enc.x_index[(i, j)] for i in members for j in outside)
        order = {loc_id: k for k, loc_id in enumerate(inst.ids)}
        rows = []
        for t in sorted(members, key=order.__getitem__):
            indices = tuple(crossing) + (enc.y_index[t],)
            coeffs = (1.0,) * len(crossing) + (-2.0,)
            rows.append(bip.LinearRow(indices, coeffs, ">=", 0.0))
        return rows
    return []


def _tour_from_edges(inst: Instance, used: frozenset[tuple[str, str]],
                     selected: frozenset[str]) -> tuple[str, ...]:
    """Orient the single cycle of an accepted assignment, starting at s and
    moving toward the lower-indexed neighbor first."""
    cycles = _cycles(inst, used, selected)
    if len(cycles) != 1 or frozenset(cycles[0]) != selected:
        raise AssertionError("accepted assignment does not form a single tour")
    cycle = cycles[0]
    at = cycle.index(inst.start)
    return tuple(cycle[at:] + cycle[:at])


def _caps_ok(inst: Instance, options: SolveOptions, selected: frozenset[str],
             tour: tuple[str, ...]) -> bool:
    operational = tour_cost(tour, inst.edge_costs)
    fixed = sum(inst.fixed_costs[j] for j in selected)
    if options.budget is not None and fixed + operational > options.budget + MONEY_TOL:
        return False
    if options.tour_cost_cap is not None and operational > options.tour_cost_cap + MONEY_TOL:
        return False
    if options.fixed_count is not None and len(selected) != options.fixed_count:
        return False
    return True


def _selection_objective(inst: Instance, options: SolveOptions,
                         selected: frozenset[str], tour: tuple[str, ...]) -> float:
    if options.objective_mode == "min_cost":
        return (sum(inst.fixed_costs[j] for j in selected)
                + tour_cost(tour, inst.edge_costs))
    covered = sum(
        pop.weight for pop in inst.populations
        if inst.q == 0 or len(pop.covering_set & selected) >= inst.q
    )
    return -covered


def _small_selections(inst: Instance, options: SolveOptions):
    """Feasible selections of at most two boxes, with their trivial tours."""
    required = inst.required_ids
    if len(required) > 2:
        return
    cov_q = _coverage_requirement(inst, options)
    candidates = []
    base = frozenset(required)
    if len(base) in (1, 2):
        candidates.append(base)
    if len(base) == 1:
        for j in inst.ids:
            if j not in base:
                candidates.append(base | {j})
    for selected in candidates:
        ok = True
        for pop in inst.populations:
            if len(pop.covering_set & selected) < cov_q:
                ok = False
                break
            if access_value(pop, selected) < options.r - ACCESS_TOL:
                ok = False
                break
        if not ok:
            continue
        others = sorted(selected - {inst.start})
        tour = (inst.start,) + tuple(others)
        if _caps_ok(inst, options, selected, tour):
            yield selected, tour


def solve_exact(inst: Instance, options: SolveOptions,
                warm: Optional[Solution] = None) -> Solution:
    """Optimal drop box selection and collection tour for the given options.

    Selections of three or more boxes are solved through the lazily
    separated integer program; one- and two-box selections are enumerated
    directly and the overall best is returned. Raises Infeasible when no
    selection satisfies the constraints.

    ``warm`` optionally primes the search with a known feasible solution
    (it only tightens the upper bound; optimality is unaffected, and an
    infeasible warm solution is simply ignored).
    """
    diags = validate_instance(inst)
    if diags:
        raise ValueError("invalid instance: " + "; ".join(diags))

    exempt = dominance_filter(inst) if options.dominance_filter else frozenset()
    enc, program = encode(inst, options, access_exempt=exempt)

    best: Optional[tuple[float, frozenset[str], tuple[str, ...]]] = None
    for selected, tour in _small_selections(inst, options):
        value = _selection_objective(inst, options, selected, tour)
        if best is None or value < best[0] - bip.PRUNE_TOL:
            best = (value, selected, tour)

    ip_solution = None
    if len(inst.ids) >= 3:
        if warm is not None and len(warm.selected) >= 3:
            incumbent = enc.assignment_for(warm.selected, warm.tour)
        else:
            full = frozenset(inst.ids)
            full_tour = rebuild_tour(full, reformulated_costs(inst), inst.start)
            incumbent = enc.assignment_for(full, full_tour)
        result = bip.solve(program, initial_incumbent=incumbent)
        if result.status == "optimal":
            used, selected = enc.decode(result.assignment)
            tour = _tour_from_edges(inst, used, selected)
            ip_solution = (result.objective_value, selected, tour)

    if ip_solution is not None and (best is None or ip_solution[0] < best[0] - bip.PRUNE_TOL):
        best = ip_solution
    if best is None:
        raise Infeasible(
            "no feasible selection under the given options",
            population_id=_first_binding_population(inst, options),
        )
    _, selected, tour = best
    return build_solution(inst, selected, tour)


def solve_exact_sweep(inst: Instance, bounds: list[float],
                      base_options: Optional[SolveOptions] = None,
                      warm_by_bound: Optional[Mapping[float, Solution]] = None,
                      ) -> list[tuple[float, Solution]]:
    """Optimal solutions at each access bound, reusing plateau optima.

    The feasible sets are nested in the bound, so an optimum found at bound
    r stays optimal (certified, not approximated) for every bound up to its
    own minimum access score; only bounds beyond that trigger a fresh solve.
    Returns (bound, solution) pairs in ascending bound order.
    """
    import dataclasses

    base = base_options or SolveOptions(dominance_filter=True)
    warm_by_bound = warm_by_bound or {}
    out: list[tuple[float, Solution]] = []
    current: Optional[Solution] = None
    for bound in sorted(bounds):
        if current is None or current.min_access < bound - 1e-12:
            options = dataclasses.replace(base, r=bound)
            current = solve_exact(inst, options, warm=warm_by_bound.get(bound))
        out.append((bound, current))
    return out


def _first_binding_population(inst: Instance, options: SolveOptions) -> Optional[str]:
    for pop in inst.populations:
        if access_value(pop, inst.ids) < options.r - 1e-12:
            return pop.id
        if len(pop.covering_set) < _coverage_requirement(inst, options):
            return pop.id
    return None


def validate_solution(inst: Instance, options: SolveOptions, sol: Solution) -> list[str]:
    """Diagnostics for a claimed solution (empty = valid)."""
    diags: list[str] = []
    missing_required = inst.required_ids - sol.selected
    if missing_required:
        diags.append(f"required locations not selected: {sorted(missing_required)}")
    if len(set(sol.tour)) != len(sol.tour):
        diags.append("tour repeats a location")
    if set(sol.tour) != set(sol.selected):
        diags.append("tour does not visit exactly the selected locations "
                     "(selection is not connected by one cycle)")
    if sol.tour and sol.tour[0] != inst.start:
        diags.append(f"tour does not start at {inst.start!r}")

    cov_q = _coverage_requirement(inst, options)
    for pop in inst.populations:
        if len(pop.covering_set & sol.selected) < cov_q:
            diags.append(f"population {pop.id!r} covered fewer than {cov_q} times")
        value = access_value(pop, sol.selected)
        if value < options.r - ACCESS_TOL:
            diags.append(
                f"population {pop.id!r} access {value:.6f} below bound {options.r}")
        recorded = sol.access_by_population.get(pop.id)
        if recorded is None or abs(recorded - value) > 1e-9:
            diags.append(f"recorded access for population {pop.id!r} is inconsistent")

    fixed = quantize(sum(inst.fixed_costs[j] for j in sol.selected))
    operational = quantize(tour_cost(sol.tour, inst.edge_costs))
    if abs(sol.fixed_cost - fixed) > MONEY_TOL:
        diags.append(f"fixed cost {sol.fixed_cost} does not match instance ({fixed})")
    if abs(sol.operational_cost - operational) > MONEY_TOL:
        diags.append(
            f"operational cost {sol.operational_cost} does not match tour ({operational})")
    if abs(sol.total_cost - (sol.fixed_cost + sol.operational_cost)) > MONEY_TOL:
        diags.append("total cost does not decompose into fixed plus operational")

    if options.budget is not None and sol.total_cost > options.budget + MONEY_TOL:
        diags.append(f"total cost exceeds budget {options.budget}")
    if options.tour_cost_cap is not None and sol.operational_cost > options.tour_cost_cap + MONEY_TOL:
        diags.append(f"tour cost exceeds cap {options.tour_cost_cap}")
    if options.fixed_count is not None and len(sol.selected) != options.fixed_count:
        diags.append(
            f"selected {len(sol.selected)} boxes, required exactly {options.fixed_count}")
    return diags
