"""Core domain types for drop box siting: instances, solutions, the access
function, reformulated edge costs, the constraint-dominance filter, and the
cost-model helpers used to build operational and fixed costs.

All types are immutable; every operation is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

# Money is stored as floats quantized to 1e-4; comparisons use 1e-6 absolute.
MONEY_DECIMALS = 4
MONEY_TOL = 1e-6
ACCESS_TOL = 1e-9


def quantize(amount: float) -> float:
    """Snap a money amount to the internal 1e-4 precision."""
    return round(float(amount), MONEY_DECIMALS)


class Infeasible(Exception):
    """Raised when a problem admits no solution under the given options.

    ``population_id`` names the binding population when one exists (an access
    bound that cannot be reached, or a covering set smaller than the required
    multiplicity); it is None for cap-driven infeasibility (budget etc.).
    """

    def __init__(self, message: str, population_id: Optional[str] = None):
        super().__init__(message)
        self.population_id = population_id


@dataclass(frozen=True)
class Location:
    id: str
    fixed_cost: float
    required: bool = False
    coords: Optional[tuple[float, float]] = None


@dataclass(frozen=True, eq=False)
class EdgeCosts:
    """Symmetric travel costs between location pairs, id-addressable.

    The diagonal is unused (there are no self-edges). ``matrix`` follows the
    order of ``ids``.
    """

    ids: tuple[str, ...]
    matrix: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.ids), len(self.ids)):
            raise ValueError("edge cost matrix shape does not match ids")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_index", {i: k for k, i in enumerate(self.ids)})

    def __eq__(self, other):
        return (isinstance(other, EdgeCosts) and self.ids == other.ids
                and np.array_equal(self.matrix, other.matrix))

    def cost(self, i: str, j: str) -> float:
        return float(self.matrix[self._index[i], self._index[j]])

    def asymmetries(self) -> list[tuple[str, str]]:
        """Unordered pairs whose two stored directions disagree."""
        bad = []
        n = len(self.ids)
        for i in range(n):
            for j in range(i + 1, n):
                if self.matrix[i, j] != self.matrix[j, i]:
                    bad.append((self.ids[i], self.ids[j]))
        return bad


@dataclass(frozen=True)
class AccessParams:
    """Per-population parameters of the access score.

    ``v0`` is the propensity not to vote, ``v1`` the accessibility of voting
    pathways other than drop boxes, and ``a`` maps each candidate location to
    the access a box there would provide. The score is invariant under a
    common positive rescaling of all three, so 0-1 and 0-100 conventions can
    coexist across populations.
    """

    v0: float
    v1: float
    a: Mapping[str, float]


@dataclass(frozen=True)
class VoterPopulation:
    id: str
    covering_set: frozenset[str]
    access: AccessParams
    weight: float = 0.0


@dataclass(frozen=True)
class Instance:
    """A complete siting problem: candidate locations, the required set,
    travel costs, and the voter populations with their coverage and access
    parameters. ``q`` is the coverage multiplicity each population must get.
    """

    locations: tuple[Location, ...]
    start: str
    edge_costs: EdgeCosts
    populations: tuple[VoterPopulation, ...]
    q: int = 0

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(loc.id for loc in self.locations)

    @property
    def required_ids(self) -> frozenset[str]:
        return frozenset(loc.id for loc in self.locations if loc.required)

    def location(self, loc_id: str) -> Location:
        for loc in self.locations:
            if loc.id == loc_id:
                return loc
        raise KeyError(loc_id)

    @property
    def fixed_costs(self) -> dict[str, float]:
        return {loc.id: loc.fixed_cost for loc in self.locations}


@dataclass(frozen=True)
class SolveOptions:
    """Knobs for the exact solver.

    ``r`` is the minimum access bound in [0, 1); ``objective_mode`` selects
    between cost minimization and coverage maximization. ``base_coverage``
    is the residual multiplicity enforced through the covering rows when
    maximizing coverage (it is ignored in cost mode, where the instance's
    ``q`` applies). ``budget``, ``tour_cost_cap`` and ``fixed_count`` add the
    optional side constraints; ``dominance_filter`` drops access rows proven
    redundant before solving.
    """

    r: float = 0.0
    objective_mode: str = "min_cost"
    budget: Optional[float] = None
    tour_cost_cap: Optional[float] = None
    fixed_count: Optional[int] = None
    dominance_filter: bool = False
    base_coverage: int = 0

    def __post_init__(self):
        if not 0.0 <= self.r < 1.0:
            raise ValueError("r must lie in [0, 1)")
        if self.objective_mode not in ("min_cost", "max_coverage"):
            raise ValueError(f"unknown objective_mode {self.objective_mode!r}")


@dataclass(frozen=True)
class Solution:
    """A selected location set with its collection tour and cost breakdown.

    ``tour`` is a cyclic sequence starting at the tour origin; the closing
    edge back to the first element is implied. ``min_access`` is 1.0 when
    there are no populations.
    """

    selected: frozenset[str]
    tour: tuple[str, ...]
    total_cost: float
    fixed_cost: float
    operational_cost: float
    min_access: float
    access_by_population: Mapping[str, float]


# ---------------------------------------------------------------------------
# Access function


def access_value(pop: VoterPopulation, selected: Iterable[str]) -> float:
    """Access score of ``pop`` given the selected locations.

    Equals (v1 + sum of a over selected) / (v0 + v1 + same sum); strictly
    inside (0, 1) and strictly increasing in every added location with a
    positive ``a`` value.
    """
    total = 0.0
    for loc_id in selected:
        try:
            total += pop.access.a[loc_id]
        except KeyError:
            raise KeyError(
                f"population {pop.id!r} has no access parameter for location {loc_id!r}"
            ) from None
    v0, v1 = pop.access.v0, pop.access.v1
    return (v1 + total) / (v0 + v1 + total)


def min_access(inst: Instance, selected: Iterable[str]) -> float:
    """Smallest access score across populations; 1.0 when there are none."""
    sel = tuple(selected)
    if not inst.populations:
        return 1.0
    return min(access_value(pop, sel) for pop in inst.populations)


# ---------------------------------------------------------------------------
# Validation


def validate_instance(inst: Instance) -> list[str]:
    """Return one diagnostic per violated structural invariant (empty = valid)."""
    diags: list[str] = []
    ids = [loc.id for loc in inst.locations]
    id_set = set(ids)
    if len(ids) != len(id_set):
        seen, dups = set(), set()
        for i in ids:
            (dups if i in seen else seen).add(i)
        diags.append(f"duplicate location ids: {sorted(dups)}")
    if inst.q < 0:
        diags.append(f"q must be nonnegative, got {inst.q}")
    for loc in inst.locations:
        if loc.fixed_cost < 0:
            diags.append(f"location {loc.id!r} has negative fixed cost {loc.fixed_cost}")
    if inst.start not in id_set:
        diags.append(f"start {inst.start!r} is not a location")
    elif not any(loc.id == inst.start and loc.required for loc in inst.locations):
        diags.append(f"start {inst.start!r} is not marked required")

    if tuple(inst.edge_costs.ids) != tuple(ids):
        diags.append("edge cost ids do not match instance locations")
    else:
        for i, j in inst.edge_costs.asymmetries():
            diags.append(f"asymmetric edge cost between {i!r} and {j!r}")
        n = len(ids)
        m = inst.edge_costs.matrix
        for k in range(n):
            for l in range(k + 1, n):
                if m[k, l] < 0:
                    diags.append(f"negative edge cost between {ids[k]!r} and {ids[l]!r}")

    pop_ids = [pop.id for pop in inst.populations]
    if len(pop_ids) != len(set(pop_ids)):
        diags.append("duplicate population ids")
    for pop in inst.populations:
        unknown = pop.covering_set - id_set
        if unknown:
            diags.append(f"population {pop.id!r} covering set has unknown ids {sorted(unknown)}")
        if len(pop.covering_set) < inst.q:
            diags.append(
                f"population {pop.id!r} has covering set of size "
                f"{len(pop.covering_set)} < q={inst.q}"
            )
        if pop.access.v0 <= 0:
            diags.append(f"population {pop.id!r} has non-positive v0")
        if pop.access.v1 <= 0:
            diags.append(f"population {pop.id!r} has non-positive v1")
        missing = id_set - set(pop.access.a)
        if missing:
            diags.append(f"population {pop.id!r} missing access values for {sorted(missing)}")
        for loc_id, val in pop.access.a.items():
            if loc_id not in id_set:
                diags.append(f"population {pop.id!r} has access value for unknown id {loc_id!r}")
            elif val <= 0:
                diags.append(f"population {pop.id!r} has non-positive access value at {loc_id!r}")
        if pop.weight < 0:
            diags.append(f"population {pop.id!r} has negative weight")
    return diags


# ---------------------------------------------------------------------------
# Objective reformulation and related helpers


def reformulated_costs(inst: Instance) -> EdgeCosts:
    """Edge costs absorbing half the fixed cost of each endpoint.

    For any cycle that visits each of its locations exactly once, the cycle
    cost under the result equals the cycle cost under the original costs plus
    the sum of fixed costs of the visited locations.
    """
    f = np.array([loc.fixed_cost for loc in inst.locations], dtype=float)
    m = inst.edge_costs.matrix + 0.5 * (f[:, None] + f[None, :])
    np.fill_diagonal(m, 0.0)
    return EdgeCosts(inst.ids, m)


def tour_cost(tour: tuple[str, ...], costs: EdgeCosts) -> float:
    """Cost of a cyclic tour: 0 for a single node, twice the edge for two
    nodes (out and back), otherwise the sum over consecutive edges including
    the closing edge."""
    if len(tour) <= 1:
        return 0.0
    if len(tour) == 2:
        return 2.0 * costs.cost(tour[0], tour[1])
    total = 0.0
    for k in range(len(tour)):
        total += costs.cost(tour[k], tour[(k + 1) % len(tour)])
    return total


def build_solution(inst: Instance, selected: Iterable[str], tour: tuple[str, ...]) -> Solution:
    """Assemble a Solution with its cost decomposition and access map."""
    sel = frozenset(selected)
    if set(tour) != sel:
        raise ValueError("tour must visit exactly the selected locations")
    if tour and tour[0] != inst.start:
        raise ValueError("tour must start at the instance start location")
    fixed = quantize(sum(inst.fixed_costs[i] for i in sel))
    operational = quantize(tour_cost(tour, inst.edge_costs))
    access = {pop.id: access_value(pop, sel) for pop in inst.populations}
    return Solution(
        selected=sel,
        tour=tuple(tour),
        total_cost=quantize(fixed + operational),
        fixed_cost=fixed,
        operational_cost=operational,
        min_access=min(access.values()) if access else 1.0,
        access_by_population=access,
    )


# ---------------------------------------------------------------------------
# Dominance filter


def _dominates(retained: VoterPopulation, other: VoterPopulation,
               required: frozenset[str], free_ids: tuple[str, ...]) -> bool:
    """True when ``retained`` has provably no-higher access than ``other`` on
    every selection containing the required set, making the other's access
    constraint redundant."""
    ra, oa = retained.access, other.access
    if ra.v0 < oa.v0:
        return False
    r_base = ra.v1 + sum(ra.a[n] for n in required)
    o_base = oa.v1 + sum(oa.a[n] for n in required)
    if r_base > o_base:
        return False
    return all(ra.a[n] <= oa.a[n] for n in free_ids)


def dominance_filter(inst: Instance) -> frozenset[str]:
    """Ids of populations whose access constraint can be dropped.

    A population is removable when some retained population's access score is
    never larger on any selection containing the required set, so its bound
    is implied. Mutually-dominating (effectively identical) populations keep
    the lexicographically smallest id. Coverage requirements are unaffected.
    """
    required = inst.required_ids
    free_ids = tuple(i for i in inst.ids if i not in required)
    pops = {p.id: p for p in inst.populations}
    removable: set[str] = set()
    # Scan candidates from largest id down so that within a mutual-dominance
    # class only the smallest id survives.
    for wid in sorted(pops, reverse=True):
        for cand in sorted(pops):
            if cand == wid or cand in removable:
                continue
            if _dominates(pops[cand], pops[wid], required, free_ids):
                removable.add(wid)
                break
    return frozenset(removable)


# ---------------------------------------------------------------------------
# Heuristic step size


def epsilon_default(inst: Instance) -> float:
    """Smallest drop in any population's access score from removing a single
    location out of the full selection; a safe per-iteration increment for
    the frontier heuristic's access bound."""
    all_ids = inst.ids
    best = math.inf
    for pop in inst.populations:
        full = access_value(pop, all_ids)
        total = sum(pop.access.a[i] for i in all_ids)
        v0, v1 = pop.access.v0, pop.access.v1
        for i in all_ids:
            reduced = total - pop.access.a[i]
            without = (v1 + reduced) / (v0 + v1 + reduced)
            diff = full - without
            if diff < best:
                best = diff
    if not math.isfinite(best):
        raise ValueError("epsilon_default requires at least one population")
    return best


# ---------------------------------------------------------------------------
# Cost-model helpers


def annualize_fixed(purchase_cost: float, lifetime_years: int) -> float:
    """Straight-line annual share of a purchase over its lifetime."""
    if lifetime_years < 1:
        raise ValueError("lifetime_years must be at least 1")
    return quantize(purchase_cost / lifetime_years)


def annualize_operational(per_tour_cost: float, collections_per_year: float,
                          growth_rate: float, lifetime_years: int) -> float:
    """Average yearly collection cost over the asset lifetime.

    Scales the per-collection cost by the yearly collection count and the
    mean inflation multiplier sum((1+g)^t, t=0..L-1)/L.
    """
    if growth_rate < 0:
        raise ValueError("growth_rate must be nonnegative")
    if growth_rate == 0:
        multiplier = 1.0
    else:
        multiplier = ((1.0 + growth_rate) ** lifetime_years - 1.0) / (
            growth_rate * lifetime_years
        )
    return quantize(per_tour_cost * collections_per_year * multiplier)


def edge_cost_from_travel(duration_minutes: float, speed_mph: float,
                          hourly_rate: float, team_size: int,
                          mileage_rate: float) -> float:
    """Cost of one traversal of a leg: staff time plus mileage.

    Mileage is derived from the duration at the given average speed.
    """
    if min(duration_minutes, speed_mph, hourly_rate, team_size, mileage_rate) < 0:
        raise ValueError("travel cost inputs must be nonnegative")
    hours = duration_minutes / 60.0
    return quantize(hours * hourly_rate * team_size + hours * speed_mph * mileage_rate)


# ---------------------------------------------------------------------------
# Dense array views used by the solvers


@dataclass(frozen=True)
class DenseView:
    """Numpy mirror of an instance for vectorized access/coverage math.

    Row order follows ``inst.populations``; column order follows
    ``inst.ids``.
    """

    ids: tuple[str, ...]
    pop_ids: tuple[str, ...]
    a: np.ndarray        # (W, N) access parameters
    v0: np.ndarray       # (W,)
    v1: np.ndarray       # (W,)
    covers: np.ndarray   # (W, N) boolean coverage indicators
    weights: np.ndarray  # (W,)

    def access_given(self, mask: np.ndarray) -> np.ndarray:
        """Access score of each population for a boolean selection mask."""
        s = self.a @ mask.astype(float)
        return (self.v1 + s) / (self.v0 + self.v1 + s)


def dense_view(inst: Instance) -> DenseView:
    ids = inst.ids
    pops = inst.populations
    w, n = len(pops), len(ids)
    a = np.zeros((w, n))
    covers = np.zeros((w, n), dtype=bool)
    v0 = np.zeros(w)
    v1 = np.zeros(w)
    weights = np.zeros(w)
    col = {loc_id: k for k, loc_id in enumerate(ids)}
    for r, pop in enumerate(pops):
        v0[r] = pop.access.v0
        v1[r] = pop.access.v1
        weights[r] = pop.weight
        for loc_id, val in pop.access.a.items():
            if loc_id in col:
                a[r, col[loc_id]] = val
        for loc_id in pop.covering_set:
            covers[r, col[loc_id]] = True
    for arr in (a, covers, v0, v1, weights):
        arr.setflags(write=False)
    return DenseView(ids=ids, pop_ids=tuple(p.id for p in pops), a=a, v0=v0,
                     v1=v1, covers=covers, weights=weights)
