"""Comparison criteria for drop box systems and heuristic-vs-exact deviation
metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .heuristic import Frontier
from .model import Instance, Solution, access_value


@dataclass(frozen=True)
class CriteriaReport:
    """Cost, coverage, access and (optionally) distance criteria of one
    solution. Distance fields require a population-by-location road distance
    matrix; the no-car coverage fraction requires the per-mode duration
    block. Absent inputs leave those fields None."""

    num_boxes: int
    fixed_cost: float
    operational_cost: float
    total_cost: float
    frac_covered_1: float
    frac_covered_q: float
    min_access: float
    avg_access: float
    max_dist_closest: Optional[float] = None
    max_dist_third_closest: Optional[float] = None
    avg_dist_closest: Optional[float] = None
    avg_dist_closest3: Optional[float] = None
    frac_no_car_covered: Optional[float] = None


@dataclass(frozen=True)
class DeviationReport:
    """Per-bound cost comparison of two frontiers.

    ``pairs`` holds (r, heuristic cost, exact cost) for every bound both
    methods produced; ``mean_percent_deviation`` is None when there is no
    overlap."""

    pairs: tuple[tuple[float, float, float], ...]
    mean_percent_deviation: Optional[float]
    heuristic_seconds: float
    exact_seconds: float
    solution_counts: Mapping[str, int]


def _weights(inst: Instance) -> dict[str, float]:
    total = sum(p.weight for p in inst.populations)
    if total <= 0:
        return {p.id: 1.0 for p in inst.populations}
    return {p.id: p.weight for p in inst.populations}


def criteria(inst: Instance, sol: Solution,
             distances: Optional[Mapping[str, Mapping[str, float]]] = None,
             durations: Optional[Mapping[str, Mapping]] = None) -> CriteriaReport:
    """Evaluate a solution against the standard comparison criteria.

    ``distances`` maps population id to location id to road distance;
    ``durations`` is the optional per-mode block (walk/transit/other minutes
    plus vehicle_fraction) enabling the no-car coverage fraction.
    """
    selected = sol.selected
    weights = _weights(inst)
    total_weight = sum(weights.values()) or 1.0

    covered_1 = covered_q = 0.0
    access_sum = 0.0
    for pop in inst.populations:
        hits = len(pop.covering_set & selected)
        if hits >= 1:
            covered_1 += weights[pop.id]
        if inst.q == 0 or hits >= inst.q:
            covered_q += weights[pop.id]
        access_sum += weights[pop.id] * access_value(pop, selected)

    max_closest = max_third = avg_closest = avg_closest3 = None
    if distances is not None and inst.populations:
        closest, third, c3mean = [], [], []
        for pop in inst.populations:
            row = sorted(distances[pop.id][j] for j in selected)
            closest.append((pop.id, row[0]))
            if len(row) >= 3:
                third.append(row[2])
                c3mean.append((pop.id, sum(row[:3]) / 3.0))
        max_closest = max(d for _, d in closest)
        avg_closest = sum(weights[w] * d for w, d in closest) / total_weight
        if third:
            max_third = max(third)
            avg_closest3 = sum(weights[w] * d for w, d in c3mean) / total_weight

    frac_no_car = None
    if durations is not None and inst.populations:
        vehicle = durations.get("vehicle_fraction", {})
        walk = durations["walk"]
        transit = durations["transit"]
        other = durations["other"]
        carless_total = carless_covered = 0.0
        for pop in inst.populations:
            share = weights[pop.id] * (1.0 - float(vehicle.get(pop.id, 0.0)))
            if share <= 0:
                continue
            carless_total += share
            boxes = sum(
                1 for j in selected
                if (walk[pop.id][j] <= 15.0) + (transit[pop.id][j] <= 30.0)
                + (other[pop.id][j] <= 16.0) >= 2
            )
            if boxes >= 2:
                carless_covered += share
        if carless_total > 0:
            frac_no_car = carless_covered / carless_total

    return CriteriaReport(
        num_boxes=len(selected),
        fixed_cost=sol.fixed_cost,
        operational_cost=sol.operational_cost,
        total_cost=sol.total_cost,
        frac_covered_1=covered_1 / total_weight if inst.populations else 1.0,
        frac_covered_q=covered_q / total_weight if inst.populations else 1.0,
        min_access=sol.min_access,
        avg_access=access_sum / total_weight if inst.populations else 1.0,
        max_dist_closest=max_closest,
        max_dist_third_closest=max_third,
        avg_dist_closest=avg_closest,
        avg_dist_closest3=avg_closest3,
        frac_no_car_covered=frac_no_car,
    )


def cost_deviation(exact_frontier: Frontier, heuristic_frontier: Frontier,
                   heuristic_seconds: float = 0.0,
                   exact_seconds: float = 0.0) -> DeviationReport:
    """Percent cost gap of the heuristic against matched exact solutions.

    Every heuristic entry is matched to the exact entry solved at a bound
    equal to its minimum access score; unmatched entries are skipped.
    """
    exact_by_r = {round(e.r_satisfied, 9): e for e in exact_frontier}
    pairs = []
    for entry in heuristic_frontier:
        match = exact_by_r.get(round(entry.solution.min_access, 9))
        if match is None:
            continue
        pairs.append((
            entry.solution.min_access,
            entry.solution.total_cost,
            match.solution.total_cost,
        ))
    if pairs:
        mean = sum((h - e) / max(e, 1e-12) * 100.0 for _, h, e in pairs) / len(pairs)
    else:
        mean = None
    return DeviationReport(
        pairs=tuple(pairs),
        mean_percent_deviation=mean,
        heuristic_seconds=heuristic_seconds,
        exact_seconds=exact_seconds,
        solution_counts={
            "heuristic": len(heuristic_frontier),
            "exact": len(exact_frontier),
        },
    )
