"""Instance and solution file formats plus the flat CSV report layouts.

Instances are versioned JSON documents with a dense lower-triangular edge
cost block; frontier and report outputs are flat CSV for external tooling.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .evaluate import CriteriaReport, DeviationReport
from .heuristic import Frontier
from .model import (
    AccessParams,
    EdgeCosts,
    Instance,
    Location,
    Solution,
    VoterPopulation,
)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class InstanceFile:
    """Parsed instance document: the instance plus its optional blocks."""

    instance: Instance
    metadata: Optional[dict] = None
    durations: Optional[dict] = None


def instance_to_dict(inst: Instance, metadata: Optional[dict] = None,
                     durations: Optional[dict] = None) -> dict:
    ids = inst.ids
    lower = [
        [inst.edge_costs.matrix[i, j] for j in range(i)]
        for i in range(len(ids))
    ]
    doc = {
        "version": FORMAT_VERSION,
        "q": inst.q,
        "start": inst.start,
        "locations": [
            {
                "id": loc.id,
                "fixed_cost": loc.fixed_cost,
                "required": loc.required,
                **({"coords": list(loc.coords)} if loc.coords is not None else {}),
            }
            for loc in inst.locations
        ],
        "edge_costs": lower,
        "populations": [
            {
                "id": pop.id,
                "weight": pop.weight,
                "covering_set": sorted(pop.covering_set),
                "v0": pop.access.v0,
                "v1": pop.access.v1,
                "a": {k: pop.access.a[k] for k in sorted(pop.access.a)},
            }
            for pop in inst.populations
        ],
    }
    if durations is not None:
        doc["durations"] = durations
    if metadata is not None:
        doc["metadata"] = metadata
    return doc


def instance_from_dict(doc: dict) -> InstanceFile:
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported instance format version {version!r}")
    locations = tuple(
        Location(
            id=entry["id"],
            fixed_cost=float(entry["fixed_cost"]),
            required=bool(entry.get("required", False)),
            coords=tuple(entry["coords"]) if "coords" in entry else None,
        )
        for entry in doc["locations"]
    )
    ids = tuple(loc.id for loc in locations)
    n = len(ids)
    lower = doc["edge_costs"]
    if len(lower) != n or any(len(row) != i for i, row in enumerate(lower)):
        raise ValueError("edge_costs must be lower-triangular in location order")
    matrix = np.zeros((n, n))
    for i, row in enumerate(lower):
        for j, value in enumerate(row):
            matrix[i, j] = matrix[j, i] = float(value)
    populations = tuple(
        VoterPopulation(
            id=entry["id"],
            covering_set=frozenset(entry["covering_set"]),
            access=AccessParams(
                v0=float(entry["v0"]),
                v1=float(entry["v1"]),
                a={k: float(v) for k, v in entry["a"].items()},
            ),
            weight=float(entry.get("weight", 0.0)),
        )
        for entry in doc["populations"]
    )
    inst = Instance(
        locations=locations,
        start=doc["start"],
        edge_costs=EdgeCosts(ids, matrix),
        populations=populations,
        q=int(doc["q"]),
    )
    return InstanceFile(
        instance=inst,
        metadata=doc.get("metadata"),
        durations=doc.get("durations"),
    )


def save_instance(inst: Instance, path: str | Path, metadata: Optional[dict] = None,
                  durations: Optional[dict] = None) -> None:
    Path(path).write_text(
        json.dumps(instance_to_dict(inst, metadata, durations), indent=1) + "\n")


def load_instance(path: str | Path) -> InstanceFile:
    return instance_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Solutions


def solution_to_dict(sol: Solution) -> dict:
    return {
        "version": FORMAT_VERSION,
        "selected": sorted(sol.selected),
        "tour": list(sol.tour),
        "total_cost": sol.total_cost,
        "fixed_cost": sol.fixed_cost,
        "operational_cost": sol.operational_cost,
        "min_access": sol.min_access,
        "access_by_population": {
            k: sol.access_by_population[k] for k in sorted(sol.access_by_population)
        },
    }


def solution_from_dict(doc: dict) -> Solution:
    return Solution(
        selected=frozenset(doc["selected"]),
        tour=tuple(doc["tour"]),
        total_cost=float(doc["total_cost"]),
        fixed_cost=float(doc["fixed_cost"]),
        operational_cost=float(doc["operational_cost"]),
        min_access=float(doc["min_access"]),
        access_by_population={
            k: float(v) for k, v in doc["access_by_population"].items()
        },
    )


def save_solution(sol: Solution, path: str | Path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sol), indent=1) + "\n")


def load_solution(path: str | Path) -> Solution:
    return solution_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# CSV layouts

FRONTIER_HEADER = [
    "r", "min_access", "total_cost", "fixed_cost", "operational_cost",
    "num_boxes", "selected", "tour",
]


def write_frontier_csv(front, path: str | Path) -> None:
    """Frontier rows sorted by ascending min access, six-decimal numerics."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(FRONTIER_HEADER)
        for entry in front:
            sol = entry.solution
            writer.writerow([
                f"{entry.r_satisfied:.6f}",
                f"{sol.min_access:.6f}",
                f"{sol.total_cost:.6f}",
                f"{sol.fixed_cost:.6f}",
                f"{sol.operational_cost:.6f}",
                len(sol.selected),
                ";".join(sorted(sol.selected)),
                ";".join(sol.tour),
            ])


_CRITERIA_FIELDS = [
    "num_boxes", "fixed_cost", "operational_cost", "total_cost",
    "frac_covered_1", "frac_covered_q", "min_access", "avg_access",
]
_CRITERIA_OPTIONAL = [
    "max_dist_closest", "max_dist_third_closest",
    "avg_dist_closest", "avg_dist_closest3", "frac_no_car_covered",
]


def write_criteria_csv(report: CriteriaReport, path: str | Path) -> None:
    """metric,value rows; distance rows appear only when computed."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "value"])
        writer.writerow(["num_boxes", report.num_boxes])
        for name in _CRITERIA_FIELDS[1:]:
            writer.writerow([name, f"{getattr(report, name):.6f}"])
        for name in _CRITERIA_OPTIONAL:
            value = getattr(report, name)
            if value is not None:
                writer.writerow([name, f"{value:.6f}"])


def write_compare_csv(report: DeviationReport, path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["r", "heuristic_cost", "exact_cost"])
        for r, heur, exact in report.pairs:
            writer.writerow([f"{r:.6f}", f"{heur:.6f}", f"{exact:.6f}"])


def read_distances_csv(path: str | Path) -> dict[str, dict[str, float]]:
    """Population-by-location distance matrix.

    Header: ``population`` followed by location ids; one row per population.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        loc_ids = header[1:]
        out: dict[str, dict[str, float]] = {}
        for row in reader:
            if not row:
                continue
            out[row[0]] = {loc: float(v) for loc, v in zip(loc_ids, row[1:])}
    return out
