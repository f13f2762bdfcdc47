"""Synthetic instance generation and access-parameter construction.

Instances are drawn on an integer grid with Manhattan travel, fixed costs
and coverage thresholds sampled from fixed ranges, and distance-decay access
parameters. Everything is a pure function of the seed; the draw order is
documented in ``generate`` and must not change once instances are published.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .model import (
    AccessParams,
    EdgeCosts,
    Instance,
    Location,
    VoterPopulation,
    annualize_operational,
    edge_cost_from_travel,
    quantize,
)

RNG_NAME = "numpy-pcg64"

# Cost-model constants shared with the case-study conventions: 30 mph travel,
# $40/h opportunity cost per team member, a team of two, $0.56/mile, ballots
# collected 50 times a year with 2% yearly growth over a 15 year life.
SPEED_MPH = 30.0
HOURLY_RATE = 40.0
TEAM_SIZE = 2
MILEAGE_RATE = 0.56
COLLECTIONS_PER_YEAR = 50.0
GROWTH_RATE = 0.02
LIFETIME_YEARS = 15

# Population weights are not part of the published protocol; a fixed uniform
# integer range keeps instances self-contained.
WEIGHT_RANGE = (50, 2000)


@dataclass(frozen=True)
class GenConfig:
    num_populations: int
    num_locations: int
    seed: int
    grid: tuple[int, int] = (100, 100)
    fixed_cost_range: tuple[float, float] = (5000.0, 12000.0)
    op_scale_range: tuple[float, float] = (0.5, 1.5)
    threshold_range: tuple[float, float] = (15.0, 50.0)
    v1_range: tuple[float, float] = (50.0, 95.0)


def _manhattan(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.abs(p[:, None, :] - q[None, :, :]).sum(axis=2)


def annualized_edge_cost(distance_miles: float) -> float:
    """Yearly collection cost of one leg of the given road length."""
    duration_minutes = distance_miles / SPEED_MPH * 60.0
    per_tour = edge_cost_from_travel(
        duration_minutes, SPEED_MPH, HOURLY_RATE, TEAM_SIZE, MILEAGE_RATE)
    return annualize_operational(
        per_tour, COLLECTIONS_PER_YEAR, GROWTH_RATE, LIFETIME_YEARS)


def generate(cfg: GenConfig) -> Instance:
    """Random instance drawn entirely from ``cfg`` (same config, same bytes).

    Draw order: location coordinates, population coordinates, required
    count, required locations, fixed costs, operational scale, coverage
    threshold, turnout values, population weights. Coordinates are integer
    grid points; travel time between points is their Manhattan distance in
    minutes, and operational costs read the same distance as road miles.

    Every covering set is expanded to the population's second-nearest
    location where the sampled threshold leaves it below two members, and
    population-to-location distances are floored at one grid unit before the
    access decay so colocated pairs cannot spike.
    """
    if cfg.num_locations < 4:
        raise ValueError("need at least 4 locations")
    if cfg.num_populations < 1:
        raise ValueError("need at least 1 population")
    rng = np.random.default_rng(cfg.seed)
    n, w = cfg.num_locations, cfg.num_populations

    highs = np.array(cfg.grid)
    loc_xy = rng.integers(0, highs, size=(n, 2))
    pop_xy = rng.integers(0, highs, size=(w, 2))
    t_count = int(rng.integers(1, math.ceil(n / 4) + 1))
    required = np.sort(rng.choice(n, size=t_count, replace=False))
    fixed = np.round(rng.uniform(*cfg.fixed_cost_range, size=n), 2)
    scale = float(rng.uniform(*cfg.op_scale_range))
    threshold = float(rng.uniform(*cfg.threshold_range))
    v1 = rng.uniform(*cfg.v1_range, size=w)
    weights = rng.integers(WEIGHT_RANGE[0], WEIGHT_RANGE[1] + 1, size=w)

    width = max(2, len(str(n - 1)))
    loc_ids = [f"L{k:0{width}d}" for k in range(n)]
    pwidth = max(3, len(str(w - 1)))
    pop_ids = [f"P{k:0{pwidth}d}" for k in range(w)]
    required_set = {loc_ids[k] for k in required}
    start = loc_ids[int(required[0])]

    loc_dist = _manhattan(loc_xy.astype(float), loc_xy.astype(float))
    cost_matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            c = quantize(annualized_edge_cost(loc_dist[i, j]) * scale)
            cost_matrix[i, j] = cost_matrix[j, i] = c

    pop_dist = _manhattan(pop_xy.astype(float), loc_xy.astype(float))
    locations = tuple(
        Location(
            id=loc_ids[k],
            fixed_cost=float(fixed[k]),
            required=loc_ids[k] in required_set,
            coords=(int(loc_xy[k, 0]), int(loc_xy[k, 1])),
        )
        for k in range(n)
    )
    populations = []
    for r in range(w):
        dists = pop_dist[r]
        cutoff = threshold
        if int((dists <= cutoff).sum()) < 2:
            cutoff = float(np.sort(dists)[1])
        covering = frozenset(loc_ids[k] for k in range(n) if dists[k] <= cutoff)
        a = {
            loc_ids[k]: float(np.exp(2.5 - max(dists[k], 1.0) / 30.0))
            for k in range(n)
        }
        populations.append(VoterPopulation(
            id=pop_ids[r],
            covering_set=covering,
            access=AccessParams(v0=float(100.0 - v1[r]), v1=float(v1[r]), a=a),
            weight=float(weights[r]),
        ))
    return Instance(
        locations=locations,
        start=start,
        edge_costs=EdgeCosts(tuple(loc_ids), cost_matrix),
        populations=tuple(populations),
        q=2,
    )


def generator_metadata(cfg: GenConfig) -> dict:
    """Provenance block recorded alongside generated instance files."""
    return {
        "rng": RNG_NAME,
        "seed": cfg.seed,
        "num_populations": cfg.num_populations,
        "num_locations": cfg.num_locations,
        "grid": list(cfg.grid),
        "fixed_cost_range": list(cfg.fixed_cost_range),
        "op_scale_range": list(cfg.op_scale_range),
        "threshold_range": list(cfg.threshold_range),
        "v1_range": list(cfg.v1_range),
        "threshold_expansion": "per-population-second-nearest",
        "draw_order": (
            "location-coords, population-coords, required-count, "
            "required-choice, fixed-costs, op-scale, threshold, v1, weights"
        ),
    }


# ---------------------------------------------------------------------------
# Duration-based access parameters


@dataclass(frozen=True)
class DurationInputs:
    """Per-mode travel durations feeding the access-parameter construction.

    Durations are minutes and must be positive. ``other`` is derived from
    road distance at 15 mph, so a road distance of D miles appears here as
    4*D minutes. ``work_shares`` may sum to less than one per population
    (the remainder does not commute).
    """

    populations: tuple[str, ...]
    locations: tuple[str, ...]
    walk: Mapping[str, Mapping[str, float]]
    transit: Mapping[str, Mapping[str, float]]
    drive: Mapping[str, Mapping[str, float]]
    other: Mapping[str, Mapping[str, float]]
    vehicle_fraction: Mapping[str, float]
    turnout: Mapping[str, float]
    work_shares: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    work_walk: Mapping[str, Mapping[str, float]] = field(default_factory=dict)


def build_access_params(inputs: DurationInputs):
    """Access parameters from travel durations.

    Returns (a, params) where ``a[w][n]`` is the access weight of location n
    for population w and ``params[w] = (v0, v1)`` with v1 the turnout
    fraction and v0 its complement. Each weight combines inverse-squared
    durations per mode, the drive term scaled by vehicle availability and
    the work terms by commute shares, all divided by 25 times the turnout.
    """
    a: dict[str, dict[str, float]] = {}
    params: dict[str, tuple[float, float]] = {}
    for pw in inputs.populations:
        v1 = inputs.turnout[pw]
        if not 0.0 < v1 <= 1.0:
            raise ValueError(f"turnout for {pw!r} must lie in (0, 1]")
        shares = inputs.work_shares.get(pw, {})
        if sum(shares.values()) > 1.0 + 1e-9:
            raise ValueError(f"work shares for {pw!r} exceed 1")
        lam = inputs.vehicle_fraction[pw]
        row: dict[str, float] = {}
        for loc in inputs.locations:
            terms = 0.0
            for mapping in (inputs.walk, inputs.transit, inputs.other):
                d = mapping[pw][loc]
                if d <= 0:
                    raise ValueError(f"non-positive duration for {pw!r}/{loc!r}")
                terms += 1.0 / d ** 2
            d = inputs.drive[pw][loc]
            if d <= 0:
                raise ValueError(f"non-positive duration for {pw!r}/{loc!r}")
            terms += lam / d ** 2
            for work_loc, share in shares.items():
                d = inputs.work_walk[loc][work_loc]
                if d <= 0:
                    raise ValueError(f"non-positive work duration at {loc!r}")
                terms += share / d ** 2
            row[loc] = (0.04 / v1) * terms
        a[pw] = row
        params[pw] = (1.0 - v1, v1)
    return a, params


def build_covering_sets(inputs: DurationInputs, factor: float) -> dict[str, frozenset[str]]:
    """Covering sets from the two-of-four reachability rule.

    A location covers a population when at least two of these hold: walking
    time at most 15*factor, driving time at most 15*factor, transit time at
    most 30*factor, road distance at most 4*factor miles (16*factor minutes
    of the 15 mph ``other`` duration).
    """
    if factor <= 0:
        raise ValueError("factor must be positive")
    sets = {}
    for pw in inputs.populations:
        members = set()
        for loc in inputs.locations:
            hits = sum((
                inputs.walk[pw][loc] <= 15.0 * factor,
                inputs.drive[pw][loc] <= 15.0 * factor,
                inputs.transit[pw][loc] <= 30.0 * factor,
                inputs.other[pw][loc] <= 16.0 * factor,
            ))
            if hits >= 2:
                members.add(loc)
        sets[pw] = frozenset(members)
    return sets


# ---------------------------------------------------------------------------
# Distance-decay validation family


def table5_family() -> list[tuple[float, float, float]]:
    """Marginal access gains of a single box at increasing distances.

    For distances D of 0.2, 0.4, ..., 3.0 miles, pairs the turnout increase
    of adding one box with decay weight e^(2.5-D) to a baseline of 70%
    turnout (on the 0-100 parameter scale) with the benefit of moving that
    box one mile closer.
    """

    def marginal(d: float) -> float:
        weight = math.exp(2.5 - d)
        return (70.0 + weight) / (100.0 + weight) - 0.70

    out = []
    for step in range(1, 16):
        d = round(0.2 * step, 10)
        out.append((d, marginal(d), marginal(d) - marginal(d + 1.0)))
    return out
