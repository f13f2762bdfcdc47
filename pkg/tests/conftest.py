import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from boxtour.model import (
    AccessParams,
    EdgeCosts,
    Instance,
    Location,
    VoterPopulation,
)


def make_instance(n_locations, edges, populations, required=("L0",), start="L0",
                  q=1, fixed=None):
    """Terse instance builder: ``edges`` maps (i, j) index pairs to costs,
    ``populations`` is a list of (covering indices, v0, v1, a-by-index)."""
    ids = [f"L{k}" for k in range(n_locations)]
    fixed = fixed or {}
    locations = tuple(
        Location(id=ids[k], fixed_cost=float(fixed.get(k, 0.0)),
                 required=ids[k] in required)
        for k in range(n_locations)
    )
    matrix = np.zeros((n_locations, n_locations))
    for (i, j), c in edges.items():
        matrix[i, j] = matrix[j, i] = float(c)
    pops = []
    for num, (covering, v0, v1, a) in enumerate(populations):
        a_map = {ids[k]: float(v) for k, v in a.items()}
        for loc in ids:
            a_map.setdefault(loc, 1.0)
        pops.append(VoterPopulation(
            id=f"P{num}",
            covering_set=frozenset(ids[k] for k in covering),
            access=AccessParams(v0=float(v0), v1=float(v1), a=a_map),
            weight=100.0,
        ))
    return Instance(
        locations=locations, start=start,
        edge_costs=EdgeCosts(tuple(ids), matrix),
        populations=tuple(pops), q=q,
    )


@pytest.fixture
def unit_square():
    """Four locations on a unit square (rectilinear costs), one population."""
    edges = {
        (0, 1): 1.0, (1, 2): 1.0, (2, 3): 1.0, (0, 3): 1.0,
        (0, 2): 2.0, (1, 3): 2.0,
    }
    return make_instance(
        4, edges,
        populations=[([0, 1, 2, 3], 30.0, 70.0, {0: 10.0, 1: 10.0, 2: 10.0, 3: 10.0})],
        q=1,
    )


def small_random_instance(seed, n_locations=None, n_populations=None, q=None):
    """Seeded generator-backed instance, optionally resized / re-q'd."""
    import dataclasses

    from boxtour.gen import GenConfig, generate

    rng = np.random.default_rng(seed)
    n = n_locations or int(rng.integers(4, 10))
    w = n_populations or int(rng.integers(3, 12))
    inst = generate(GenConfig(num_populations=w, num_locations=n, seed=seed))
    if q is not None:
        inst = dataclasses.replace(inst, q=q)
    return inst
