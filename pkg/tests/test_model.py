import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxtour.gen import GenConfig, generate
from boxtour.model import (
    AccessParams,
    EdgeCosts,
    VoterPopulation,
    access_value,
    annualize_fixed,
    annualize_operational,
    dominance_filter,
    edge_cost_from_travel,
    epsilon_default,
    reformulated_costs,
    tour_cost,
    validate_instance,
)
from conftest import make_instance


def _pop(v0, v1, a):
    return VoterPopulation(
        id="P", covering_set=frozenset(a),
        access=AccessParams(v0=v0, v1=v1, a=a), weight=1.0)


class TestValidate:
    def test_well_formed_instance_is_clean(self, unit_square):
        assert validate_instance(unit_square) == []

    def test_covering_set_smaller_than_q_is_named(self):
        inst = make_instance(
            3, {(0, 1): 1, (1, 2): 1, (0, 2): 1},
            populations=[([1], 30, 70, {1: 5.0})], q=2)
        diags = validate_instance(inst)
        assert len(diags) == 1 and "P0" in diags[0]

    def test_asymmetric_costs_flagged(self, unit_square):
        matrix = unit_square.edge_costs.matrix.copy()
        matrix[0, 1] = 3.0  # leave matrix[1,0] at 1.0
        inst = dataclasses.replace(
            unit_square, edge_costs=EdgeCosts(unit_square.ids, matrix))
        diags = validate_instance(inst)
        assert any("asymmetric" in d for d in diags)

    def test_unrequired_start_flagged(self, unit_square):
        locs = tuple(dataclasses.replace(l, required=False) for l in unit_square.locations)
        inst = dataclasses.replace(unit_square, locations=locs)
        assert any("required" in d for d in validate_instance(inst))


class TestAccess:
    def test_empty_selection_is_baseline_turnout(self):
        pop = _pop(30.0, 70.0, {"L0": 5.0})
        assert access_value(pop, []) == pytest.approx(0.70)

    def test_single_box_at_short_distance_matches_published_gain(self):
        pop = _pop(30.0, 70.0, {"L0": math.exp(2.3)})
        assert access_value(pop, ["L0"]) == pytest.approx(0.70 + 0.027, abs=5e-4)

    def test_two_equal_boxes(self):
        pop = _pop(30.0, 70.0, {"L0": 10.0, "L1": 10.0})
        assert access_value(pop, ["L0", "L1"]) == pytest.approx(0.75)

    def test_unknown_location_raises(self):
        pop = _pop(30.0, 70.0, {"L0": 5.0})
        with pytest.raises(KeyError):
            access_value(pop, ["L9"])

    @given(
        v0=st.floats(0.1, 50.0),
        v1=st.floats(0.1, 90.0),
        a=st.lists(st.floats(0.01, 20.0), min_size=2, max_size=6),
    )
    def test_monotone_in_added_locations(self, v0, v1, a):
        ids = [f"L{k}" for k in range(len(a))]
        pop = _pop(v0, v1, dict(zip(ids, a)))
        values = [access_value(pop, ids[:k]) for k in range(len(ids) + 1)]
        assert all(0 < v < 1 for v in values)
        assert all(b > a_ for a_, b in zip(values, values[1:]))

    @given(
        lam=st.floats(1e-3, 1e3),
        v0=st.floats(0.1, 50.0),
        v1=st.floats(0.1, 90.0),
        a=st.floats(0.01, 20.0),
    )
    def test_scale_invariance(self, lam, v0, v1, a):
        base = _pop(v0, v1, {"L0": a, "L1": 2 * a})
        scaled = _pop(lam * v0, lam * v1, {"L0": lam * a, "L1": lam * 2 * a})
        for sel in ([], ["L0"], ["L0", "L1"]):
            assert access_value(base, sel) == pytest.approx(
                access_value(scaled, sel), abs=1e-12)


class TestReformulatedCosts:
    def test_direct_substitution(self):
        inst = make_instance(2, {(0, 1): 10.0}, populations=[],
                             fixed={0: 4.0, 1: 6.0})
        assert reformulated_costs(inst).cost("L0", "L1") == pytest.approx(15.0)

    def test_zero_fixed_costs_leave_costs_unchanged(self, unit_square):
        chat = reformulated_costs(unit_square)
        assert np.allclose(chat.matrix, unit_square.edge_costs.matrix)

    def test_triangle_cycle_identity(self):
        inst = make_instance(
            3, {(0, 1): 1, (1, 2): 1, (0, 2): 1}, populations=[],
            fixed={0: 2.0, 1: 4.0, 2: 6.0})
        chat = reformulated_costs(inst)
        cycle = ("L0", "L1", "L2")
        assert tour_cost(cycle, chat) == pytest.approx(15.0)
        assert tour_cost(cycle, inst.edge_costs) + 12.0 == pytest.approx(15.0)

    def test_identity_on_random_cycles(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 1000:
            inst = generate(GenConfig(
                num_populations=2,
                num_locations=int(rng.integers(4, 12)),
                seed=int(rng.integers(0, 2**63)),
            ))
            chat = reformulated_costs(inst)
            fixed = inst.fixed_costs
            for _ in range(10):
                size = int(rng.integers(3, len(inst.ids) + 1))
                cycle = tuple(rng.choice(inst.ids, size=size, replace=False))
                lhs = tour_cost(cycle, chat)
                rhs = tour_cost(cycle, inst.edge_costs) + sum(fixed[i] for i in cycle)
                assert lhs == pytest.approx(rhs, rel=1e-9)
                checked += 1


class TestDominanceFilter:
    def test_identical_populations_keep_smallest_id(self):
        shared = ([0, 1], 30.0, 70.0, {0: 2.0, 1: 3.0})
        inst = make_instance(2, {(0, 1): 1.0}, populations=[shared, shared])
        assert dominance_filter(inst) == {"P1"}

    def test_constructed_dominance_verified_by_enumeration(self):
        import itertools

        # Retained P0 has higher no-vote weight and lower access everywhere
        # off the required set; its constraint implies P1's.
        inst = make_instance(
            4, {(i, j): 1.0 for i in range(4) for j in range(i + 1, 4)},
            populations=[
                ([0, 1, 2, 3], 40.0, 60.0, {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0}),
                ([0, 1, 2, 3], 30.0, 70.0, {0: 2.0, 1: 2.0, 2: 2.0, 3: 2.0}),
            ])
        assert dominance_filter(inst) == {"P1"}
        p0, p1 = inst.populations
        free = [i for i in inst.ids if i not in inst.required_ids]
        for k in range(len(free) + 1):
            for extra in itertools.combinations(free, k):
                sel = set(inst.required_ids) | set(extra)
                assert access_value(p0, sel) <= access_value(p1, sel) + 1e-12

    def test_larger_a_on_free_location_blocks_removal(self):
        inst = make_instance(
            2, {(0, 1): 1.0},
            populations=[
                ([0, 1], 40.0, 60.0, {0: 1.0, 1: 5.0}),
                ([0, 1], 30.0, 70.0, {0: 2.0, 1: 2.0}),
            ])
        assert dominance_filter(inst) == frozenset()


class TestEpsilonDefault:
    def test_two_symmetric_boxes(self):
        inst = make_instance(
            2, {(0, 1): 1.0},
            populations=[([0, 1], 30.0, 70.0, {0: 10.0, 1: 10.0})])
        expected = 0.75 - 80.0 / 110.0
        assert epsilon_default(inst) == pytest.approx(expected, abs=1e-12)

    def test_symmetric_instance_gives_the_common_difference(self):
        inst = make_instance(
            3, {(0, 1): 1, (1, 2): 1, (0, 2): 1},
            populations=[([0, 1, 2], 30.0, 70.0, {0: 5.0, 1: 5.0, 2: 5.0})])
        pop = inst.populations[0]
        common = access_value(pop, inst.ids) - access_value(pop, inst.ids[:2])
        assert epsilon_default(inst) == pytest.approx(common, abs=1e-12)

    def test_matches_full_scan(self):
        inst = make_instance(
            3, {(0, 1): 1, (1, 2): 1, (0, 2): 1},
            populations=[
                ([0, 1, 2], 30.0, 70.0, {0: 0.001, 1: 8.0, 2: 3.0}),
                ([0, 1, 2], 20.0, 80.0, {0: 4.0, 1: 0.5, 2: 2.0}),
            ])
        best = math.inf
        for pop in inst.populations:
            for drop in inst.ids:
                rest = [i for i in inst.ids if i != drop]
                best = min(best, access_value(pop, inst.ids) - access_value(pop, rest))
        assert epsilon_default(inst) == pytest.approx(best, abs=1e-15)
        assert epsilon_default(inst) > 0


class TestCostHelpers:
    def test_fixed_straight_line(self):
        assert annualize_fixed(10000, 15) == pytest.approx(666.6667, abs=1e-4)
        assert annualize_fixed(6000, 15) == pytest.approx(400.0)
        assert annualize_fixed(0, 15) == 0.0

    def test_fixed_rejects_zero_lifetime(self):
        with pytest.raises(ValueError):
            annualize_fixed(1000, 0)

    @given(a=st.floats(0, 1e6), b=st.floats(0, 1e6), years=st.integers(1, 40))
    @settings(max_examples=50)
    def test_fixed_linearity(self, a, b, years):
        lhs = annualize_fixed(a + b, years)
        rhs = annualize_fixed(a, years) + annualize_fixed(b, years)
        assert lhs == pytest.approx(rhs, abs=2e-4)

    def test_operational_with_growth(self):
        multiplier = (1.02 ** 15 - 1) / 0.02
        expected = 50 * multiplier / 15
        assert annualize_operational(1.0, 50, 0.02, 15) == pytest.approx(expected, abs=1e-3)
        assert annualize_operational(1.0, 50, 0.02, 15) == pytest.approx(57.645, abs=1e-3)

    def test_operational_zero_growth_and_zero_collections(self):
        assert annualize_operational(3.5, 50, 0.0, 15) == pytest.approx(175.0)
        assert annualize_operational(3.5, 0, 0.02, 15) == 0.0

    def test_travel_cost_examples(self):
        assert edge_cost_from_travel(60, 30, 40, 2, 0.56) == pytest.approx(96.80)
        assert edge_cost_from_travel(0, 30, 40, 2, 0.56) == 0.0
        assert edge_cost_from_travel(30, 30, 40, 2, 0.56) == pytest.approx(48.40)
