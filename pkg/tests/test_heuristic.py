import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boxtour.heuristic import (
    angle,
    ctp_construct,
    estimate_delta_cost,
    feasible_swaps,
    frontier,
    initial_solution,
    nondominated,
    rebuild_tour,
)
from boxtour.model import (
    SolveOptions,
    access_value,
    min_access,
    reformulated_costs,
    tour_cost,
)
from conftest import make_instance, small_random_instance
from oracles import best_tour_by_permutations


class TestAngle:
    def test_pure_cost_drop_is_quarter_turn(self):
        assert angle(0.0, -1.0) == pytest.approx(math.pi / 2, abs=1e-12)

    def test_pure_access_gain_is_half_turn(self):
        assert angle(1.0, 0.0) == pytest.approx(math.pi, abs=1e-12)

    def test_diagonal_gain_gain(self):
        assert angle(1.0, 1.0) == pytest.approx(5 * math.pi / 4, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            angle(0.0, 0.0)

    @given(
        dr=st.floats(-10, 10).filter(lambda v: v == 0 or abs(v) > 1e-9),
        dc=st.floats(-10, 10).filter(lambda v: v == 0 or abs(v) > 1e-9),
    )
    def test_quadrants(self, dr, dc):
        if dr == 0 and dc == 0:
            return
        theta = angle(dr, dc)
        assert 0 < theta <= 2 * math.pi
        if dr < 0 and dc < 0:
            assert theta < math.pi / 2
        if dr > 0 and dc < 0:
            assert math.pi / 2 < theta < math.pi
        if dc > 0:
            assert theta > math.pi


class TestRebuildTour:
    def test_single_node(self, unit_square):
        chat = reformulated_costs(unit_square)
        assert rebuild_tour({"L0"}, chat, "L0") == ("L0",)

    def test_unit_square_perimeter(self, unit_square):
        tour = rebuild_tour(set(unit_square.ids), unit_square.edge_costs, "L0")
        assert tour_cost(tour, unit_square.edge_costs) == pytest.approx(4.0)

    def test_matches_permutation_oracle_on_ten_random_nodes(self):
        rng = np.random.default_rng(17)
        inst = small_random_instance(17, n_locations=10, n_populations=2)
        tour = rebuild_tour(set(inst.ids), inst.edge_costs, inst.start)
        oracle = best_tour_by_permutations(inst.ids, inst.edge_costs.cost)
        assert tour_cost(tour, inst.edge_costs) == pytest.approx(oracle, abs=1e-9)
        assert tour[0] == inst.start

    def test_large_selection_uses_local_search_and_stays_sane(self):
        inst = small_random_instance(18, n_locations=20, n_populations=2)
        tour = rebuild_tour(set(inst.ids), inst.edge_costs, inst.start)
        assert sorted(tour) == sorted(inst.ids)
        assert tour[0] == inst.start


class TestDeltaCost:
    def test_removal_from_equilateral_triangle(self):
        inst = make_instance(3, {(0, 1): 1, (1, 2): 1, (0, 2): 1}, populations=[])
        delta = estimate_delta_cost(("L0", "L1", "L2"), inst.edge_costs, remove="L1")
        assert delta == pytest.approx(-1.0)

    def test_insertion_checks_every_edge(self):
        edges = {(0, 1): 2, (1, 2): 4, (0, 2): 3,
                 (0, 3): 5, (1, 3): 1, (2, 3): 2}
        inst = make_instance(4, edges, populations=[])
        tour = ("L0", "L1", "L2")
        by_hand = min(
            edges[(0, 3)] + edges[(1, 3)] - edges[(0, 1)],
            edges[(1, 3)] + edges[(2, 3)] - edges[(1, 2)],
            edges[(2, 3)] + edges[(0, 3)] - edges[(0, 2)],
        )
        assert estimate_delta_cost(tour, inst.edge_costs, insert="L3") == pytest.approx(by_hand)

    def test_pure_insertion_nonnegative_on_metric_costs(self):
        inst = small_random_instance(30, n_locations=8, n_populations=2)
        chat = reformulated_costs(inst)
        tour = rebuild_tour(set(inst.ids[:4]), chat, inst.start)
        for j in inst.ids[4:]:
            assert estimate_delta_cost(tour, chat, insert=j) >= 0

    def test_swap_equals_remove_then_insert_on_reduced_tour(self):
        inst = small_random_instance(31, n_locations=7, n_populations=2)
        chat = reformulated_costs(inst)
        tour = rebuild_tour(set(inst.ids[:5]), chat, inst.start)
        rm, ins = tour[2], inst.ids[5]
        combined = estimate_delta_cost(tour, chat, remove=rm, insert=ins)
        removal = estimate_delta_cost(tour, chat, remove=rm)
        reduced = tuple(t for t in tour if t != rm)
        insertion = estimate_delta_cost(reduced, chat, insert=ins)
        assert combined == pytest.approx(removal + insertion, abs=1e-9)


class TestNondominated:
    def test_drops_the_dominated_point(self):
        entries = [(10, 0.5), (12, 0.6), (11, 0.55), (13, 0.55)]
        assert (13, 0.55) not in nondominated(entries)
        assert len(nondominated(entries)) == 3

    def test_single_entry_survives(self):
        assert nondominated([(5.0, 0.3)]) == [(5.0, 0.3)]

    def test_staircase_all_kept(self):
        stairs = [(k, 0.1 * k) for k in range(5)]
        assert nondominated(stairs) == stairs

    def test_fixed_point(self):
        rng = np.random.default_rng(3)
        entries = [(float(c), float(a)) for c, a in
                   zip(rng.uniform(0, 10, 40), rng.uniform(0, 1, 40))]
        once = nondominated(entries)
        assert nondominated(once) == once

    def test_duplicates_collapse(self):
        assert nondominated([(1.0, 0.5), (1.0, 0.5)]) == [(1.0, 0.5)]


class TestCtpConstruct:
    def test_required_already_covering_changes_nothing(self, unit_square):
        chat = reformulated_costs(unit_square)
        selected, tour = ctp_construct(
            ["L0"], [("P0", frozenset(["L0", "L1"]))], chat, "L0")
        assert selected == {"L0"}
        assert tour == ("L0",)

    def test_disjoint_singletons_all_added(self):
        inst = make_instance(
            4, {(i, j): 1.0 for i in range(4) for j in range(i + 1, 4)},
            populations=[])
        selected, _ = ctp_construct(
            ["L0"],
            [("a", frozenset(["L1"])), ("b", frozenset(["L2"])), ("c", frozenset(["L3"]))],
            reformulated_costs(inst), "L0")
        assert selected == {"L0", "L1", "L2", "L3"}

    def test_random_instance_everyone_covered(self):
        inst = small_random_instance(44, n_locations=20, n_populations=50)
        chat = reformulated_costs(inst)
        coverables = [(p.id, p.covering_set) for p in inst.populations]
        selected, tour = ctp_construct(inst.required_ids, coverables, chat, inst.start)
        assert set(tour) == selected
        for pop in inst.populations:
            assert pop.covering_set & selected

    def test_empty_covering_set_is_infeasible(self, unit_square):
        from boxtour.model import Infeasible

        with pytest.raises(Infeasible):
            ctp_construct(["L0"], [("P0", frozenset())],
                          reformulated_costs(unit_square), "L0")


class TestInitialSolution:
    def test_q0_tours_the_required_set_only(self):
        inst = make_instance(
            5, {(i, j): 1.0 for i in range(5) for j in range(i + 1, 5)},
            populations=[([0, 1, 2, 3, 4], 30, 70, {k: 1.0 for k in range(5)})],
            required=("L0", "L1", "L2"), q=0)
        sol = initial_solution(inst)
        assert sol.selected == {"L0", "L1", "L2"}

    def test_q1_sole_cover_selected(self):
        inst = make_instance(
            4, {(i, j): 1.0 for i in range(4) for j in range(i + 1, 4)},
            populations=[([3], 30, 70, {3: 2.0})], q=1)
        assert "L3" in initial_solution(inst).selected

    def test_q2_double_coverage_on_random_instances(self):
        for seed in range(25):
            inst = small_random_instance(seed, q=2)
            sol = initial_solution(inst)
            for pop in inst.populations:
                assert len(pop.covering_set & sol.selected) >= 2, (seed, pop.id)

    def test_q3_extends_the_staging(self):
        inst = make_instance(
            6, {(i, j): 1.0 for i in range(6) for j in range(i + 1, 6)},
            populations=[([1, 2, 3, 4], 30, 70, {k: 1.0 for k in (1, 2, 3, 4)})],
            q=3)
        sol = initial_solution(inst)
        assert len(inst.populations[0].covering_set & sol.selected) >= 3


class TestFeasibleSwaps:
    def test_sole_coverer_removal_excluded(self):
        inst = make_instance(
            4, {(i, j): 1.0 for i in range(4) for j in range(i + 1, 4)},
            populations=[([3], 30, 70, {3: 2.0})], q=1)
        swaps = feasible_swaps(inst, {"L0", "L3"}, r=0.0, q=1)
        assert not any(c.remove == "L3" and c.insert is None for c in swaps)

    def test_insertions_always_feasible_below_current_access(self):
        inst = small_random_instance(52, n_locations=8, n_populations=5, q=0)
        current = frozenset([inst.start])
        r = min_access(inst, current)
        swaps = feasible_swaps(inst, current, r=r, q=0)
        inserts = {c.insert for c in swaps if c.remove is None}
        assert inserts == set(inst.ids) - current

    def test_matches_brute_force_enumeration(self):
        inst = small_random_instance(53, n_locations=5, n_populations=4, q=1)
        chat = reformulated_costs(inst)
        current = frozenset(initial_solution(inst).selected)
        tour = rebuild_tour(current, chat, inst.start)
        r = min_access(inst, current) * 0.9
        got = {(c.remove, c.insert): c for c in
               feasible_swaps(inst, current, r=r, q=inst.q, tour=tour)}

        removables = [i for i in inst.ids
                      if i in current and i not in inst.required_ids]
        insertables = [j for j in inst.ids if j not in current]
        base_min = min_access(inst, current)
        expected = {}
        for rm in removables + [None]:
            for ins in insertables + [None]:
                if rm is None and ins is None:
                    continue
                after = (current - {rm}) | ({ins} if ins else set())
                if any(len(p.covering_set & after) < inst.q for p in inst.populations):
                    continue
                new_min = min(access_value(p, after) for p in inst.populations)
                if new_min < r - 1e-12:
                    continue
                d_cost = estimate_delta_cost(tour, chat, remove=rm, insert=ins)
                d_acc = new_min - base_min
                if d_cost > 0 and d_acc < 0:
                    continue
                if d_cost == 0 and d_acc == 0:
                    continue
                expected[(rm, ins)] = (d_cost, d_acc)

        assert set(got) == set(expected)
        for key, (d_cost, d_acc) in expected.items():
            assert got[key].delta_cost == pytest.approx(d_cost, abs=1e-9)
            assert got[key].delta_access == pytest.approx(d_acc, abs=1e-12)

    def test_scan_wall_clock_guard(self):
        inst = small_random_instance(54, n_locations=100, n_populations=1000, q=2)
        current = frozenset(initial_solution(inst).selected)
        start = time.perf_counter()
        feasible_swaps(inst, current, r=0.1, q=2)
        assert time.perf_counter() - start < 2.0


class TestFrontier:
    def test_everything_required_gives_single_entry(self):
        inst = make_instance(
            4, {(i, j): 1.0 for i in range(4) for j in range(i + 1, 4)},
            populations=[([0, 1], 30, 70, {k: 1.0 for k in range(4)})],
            required=("L0", "L1", "L2", "L3"), q=1)
        front = frontier(inst)
        assert len(front) == 1

    def test_entries_mutually_nondominated_and_sorted(self):
        inst = small_random_instance(61, n_locations=10, n_populations=8, q=1)
        front = frontier(inst)
        seen = [(e.solution.total_cost, e.solution.min_access) for e in front]
        assert nondominated(seen) == seen
        accesses = [e.solution.min_access for e in front]
        assert accesses == sorted(accesses)

    def test_entries_satisfy_their_bound_and_validate(self):
        from boxtour.exact import validate_solution

        inst = small_random_instance(62, n_locations=9, n_populations=7, q=2)
        for entry in frontier(inst):
            assert entry.solution.min_access >= entry.r_satisfied - 1e-9
            options = SolveOptions(r=entry.r_satisfied)
            assert validate_solution(inst, options, entry.solution) == []

    def test_cost_within_ten_percent_of_exact_at_matched_bounds(self):
        from boxtour.exact import solve_exact

        inst = small_random_instance(63, n_locations=12, n_populations=15, q=1)
        front = frontier(inst)
        for entry in front:
            exact_sol = solve_exact(
                inst, SolveOptions(r=entry.solution.min_access, dominance_filter=True),
                warm=entry.solution)
            assert entry.solution.total_cost <= exact_sol.total_cost * 1.10 + 1e-6
            assert entry.solution.total_cost >= exact_sol.total_cost - 1e-6

    def test_huge_epsilon_still_feasible(self):
        inst = small_random_instance(64, n_locations=8, n_populations=5, q=1)
        front = frontier(inst, epsilon=0.5)
        assert len(front) >= 1
