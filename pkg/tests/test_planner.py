import heapq
import math

import numpy as np
import pytest

from stam.errors import (
    GeometryMismatch,
    NoAffordantRegion,
    OutOfBounds,
    RangeViolation,
    Unreachable,
)
from stam.grid import Pose
from stam.planner import (
    EPSILON,
    GoalStrategy,
    GoalVariant,
    gainmap,
    plan_path,
    select_goal,
)
from tests.conftest import make_field

NEIGHBORS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


def dijkstra_cost(values, start, goal, epsilon=EPSILON):
    """Exhaustive reference search over the same per-entered-cell cost model;
    returns the optimal total cost or None when the goal is unreachable."""
    h, w = values.shape
    cost = 1.0 - values + epsilon
    sc, sr = start
    gc, gr = goal
    if values[sr, sc] <= 0.0 or values[gr, gc] <= 0.0:
        return None
    dist = {(sc, sr): cost[sr, sc]}
    heap = [(cost[sr, sc], sc, sr)]
    done = set()
    while heap:
        d, col, row = heapq.heappop(heap)
        if (col, row) in done:
            continue
        done.add((col, row))
        if (col, row) == (gc, gr):
            return d
        for dc, dr in NEIGHBORS:
            nc, nr = col + dc, row + dr
            if not (0 <= nc < w and 0 <= nr < h) or values[nr, nc] <= 0.0:
                continue
            nd = d + cost[nr, nc]
            if nd < dist.get((nc, nr), math.inf):
                dist[(nc, nr)] = nd
                heapq.heappush(heap, (nd, nc, nr))
    return None


class TestGainmap:
    def test_lambda_one_is_inverted_cost(self, rng):
        cost = make_field(rng.uniform(0, 1, size=(6, 6)))
        like = make_field(rng.uniform(0, 1, size=(6, 6)))
        out = gainmap(cost, like, 1.0)
        np.testing.assert_array_equal(out.values, 1.0 - cost.values)

    def test_lambda_zero_is_likelihood(self, rng):
        cost = make_field(rng.uniform(0, 1, size=(6, 6)))
        like = make_field(rng.uniform(0, 1, size=(6, 6)))
        out = gainmap(cost, like, 0.0)
        np.testing.assert_array_equal(out.values, like.values)

    def test_blend_arithmetic(self):
        cost = make_field([[0.4]])
        like = make_field([[0.7]])
        out = gainmap(cost, like, 0.25)
        assert out.values[0, 0] == pytest.approx(0.675)

    def test_monotone_in_inputs(self, rng):
        base_cost = rng.uniform(0, 1, size=(5, 5))
        base_like = rng.uniform(0, 0.9, size=(5, 5))
        m0 = gainmap(make_field(base_cost), make_field(base_like), 0.5).values
        bumped = base_like.copy()
        bumped[2, 2] += 0.1
        m1 = gainmap(make_field(base_cost), make_field(bumped), 0.5).values
        assert m1[2, 2] > m0[2, 2]
        worse = base_cost.copy()
        worse[3, 3] = min(1.0, worse[3, 3] + 0.1)
        m2 = gainmap(make_field(worse), make_field(base_like), 0.5).values
        assert m2[3, 3] <= m0[3, 3]

    def test_geometry_mismatch(self):
        with pytest.raises(GeometryMismatch):
            gainmap(make_field(np.zeros((2, 2))), make_field(np.zeros((3, 2))), 0.5)

    def test_lambda_out_of_range(self):
        f = make_field(np.zeros((2, 2)))
        with pytest.raises(RangeViolation):
            gainmap(f, f, 1.5)

    def test_values_out_of_range_rejected(self):
        good = make_field(np.zeros((2, 2)))
        bad = make_field(np.full((2, 2), 1.2))
        with pytest.raises(RangeViolation):
            gainmap(bad, good, 0.5)


class TestSelectGoal:
    def test_single_peak_all_strategies_agree(self):
        values = np.zeros((9, 9))
        values[4, 6] = 1.0
        field = make_field(values, resolution=1.0)
        robot = Pose(0.5, 0.5, 0.0)
        expected = (6.5, 4.5)
        for variant in GoalVariant:
            goal = select_goal(field, robot, GoalStrategy(variant))
            assert goal == pytest.approx(expected)

    def test_nearest_vs_largest_region(self):
        values = np.zeros((10, 20))
        values[1, 1:4] = 1.0  # 3 cells near the robot
        values[2:9, 12:19] = 1.0  # 49 cells far away
        field = make_field(values, resolution=1.0)
        robot = Pose(0.0, 0.0, 0.0)
        near = select_goal(field, robot, GoalStrategy(GoalVariant.NEAREST_REGION))
        big = select_goal(field, robot, GoalStrategy(GoalVariant.LARGEST_REGION))
        assert near == pytest.approx((2.5, 1.5))
        assert big == pytest.approx((15.5, 5.5))

    def test_all_zero_map_has_no_goal(self):
        field = make_field(np.zeros((5, 5)))
        with pytest.raises(NoAffordantRegion):
            select_goal(field, Pose(1, 1, 0), GoalStrategy())

    def test_top_score_tie_breaks_to_smallest_row_col(self):
        values = np.zeros((4, 4))
        values[2, 3] = 1.0
        values[1, 1] = 1.0
        goal = select_goal(make_field(values, resolution=1.0), Pose(0, 0, 0), GoalStrategy())
        assert goal == pytest.approx((1.5, 1.5))

    def test_scale_invariance_of_top_score(self, rng):
        values = rng.uniform(0.1, 1.0, size=(7, 7))
        field = make_field(values)
        scaled = make_field(values * 0.37)
        a = select_goal(field, Pose(0.1, 0.1, 0), GoalStrategy())
        b = select_goal(scaled, Pose(0.1, 0.1, 0), GoalStrategy())
        assert a == pytest.approx(b)

    def test_threshold_validated(self):
        with pytest.raises(RangeViolation):
            GoalStrategy(region_threshold=0.0)
        with pytest.raises(RangeViolation):
            GoalStrategy(region_threshold=1.1)


class TestPlanPath:
    def test_uniform_gain_takes_chebyshev_optimal_steps(self):
        field = make_field(np.full((8, 8), 0.5))
        path = plan_path(field, (0, 0), (7, 3))
        assert len(path.cells) == 8  # max(|dc|, |dr|) + 1
        for (c0, r0), (c1, r1) in zip(path.cells, path.cells[1:]):
            assert max(abs(c1 - c0), abs(r1 - r0)) == 1

    def test_wall_with_gap_matches_dijkstra(self):
        values = np.full((7, 7), 0.8)
        values[:, 3] = 0.0
        values[5, 3] = 0.8  # the single gap
        field = make_field(values)
        path = plan_path(field, (0, 0), (6, 0))
        assert (3, 5) in path.cells
        oracle = dijkstra_cost(values, (0, 0), (6, 0))
        assert path.cost == oracle

    def test_start_equals_goal(self):
        values = np.full((4, 4), 0.6)
        field = make_field(values)
        path = plan_path(field, (2, 2), (2, 2))
        assert path.cells == ((2, 2),)
        assert path.cost == pytest.approx(1.0 - 0.6 + EPSILON)
        assert path.total_gain == pytest.approx(0.6)

    def test_blocked_goal_is_unreachable(self):
        values = np.full((5, 5), 0.5)
        values[2, 2] = 0.0
        with pytest.raises(Unreachable):
            plan_path(make_field(values), (0, 0), (2, 2))

    def test_disconnected_goal_is_unreachable(self):
        values = np.full((5, 5), 0.5)
        values[:, 2] = 0.0  # full wall
        with pytest.raises(Unreachable):
            plan_path(make_field(values), (0, 0), (4, 4))

    def test_out_of_bounds_cells_rejected(self):
        field = make_field(np.full((3, 3), 0.5))
        with pytest.raises(OutOfBounds):
            plan_path(field, (0, 0), (3, 3))

    def test_prefers_high_gain_route(self):
        # two corridors: the longer way around through high gain should win
        # over a short cut through low gain
        values = np.full((5, 5), 0.05)
        values[0, :] = 0.95
        values[:, 4] = 0.95
        field = make_field(values)
        path = plan_path(field, (0, 0), (4, 4))
        assert all(values[r, c] == 0.95 for c, r in path.cells)

    def test_random_instances_match_dijkstra_exactly(self, rng):
        matched = 0
        for trial in range(25):
            values = rng.uniform(0.0, 1.0, size=(10, 10))
            values[values < 0.25] = 0.0
            free = np.argwhere(values > 0.0)
            if len(free) < 2:
                continue
            pick = rng.choice(len(free), size=2, replace=False)
            start = (int(free[pick[0]][1]), int(free[pick[0]][0]))
            goal = (int(free[pick[1]][1]), int(free[pick[1]][0]))
            oracle = dijkstra_cost(values, start, goal)
            field = make_field(values)
            if oracle is None:
                with pytest.raises(Unreachable):
                    plan_path(field, start, goal)
                continue
            path = plan_path(field, start, goal)
            assert path.cost == oracle
            assert all(values[r, c] > 0.0 for c, r in path.cells)
            matched += 1
        assert matched >= 10  # sanity: enough solvable instances exercised
