import numpy as np
import pytest

from helpers import brute_force_partitions_23, random_connected_graph
from pegsolve.dp import STEPS_INF, solve_dp
from pegsolve.errors import QueryError
from pegsolve.game import GlobalState, is_terminal, make_spec
from pegsolve.graph import gen_grid
from pegsolve.grouping import (
    build_grouped_oracle,
    enumerate_groupings,
    grouped_evader_action,
    grouped_pursuer_action,
    sub_spec,
)


class TestEnumeration:
    def test_counts_vs_brute_force(self):
        for m in range(2, 9):
            got = enumerate_groupings(m)
            brute = brute_force_partitions_23(m)
            assert len(got) == len({frozenset(map(frozenset, g)) for g in got})
            assert {frozenset(map(frozenset, g)) for g in got} == set(brute)

    def test_known_counts(self):
        for m, count in [(2, 1), (3, 1), (4, 3), (5, 10), (6, 25), (7, 105)]:
            assert len(enumerate_groupings(m)) == count

    def test_m6_shapes(self):
        shapes = [tuple(sorted(len(t) for t in g)) for g in enumerate_groupings(6)]
        assert shapes.count((2, 2, 2)) == 15
        assert shapes.count((3, 3)) == 10

    def test_first_grouping_is_index_pairs(self):
        assert enumerate_groupings(6)[0] == ((0, 1), (2, 3), (4, 5))
        assert enumerate_groupings(5)[0] == ((0, 1), (2, 3, 4))

    def test_small_m_rejected(self):
        with pytest.raises(ValueError):
            enumerate_groupings(1)


class TestSubSpec:
    def test_thresholds(self):
        spec = make_spec(gen_grid(4, 4), 6)
        assert sub_spec(spec, 2).capture_threshold == 1
        assert sub_spec(spec, 3).capture_threshold == 2
        assert sub_spec(spec, 2).capture_radius == spec.capture_radius

    def test_oracle_builds_table3_only_when_needed(self):
        spec4 = make_spec(gen_grid(3, 3), 4, capture_radius=0)
        oracle4 = build_grouped_oracle(spec4)
        assert oracle4.table3 is None  # 4 = 2+2 only
        spec5 = make_spec(gen_grid(3, 3), 5, capture_radius=0)
        oracle5 = build_grouped_oracle(spec5)
        assert oracle5.table3 is not None


@pytest.fixture(scope="module")
def grid_setup():
    g = gen_grid(4, 4)
    spec = make_spec(g, 4, capture_radius=1)  # k = 2
    oracle = build_grouped_oracle(spec)
    return spec, oracle


class TestGroupedActions:
    def test_pursuer_teams_play_their_exact_moves(self, grid_setup):
        spec, oracle = grid_setup
        from pegsolve.dp import _pursuer_move

        rng = np.random.default_rng(4)
        for _ in range(40):
            s = GlobalState(
                tuple(int(x) for x in rng.integers(16, size=4)), int(rng.integers(16))
            )
            if is_terminal(spec, s):
                continue
            joint = grouped_pursuer_action(oracle, spec, s)
            for team in oracle.grouping:
                sub = GlobalState(tuple(s.pursuers[i] for i in team), s.evader)
                table, tspec = oracle.team_table(len(team))
                expect = _pursuer_move(table, tspec, sub)
                assert tuple(joint[i] for i in team) == expect

    def test_team_relabeling_leaves_joint_move_unchanged(self, grid_setup):
        spec, oracle = grid_setup
        from pegsolve.grouping import GroupedOracle

        relabeled = GroupedOracle(
            spec2=oracle.spec2,
            table2=oracle.table2,
            spec3=oracle.spec3,
            table3=oracle.table3,
            grouping=tuple(reversed(oracle.grouping)),
        )
        rng = np.random.default_rng(5)
        for _ in range(20):
            s = GlobalState(
                tuple(int(x) for x in rng.integers(16, size=4)), int(rng.integers(16))
            )
            if is_terminal(spec, s):
                continue
            assert grouped_pursuer_action(oracle, spec, s) == grouped_pursuer_action(
                relabeled, spec, s
            )

    def test_m2_reduces_to_exact_dp(self):
        g = gen_grid(3, 3)
        spec = make_spec(g, 2, capture_radius=0)
        oracle = build_grouped_oracle(spec)
        from pegsolve.dp import dp_evader_action, dp_pursuer_action

        exact = solve_dp(spec)
        rng = np.random.default_rng(6)
        for _ in range(60):
            s = GlobalState(
                tuple(int(x) for x in rng.integers(9, size=2)), int(rng.integers(9))
            )
            if is_terminal(spec, s):
                continue
            assert grouped_pursuer_action(oracle, spec, s) == dp_pursuer_action(
                exact, spec, s
            )
            assert grouped_evader_action(oracle, spec, s) == dp_evader_action(
                exact, spec, s
            )

    def test_m3_reduces_to_exact_dp(self):
        g = gen_grid(3, 3)
        spec = make_spec(g, 3, capture_radius=1)  # k = 2 = sub-threshold of a 3-team
        oracle = build_grouped_oracle(spec)
        from pegsolve.dp import dp_evader_action, dp_pursuer_action

        exact = solve_dp(spec)
        rng = np.random.default_rng(7)
        for _ in range(60):
            s = GlobalState(
                tuple(int(x) for x in rng.integers(9, size=3)), int(rng.integers(9))
            )
            if is_terminal(spec, s):
                continue
            assert grouped_pursuer_action(oracle, spec, s) == dp_pursuer_action(
                exact, spec, s
            )
            assert grouped_evader_action(oracle, spec, s) == dp_evader_action(
                exact, spec, s
            )

    def test_evader_flees_slowest_team(self):
        # two pursuers boxed next to the evader, two far away: under every
        # grouping that pairs the near ones together, the far team dominates
        g = gen_grid(6, 1)  # path 0-1-2-3-4-5
        spec = make_spec(g, 4, capture_radius=0, capture_threshold=1)
        oracle = build_grouped_oracle(spec)
        s = GlobalState((4, 5, 0, 0), 3)
        scores = []
        for grouping in enumerate_groupings(4):
            vals = [
                oracle.table2.lookup(tuple(s.pursuers[i] for i in t), s.evader)
                for t in grouping
            ]
            scores.append(max(vals))
        from pegsolve.dp import _evader_move

        best = min(range(len(scores)), key=lambda i: scores[i])
        grouping = enumerate_groupings(4)[best]
        vals = [
            oracle.table2.lookup(tuple(s.pursuers[i] for i in t), s.evader)
            for t in grouping
        ]
        team = grouping[int(np.argmax(vals))]
        expected = _evader_move(
            oracle.table2,
            oracle.spec2,
            GlobalState(tuple(s.pursuers[i] for i in team), s.evader),
        )
        assert grouped_evader_action(oracle, spec, s) == expected

    def test_terminal_rejected(self, grid_setup):
        spec, oracle = grid_setup
        captured = GlobalState((1, 4, 15, 15), 0)  # two adjacent to 0
        assert is_terminal(spec, captured)
        with pytest.raises(QueryError):
            grouped_pursuer_action(oracle, spec, captured)
        with pytest.raises(QueryError):
            grouped_evader_action(oracle, spec, captured)


def test_grouped_team_values_match_sub_tables():
    rng = np.random.default_rng(11)
    g = random_connected_graph(rng, 7)
    spec = make_spec(g, 5, capture_radius=1)
    oracle = build_grouped_oracle(spec)
    t2 = solve_dp(sub_spec(spec, 2))
    t3 = solve_dp(sub_spec(spec, 3))
    assert (oracle.table2.steps == t2.steps).all()
    assert (oracle.table3.steps == t3.steps).all()
