import json
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_connected_graph
from pegsolve.errors import IllegalMoveError
from pegsolve.game import (
    GlobalState,
    closed_neighborhood,
    is_capture,
    is_escape,
    load_spec,
    make_spec,
    reward,
    spec_to_config,
    state_index,
    state_unindex,
    step,
)
from pegsolve.graph import build_graph, gen_grid, graph_to_text, parse_graph

P3 = parse_graph("nodes 3\nedge 0 1\nedge 1 2\n")


def p3_spec(**kw):
    kw.setdefault("capture_radius", 1)
    kw.setdefault("capture_threshold", 1)
    return make_spec(P3, kw.pop("m", 1), **kw)


class TestSpecDefaults:
    def test_no_exit_defaults(self):
        spec = make_spec(gen_grid(4, 4), 4)
        assert spec.capture_radius == 1
        assert spec.capture_threshold == 2  # ceil(4/2)
        assert spec.horizon == 128
        assert spec.discount == 0.99

    def test_multi_exit_defaults(self):
        spec = make_spec(gen_grid(4, 4), 5, exits=[0, 15])
        assert spec.capture_radius == 0
        assert spec.capture_threshold == 1
        assert spec.horizon == 10

    def test_disconnected_graph_rejected(self):
        g = build_graph(4, [(0, 1)])
        with pytest.raises(ValueError, match="connected"):
            make_spec(g, 1)

    def test_exit_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            make_spec(P3, 1, exits=[7])

    def test_threshold_bounds(self):
        with pytest.raises(ValueError):
            make_spec(P3, 2, capture_threshold=3)

    def test_fingerprint_sensitivity(self):
        a = p3_spec()
        b = p3_spec(horizon=64)
        c = p3_spec()
        assert a.fingerprint != b.fingerprint
        assert a.fingerprint == c.fingerprint
        assert a.with_exits([2]).fingerprint != a.fingerprint

    def test_grouping_partition_validated(self):
        with pytest.raises(ValueError, match="partition"):
            make_spec(gen_grid(3, 3), 4, grouping=[(0, 1), (1, 2)])


class TestMoves:
    def test_closed_neighborhood_middle(self):
        assert closed_neighborhood(P3, 1) == (0, 1, 2)

    def test_closed_neighborhood_end(self):
        assert closed_neighborhood(P3, 0) == (0, 1)

    def test_closed_neighborhood_isolated(self):
        g = build_graph(1, [])
        assert closed_neighborhood(g, 0) == (0,)

    def test_step(self):
        spec = p3_spec()
        assert step(spec, GlobalState((0,), 2), [1], 1) == GlobalState((1,), 1)

    def test_step_stay_identity(self):
        spec = p3_spec(m=2)
        s = GlobalState((0, 2), 1)
        assert step(spec, s, [0, 2], 1) == s

    def test_step_illegal_pursuer_names_agent(self):
        spec = p3_spec()
        with pytest.raises(IllegalMoveError) as err:
            step(spec, GlobalState((0,), 2), [2], 2)
        assert err.value.agent == 0

    def test_step_illegal_evader(self):
        spec = p3_spec()
        with pytest.raises(IllegalMoveError) as err:
            step(spec, GlobalState((0,), 2), [1], 0)
        assert err.value.agent == spec.m


class TestTermination:
    def test_capture_adjacent(self):
        spec = p3_spec()
        assert is_capture(spec, GlobalState((1,), 2))

    def test_no_capture_at_distance_two(self):
        spec = p3_spec(m=2)
        assert not is_capture(spec, GlobalState((0, 0), 2))

    def test_threshold_three_of_six(self):
        g = gen_grid(5, 5)
        spec = make_spec(g, 6)  # r=1, k=3
        evader = 12
        near = [7, 11, 13]  # adjacent to 12
        far = [0, 4, 24, 20]
        assert is_capture(spec, GlobalState(tuple(near + far[:3]), evader))
        assert not is_capture(spec, GlobalState(tuple(near[:2] + far), evader))

    def test_escape(self):
        spec = make_spec(gen_grid(3, 3), 1, exits=[5])
        assert is_escape(spec, 5)
        assert not is_escape(spec, 4)
        assert not is_escape(p3_spec(), 0)  # no-exit game

    def test_reward_capture_priority(self):
        g = gen_grid(3, 3)
        spec = make_spec(g, 1, exits=[4], capture_radius=1)
        both = GlobalState((4,), 4)  # on the exit, captured
        assert reward(spec, both) == 1
        flipped = make_spec(
            g, 1, exits=[4], capture_radius=1, capture_priority=False
        )
        assert reward(flipped, both) == -1

    def test_reward_values(self):
        spec = make_spec(gen_grid(3, 3), 1, exits=[8], capture_radius=1)
        assert reward(spec, GlobalState((1,), 0)) == 1
        assert reward(spec, GlobalState((0,), 8)) == -1
        assert reward(spec, GlobalState((0,), 5)) == 0

    def test_no_exit_reward_never_negative(self):
        spec = p3_spec()
        for p in range(3):
            for e in range(3):
                assert reward(spec, GlobalState((p,), e)) in (0, 1)


class TestStateIndex:
    def test_round_trip_exhaustive_small(self):
        for n in range(1, 7):
            for m in range(1, 4):
                count = n ** (m + 1)
                if count > 4000:
                    continue
                seen = set()
                for pursuers in product(range(n), repeat=m):
                    for e in range(n):
                        s = GlobalState(pursuers, e)
                        idx = state_index(n, m, s)
                        assert 0 <= idx < count
                        assert state_unindex(n, m, idx) == s
                        seen.add(idx)
                assert len(seen) == count

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 50), st.integers(1, 4), st.data())
    def test_round_trip_random(self, n, m, data):
        idx = data.draw(st.integers(0, n ** (m + 1) - 1))
        assert state_index(n, m, state_unindex(n, m, idx)) == idx

    def test_evader_digit_least_significant(self):
        s = GlobalState((2, 0), 1)
        assert state_index(3, 2, s) == (2 * 3 + 0) * 3 + 1


class TestConfig:
    def test_config_round_trip(self, tmp_path):
        g = gen_grid(4, 4)
        spec = make_spec(g, 3, exits=[1, 9], horizon=20, discount=0.95)
        (tmp_path / "g.graph").write_text(graph_to_text(g))
        doc = spec_to_config(spec, "g.graph")
        (tmp_path / "spec.json").write_text(json.dumps(doc))
        loaded = load_spec(tmp_path / "spec.json")
        assert loaded.fingerprint == spec.fingerprint

    def test_exits_default_from_graph_file(self, tmp_path):
        (tmp_path / "g.graph").write_text(graph_to_text(gen_grid(3, 3), exits=(2, 6)))
        (tmp_path / "spec.json").write_text(json.dumps({"graph": "g.graph", "m": 2}))
        spec = load_spec(tmp_path / "spec.json")
        assert spec.exits == (2, 6)

    def test_config_exits_override_graph_file(self, tmp_path):
        (tmp_path / "g.graph").write_text(graph_to_text(gen_grid(3, 3), exits=(2,)))
        (tmp_path / "spec.json").write_text(
            json.dumps({"graph": "g.graph", "m": 1, "exits": []})
        )
        assert load_spec(tmp_path / "spec.json").exits == ()


def test_step_positions_always_valid_fuzz():
    rng = np.random.default_rng(17)
    for _ in range(30):
        g = random_connected_graph(rng, int(rng.integers(2, 12)))
        spec = make_spec(g, int(rng.integers(1, 4)))
        n = spec.n
        s = GlobalState(
            tuple(int(x) for x in rng.integers(n, size=spec.m)), int(rng.integers(n))
        )
        a = [g.closed[p][int(rng.integers(len(g.closed[p])))] for p in s.pursuers]
        b = g.closed[s.evader][int(rng.integers(len(g.closed[s.evader])))]
        nxt = step(spec, s, a, b)
        assert all(0 <= p < n for p in nxt.pursuers) and 0 <= nxt.evader < n
