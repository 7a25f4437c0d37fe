"""Shared test utilities: independent oracles and instance generators.

Everything here is deliberately implemented by the dumbest correct method
available (per-source BFS, exhaustive enumeration) so it can certify the
production paths without sharing code with them.
"""

from __future__ import annotations

from collections import deque
from itertools import combinations, product

import numpy as np

from pegsolve.graph import INF_DIST, Graph, build_graph


def bfs_dists(g: Graph, src: int) -> list[int]:
    """Single-source distances by breadth-first search."""
    dist = [INF_DIST] * g.node_count
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if dist[v] == INF_DIST:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def random_connected_graph(rng, n: int, extra_edges: int | None = None) -> Graph:
    """Random tree plus extra edges; connected by construction."""
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.add((u, v))
    if extra_edges is None:
        extra_edges = int(rng.integers(0, max(1, n)))
    for _ in range(extra_edges):
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return build_graph(n, edges)


def random_graph(rng, n: int, p: float) -> Graph:
    """Erdos-Renyi style graph; may be disconnected."""
    edges = [
        (u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p
    ]
    return build_graph(n, edges)


def brute_force_max_matching(edges, left, right) -> int:
    """Maximum matching size by exhaustive search over edge subsets."""
    edges = list(edges)
    best = 0
    for r in range(min(len(left), len(right)), 0, -1):
        for subset in combinations(edges, r):
            ls = {e[0] for e in subset}
            rs = {e[1] for e in subset}
            if len(ls) == r and len(rs) == r:
                return r
    return best


def brute_force_partitions_23(m: int) -> list[frozenset]:
    """All set partitions of range(m) with parts of size 2 or 3, as
    frozensets of frozensets (order-free)."""
    items = tuple(range(m))

    def rec(remaining):
        if not remaining:
            return [frozenset()]
        first, rest = remaining[0], remaining[1:]
        out = []
        for size in (2, 3):
            for extra in combinations(rest, size - 1):
                part = frozenset((first, *extra))
                left = tuple(x for x in rest if x not in extra)
                for tail in rec(left):
                    out.append(tail | {part})
        return out

    return rec(items)


def minimax_tables(spec):
    """Per-state (max-min, min-max) of the steps table over one joint move,
    by direct enumeration. Used to identify states with a pure saddle."""
    from pegsolve.dp import STEPS_INF, solve_dp
    from pegsolve.game import GlobalState, state_unindex

    table = solve_dp(spec)
    n, m = spec.n, spec.m
    closed = spec.graph.closed
    maxmin = {}
    minmax = {}
    for idx in range(spec.state_count()):
        s = state_unindex(n, m, idx)
        replies = closed[s.evader]
        joints = list(product(*(closed[p] for p in s.pursuers)))
        worst_per_joint = [
            max(table.lookup(j, ne) for ne in replies) for j in joints
        ]
        best_per_reply = [
            min(table.lookup(j, ne) for j in joints) for ne in replies
        ]
        minmax[idx] = min(worst_per_joint)
        maxmin[idx] = max(best_per_reply)
    return table, maxmin, minmax


def has_pure_saddle_everywhere(spec) -> bool:
    """True when max-min equals min-max at every non-capture state (the
    pure-equilibrium hypothesis)."""
    from pegsolve.game import is_capture, state_unindex

    table, maxmin, minmax = minimax_tables(spec)
    for idx in range(spec.state_count()):
        s = state_unindex(spec.n, spec.m, idx)
        if is_capture(spec, s):
            continue
        if maxmin[idx] != minmax[idx]:
            return False
    return True
