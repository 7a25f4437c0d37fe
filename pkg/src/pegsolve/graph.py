"""Undirected game graphs: construction, parsing, generation, shortest paths.

Node ids are dense integers ``0..n-1``. Adjacency lists are kept sorted
ascending; every downstream tie-break (policy argmins, matchings, samplers)
leans on that ordering, so it is part of the contract, not a cosmetic choice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GraphParseError

#: Distance sentinel for unreachable pairs. A dedicated value (max int32),
#: never produced by real path lengths; use :func:`dist_add` to combine.
INF_DIST = 2**31 - 1


def dist_add(a: int, b: int) -> int:
    """Length of a concatenated walk, absorbing on :data:`INF_DIST`."""
    if a >= INF_DIST or b >= INF_DIST:
        return INF_DIST
    return a + b


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with sorted adjacency.

    Invariants: no self-loops, no duplicate edges, adjacency symmetric and
    sorted ascending. Immutable after construction and safe to share.
    """

    node_count: int
    edges: frozenset[tuple[int, int]]  # each stored as (min, max)
    adjacency: tuple[tuple[int, ...], ...]

    @cached_property
    def closed(self) -> tuple[tuple[int, ...], ...]:
        """Closed neighborhoods (node plus neighbors), sorted ascending."""
        return tuple(
            tuple(sorted((v, *nbrs))) for v, nbrs in enumerate(self.adjacency)
        )

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def is_connected(self) -> bool:
        if self.node_count == 0:
            return True
        seen = [False] * self.node_count
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.node_count


def build_graph(node_count: int, edges) -> Graph:
    """Validate an edge list and assemble a :class:`Graph`.

    Raises ``ValueError`` on self-loops, duplicates, or out-of-range ids.
    """
    if node_count < 1:
        raise ValueError(f"node count must be positive, got {node_count}")
    seen: set[tuple[int, int]] = set()
    adj: list[list[int]] = [[] for _ in range(node_count)]
    for u, v in edges:
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise ValueError(f"edge ({u},{v}) out of range for {node_count} nodes")
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise ValueError(f"duplicate edge ({key[0]},{key[1]})")
        seen.add(key)
        adj[u].append(v)
        adj[v].append(u)
    return Graph(
        node_count=node_count,
        edges=frozenset(seen),
        adjacency=tuple(tuple(sorted(a)) for a in adj),
    )


# ---------------------------------------------------------------------------
# parsing


def parse_graph(text: str) -> Graph:
    """Parse a graph file (line-oriented text or the JSON equivalent)."""
    return parse_graph_with_exits(text)[0]


def parse_graph_with_exits(text: str) -> tuple[Graph, tuple[int, ...]]:
    """Parse a graph file, also returning any exit ids it records.

    Two formats are accepted: the line-oriented text format (``nodes``,
    optional ``exits``, ``edge`` lines, ``#`` comments) and a JSON document
    with fields ``nodes``, ``edges``, optional ``exits``.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _parse_json(text)
    return _parse_text(text)


def _parse_json(text: str) -> tuple[Graph, tuple[int, ...]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"invalid JSON graph document: {exc}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise GraphParseError("JSON graph document must carry a 'nodes' field")
    n = doc["nodes"]
    if not isinstance(n, int) or n < 1:
        raise GraphParseError(f"'nodes' must be a positive integer, got {n!r}")
    edges = doc.get("edges", [])
    pairs = []
    for e in edges:
        if not (isinstance(e, (list, tuple)) and len(e) == 2):
            raise GraphParseError(f"edge entry {e!r} is not a pair")
        pairs.append((int(e[0]), int(e[1])))
    try:
        g = build_graph(n, pairs)
    except ValueError as exc:
        raise GraphParseError(str(exc)) from exc
    exits = _check_exits(doc.get("exits", []), n)
    return g, exits


def _parse_text(text: str) -> tuple[Graph, tuple[int, ...]]:
    n: int | None = None
    exits: tuple[int, ...] = ()
    pairs: list[tuple[int, int]] = []
    edge_lines: list[int] = []
    exits_line: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0]
        try:
            args = [int(t) for t in tokens[1:]]
        except ValueError:
            raise GraphParseError(f"non-integer token in {line!r}", lineno) from None
        if keyword == "nodes":
            if n is not None:
                raise GraphParseError("duplicate 'nodes' header", lineno)
            if len(args) != 1 or args[0] < 1:
                raise GraphParseError("'nodes' expects one positive integer", lineno)
            n = args[0]
        elif keyword == "exits":
            if n is None:
                raise GraphParseError("'exits' before 'nodes' header", lineno)
            exits_line = lineno
            exits = tuple(args)
        elif keyword == "edge":
            if n is None:
                raise GraphParseError("'edge' before 'nodes' header", lineno)
            if len(args) != 2:
                raise GraphParseError("'edge' expects two node ids", lineno)
            pairs.append((args[0], args[1]))
            edge_lines.append(lineno)
        else:
            raise GraphParseError(f"unknown keyword {keyword!r}", lineno)
    if n is None:
        raise GraphParseError("missing 'nodes' header")
    # rebuild incrementally so errors can name the offending line
    seen: set[tuple[int, int]] = set()
    for (u, v), lineno in zip(pairs, edge_lines):
        if not (0 <= u < n and 0 <= v < n):
            raise GraphParseError(f"edge ({u},{v}) out of range for {n} nodes", lineno)
        if u == v:
            raise GraphParseError(f"self-loop at node {u}", lineno)
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise GraphParseError(f"duplicate edge ({key[0]},{key[1]})", lineno)
        seen.add(key)
    try:
        exits = _check_exits(exits, n)
    except GraphParseError as exc:
        raise GraphParseError(str(exc), exits_line) from None
    return build_graph(n, pairs), exits


def _check_exits(raw, n: int) -> tuple[int, ...]:
    exits = sorted({int(x) for x in raw})
    for x in exits:
        if not 0 <= x < n:
            raise GraphParseError(f"exit id {x} out of range for {n} nodes")
    return tuple(exits)


def graph_to_text(g: Graph, exits: tuple[int, ...] = ()) -> str:
    """Serialize to the line-oriented format (deterministic edge order)."""
    lines = [f"nodes {g.node_count}"]
    if exits:
        lines.append("exits " + " ".join(str(x) for x in sorted(exits)))
    for u, v in sorted(g.edges):
        lines.append(f"edge {u} {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# generators


def gen_grid(width: int, height: int) -> Graph:
    """4-connected lattice; node id = row * width + col."""
    if width < 1 or height < 1:
        raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
    edges = []
    for r in range(height):
        for c in range(width):
            v = r * width + c
            if c + 1 < width:
                edges.append((v, v + 1))
            if r + 1 < height:
                edges.append((v, v + width))
    return build_graph(width * height, edges)


def gen_scale_free(n: int, attach: int, seed: int) -> Graph:
    """Barabasi-Albert preferential attachment graph.

    Starts from a complete graph on ``attach`` nodes; every later node links
    to ``attach`` distinct existing nodes, sampled proportionally to current
    degree. Deterministic for a fixed seed, always connected.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if attach < 1 or attach >= n:
        raise ValueError(f"attach must satisfy 1 <= attach < n, got {attach}")
    rng = np.random.Generator(np.random.PCG64(seed))
    edges: list[tuple[int, int]] = []
    # one slot per endpoint; sampling an index uniformly = degree-proportional
    slots: list[int] = []
    for u in range(attach):
        for v in range(u + 1, attach):
            edges.append((u, v))
            slots.extend((u, v))
    if attach == 1:
        slots.append(0)  # lone seed node has degree 0; give it one slot
    for new in range(attach, n):
        targets: set[int] = set()
        while len(targets) < attach:
            targets.add(slots[int(rng.integers(len(slots)))])
        for t in sorted(targets):
            edges.append((t, new))
            slots.extend((t, new))
    return build_graph(n, edges)


# ---------------------------------------------------------------------------
# all-pairs shortest paths


@dataclass(frozen=True)
class ApspTable:
    """All-pairs shortest path distances with :data:`INF_DIST` for unreachable."""

    dist: np.ndarray  # (n, n) int32, read-only
    diameter: int

    def d(self, u: int, v: int) -> int:
        return int(self.dist[u, v])


def compute_apsp(g: Graph) -> ApspTable:
    """Exact unweighted distances via the cubic Floyd recurrence."""
    n = g.node_count
    # any finite path length is < n, so n acts as "unreachable" during the
    # sweep without overflow; swapped for the real sentinel afterwards
    dist = np.full((n, n), n, dtype=np.int32)
    np.fill_diagonal(dist, 0)
    for u, v in g.edges:
        dist[u, v] = 1
        dist[v, u] = 1
    for k in range(n):
        np.minimum(dist, dist[:, k, None] + dist[None, k, :], out=dist)
    unreachable = dist >= n
    diameter = 0 if unreachable.all() else int(dist[~unreachable].max())
    dist[unreachable] = INF_DIST
    dist.setflags(write=False)
    return ApspTable(dist=dist, diameter=diameter)
