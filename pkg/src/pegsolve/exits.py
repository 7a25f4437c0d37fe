"""Exit-blocking heuristic for multi-exit games.

Per state, build a bipartite graph between exits and pursuers (edge when the
pursuer can reach the exit no later than the evader), drop isolated vertices,
sort the surviving exits by distance to the evader, and find the longest
prefix of nearest exits that a matching can block simultaneously. Matched
pursuers march on their exits, leftovers shadow the evader or crowd the
nearest blockable exit; the evader beelines to an unblockable exit when one
exists, otherwise to the nearest unoccupied one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ModeError, QueryError
from .game import GlobalState, PegSpec, is_terminal


@dataclass(frozen=True)
class ExitMatchState:
    """Per-state bipartite structure behind both heuristic policies.

    ``edges`` maps exit node -> pursuer indices able to block it (ascending).
    ``exit_order`` holds the blockable exits sorted by distance to the evader
    (ties by node id). ``k`` and ``matching`` are filled by the prefix
    matching step; fresh output of :func:`build_bipartite` has them empty.
    """

    exit_order: tuple[int, ...]
    edges: dict[int, tuple[int, ...]]
    removed_exits: tuple[int, ...]
    idle_pursuers: tuple[int, ...]
    k: int = 0
    matching: dict[int, int] | None = None


def build_bipartite(spec: PegSpec, s: GlobalState) -> ExitMatchState:
    """Edges, pruning, and exit ordering only (no matching yet)."""
    if not spec.has_exits:
        raise ModeError("exit heuristic needs a spec with exits")
    dist = spec.apsp.dist
    edges: dict[int, tuple[int, ...]] = {}
    removed = []
    covered_pursuers: set[int] = set()
    for x in spec.exits:
        evader_d = int(dist[s.evader, x])
        qualifying = tuple(
            i for i, p in enumerate(s.pursuers) if int(dist[p, x]) <= evader_d
        )
        if qualifying:
            edges[x] = qualifying
            covered_pursuers.update(qualifying)
        else:
            removed.append(x)
    idle = tuple(i for i in range(spec.m) if i not in covered_pursuers)
    order = sorted(edges, key=lambda x: (int(dist[s.evader, x]), x))
    return ExitMatchState(
        exit_order=tuple(order),
        edges=edges,
        removed_exits=tuple(removed),
        idle_pursuers=idle,
    )


def max_bipartite_matching(edges, left, right) -> dict:
    """Maximum-cardinality matching via augmenting paths (Kuhn).

    ``edges`` is an iterable of (left, right) pairs. Deterministic: left
    vertices are processed in the given order, neighbors ascending. Returns
    a left -> right assignment.
    """
    adjacency: dict = {l: [] for l in left}
    for l, r in edges:
        adjacency[l].append(r)
    for l in adjacency:
        adjacency[l] = sorted(set(adjacency[l]))
    match_right: dict = {}

    def augment(l, visited) -> bool:
        for r in adjacency[l]:
            if r in visited:
                continue
            visited.add(r)
            if r not in match_right or augment(match_right[r], visited):
                match_right[r] = l
                return True
        return False

    for l in left:
        augment(l, set())
    return {l: r for r, l in match_right.items()}


def max_prefix_perfect_matching(state: ExitMatchState) -> tuple[int, dict[int, int]]:
    """Longest nearest-exit prefix that can be fully blocked, plus a matching.

    Grows the prefix one exit at a time, augmenting incrementally; a failed
    augmentation leaves the matching untouched, and blockability of a prefix
    is monotone, so the first failure pins the maximum ``k``.
    """
    adjacency = state.edges
    match_right: dict[int, int] = {}  # pursuer -> exit

    def augment(x, visited) -> bool:
        for p in adjacency[x]:
            if p in visited:
                continue
            visited.add(p)
            if p not in match_right or augment(match_right[p], visited):
                match_right[p] = x
                return True
        return False

    k = 0
    for x in state.exit_order:
        if not augment(x, set()):
            break
        k += 1
    return k, {x: p for p, x in match_right.items()}


def match_exits(spec: PegSpec, s: GlobalState) -> ExitMatchState:
    """Full per-state analysis: bipartite build plus prefix matching."""
    state = build_bipartite(spec, s)
    k, matching = max_prefix_perfect_matching(state)
    return ExitMatchState(
        exit_order=state.exit_order,
        edges=state.edges,
        removed_exits=state.removed_exits,
        idle_pursuers=state.idle_pursuers,
        k=k,
        matching=matching,
    )


def next_hop(spec: PegSpec, v: int, target: int) -> int:
    """One step along a shortest path: smallest-id neighbor strictly closer
    to the target; stay when already there."""
    if v == target:
        return v
    dist = spec.apsp.dist
    want = int(dist[v, target]) - 1
    for u in spec.graph.adjacency[v]:
        if int(dist[u, target]) == want:
            return u
    raise AssertionError(f"no descent from {v} toward {target}")


def heuristic_pursuer_action(spec: PegSpec, s: GlobalState) -> tuple[int, ...]:
    """Matched pursuers head for their exits; edged-but-unmatched ones crowd
    the nearest exit they can still block; isolated ones chase the evader."""
    if is_terminal(spec, s):
        raise QueryError(f"exit-heuristic pursuer queried at terminal state {s}")
    analysis = match_exits(spec, s)
    assigned = {p: x for x, p in analysis.matching.items()}
    rank = {x: i for i, x in enumerate(analysis.exit_order)}
    joint = []
    for i, pos in enumerate(s.pursuers):
        if i in assigned:
            joint.append(next_hop(spec, pos, assigned[i]))
        elif i in analysis.idle_pursuers:
            joint.append(next_hop(spec, pos, s.evader))
        else:
            target = min(
                (x for x, ps in analysis.edges.items() if i in ps),
                key=lambda x: rank[x],
            )
            joint.append(next_hop(spec, pos, target))
    return tuple(joint)


def heuristic_evader_action(spec: PegSpec, s: GlobalState) -> int:
    """Beeline to the nearest unblockable exit, else the nearest unoccupied
    one; when every exit is occupied, back away from the nearest pursuer."""
    if is_terminal(spec, s):
        raise QueryError(f"exit-heuristic evader queried at terminal state {s}")
    analysis = build_bipartite(spec, s)
    dist = spec.apsp.dist
    if analysis.removed_exits:
        target = min(
            analysis.removed_exits, key=lambda x: (int(dist[s.evader, x]), x)
        )
        return next_hop(spec, s.evader, target)
    occupied = set(s.pursuers)
    free = [x for x in spec.exits if x not in occupied]
    if free:
        target = min(free, key=lambda x: (int(dist[s.evader, x]), x))
        return next_hop(spec, s.evader, target)
    # every exit is occupied: maximize distance to the nearest pursuer
    def clearance(u: int) -> int:
        return min(int(dist[u, p]) for p in s.pursuers)

    moves = spec.graph.closed[s.evader]
    best = moves[0]
    for u in moves[1:]:
        if clearance(u) > clearance(best):
            best = u
    return best
