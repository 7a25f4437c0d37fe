"""Game definition, state encoding, simultaneous moves, termination rules.

A game couples a connected graph with ``m`` pursuers, one evader, a capture
rule (at least ``capture_threshold`` pursuers within graph distance
``capture_radius`` of the evader), an optional exit set where the evader wins
on arrival, a step horizon, and a discount factor.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

from .errors import IllegalMoveError
from .graph import ApspTable, Graph, compute_apsp, parse_graph_with_exits


class GlobalState(NamedTuple):
    """Joint position: ordered pursuer nodes plus the evader node."""

    pursuers: tuple[int, ...]
    evader: int


@dataclass(frozen=True)
class PegSpec:
    """Immutable game definition. Build through :func:`make_spec`."""

    graph: Graph
    apsp: ApspTable
    m: int
    capture_radius: int
    capture_threshold: int
    exits: tuple[int, ...]
    horizon: int
    discount: float
    capture_priority: bool = True  # capture beats escape when both fire
    grouping: tuple[tuple[int, ...], ...] | None = None  # pursuer team override

    @property
    def has_exits(self) -> bool:
        return bool(self.exits)

    @property
    def n(self) -> int:
        return self.graph.node_count

    def state_count(self) -> int:
        return self.n ** (self.m + 1)

    @cached_property
    def fingerprint(self) -> str:
        """32-hex-digit digest over everything that defines the game."""
        payload = {
            "nodes": self.n,
            "edges": sorted(self.graph.edges),
            "m": self.m,
            "capture_radius": self.capture_radius,
            "capture_threshold": self.capture_threshold,
            "exits": list(self.exits),
            "horizon": self.horizon,
            "discount": repr(self.discount),
            "capture_priority": self.capture_priority,
        }
        blob = json.dumps(payload, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:32]

    def with_exits(self, exits) -> PegSpec:
        return replace(self, exits=tuple(sorted(set(exits))))


def make_spec(
    graph: Graph,
    m: int,
    *,
    exits=(),
    capture_radius: int | None = None,
    capture_threshold: int | None = None,
    horizon: int | None = None,
    discount: float = 0.99,
    capture_priority: bool = True,
    grouping=None,
    apsp: ApspTable | None = None,
) -> PegSpec:
    """Validate arguments, fill mode-dependent defaults, precompute distances.

    Defaults: no-exit games use radius 1 (adjacency capture), threshold
    ``ceil(m/2)``, horizon 128; multi-exit games use radius 0 with threshold 1
    (overlap capture) and horizon 10.
    """
    if m < 1:
        raise ValueError(f"pursuer count must be >= 1, got {m}")
    if not graph.is_connected():
        raise ValueError("game graph must be connected")
    exits = tuple(sorted({int(x) for x in exits}))
    for x in exits:
        if not 0 <= x < graph.node_count:
            raise ValueError(f"exit {x} out of range")
    has_exits = bool(exits)
    if capture_radius is None:
        capture_radius = 0 if has_exits else 1
    if capture_threshold is None:
        capture_threshold = 1 if has_exits else math.ceil(m / 2)
    if horizon is None:
        horizon = 10 if has_exits else 128
    if capture_radius < 0:
        raise ValueError("capture radius must be >= 0")
    if not 1 <= capture_threshold <= m:
        raise ValueError(f"capture threshold must be in 1..{m}")
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must lie in (0, 1)")
    if grouping is not None:
        grouping = tuple(tuple(sorted(team)) for team in grouping)
        members = sorted(i for team in grouping for i in team)
        if members != list(range(m)):
            raise ValueError("grouping must partition pursuer indices 0..m-1")
    if apsp is None:
        apsp = compute_apsp(graph)
    return PegSpec(
        graph=graph,
        apsp=apsp,
        m=m,
        capture_radius=capture_radius,
        capture_threshold=capture_threshold,
        exits=exits,
        horizon=horizon,
        discount=discount,
        capture_priority=capture_priority,
        grouping=grouping,
    )


# ---------------------------------------------------------------------------
# moves and termination


def closed_neighborhood(g: Graph, v: int) -> tuple[int, ...]:
    """Legal move targets from ``v``: neighbors plus ``v`` itself, ascending."""
    return g.closed[v]


def is_capture(spec: PegSpec, s: GlobalState) -> bool:
    """Termination by pursuit: enough pursuers within the capture radius."""
    row = spec.apsp.dist[:, s.evader]
    hits = sum(1 for p in s.pursuers if row[p] <= spec.capture_radius)
    return hits >= spec.capture_threshold


def is_escape(spec: PegSpec, evader: int) -> bool:
    """Termination by evasion: the evader stands on an exit."""
    return evader in spec.exits


def is_terminal(spec: PegSpec, s: GlobalState) -> bool:
    return is_capture(spec, s) or is_escape(spec, s.evader)


def step(spec: PegSpec, s: GlobalState, a, b: int) -> GlobalState:
    """Apply a simultaneous joint move; both sides commit unseen.

    ``a`` is one target per pursuer, ``b`` the evader target. Targets must lie
    in the mover's closed neighborhood; there is no collision rule.
    """
    a = tuple(a)
    if len(a) != spec.m:
        raise IllegalMoveError(
            f"expected {spec.m} pursuer targets, got {len(a)}", agent=0
        )
    closed = spec.graph.closed
    for i, (src, dst) in enumerate(zip(s.pursuers, a)):
        if dst not in closed[src]:
            raise IllegalMoveError(
                f"pursuer {i} cannot move {src} -> {dst}", agent=i
            )
    if b not in closed[s.evader]:
        raise IllegalMoveError(
            f"evader cannot move {s.evader} -> {b}", agent=spec.m
        )
    return GlobalState(pursuers=a, evader=b)


def reward(spec: PegSpec, s_next: GlobalState) -> int:
    """+1 on capture, -1 on escape, 0 otherwise, evaluated post-move.

    When both conditions fire at once the ``capture_priority`` flag decides.
    """
    captured = is_capture(spec, s_next)
    escaped = is_escape(spec, s_next.evader)
    if spec.capture_priority:
        if captured:
            return 1
        if escaped:
            return -1
    else:
        if escaped:
            return -1
        if captured:
            return 1
    return 0


# ---------------------------------------------------------------------------
# state indexing (mixed radix base n, evader digit least significant)


def state_index(n: int, m: int, s: GlobalState) -> int:
    idx = 0
    for p in s.pursuers:
        idx = idx * n + p
    return idx * n + s.evader


def state_unindex(n: int, m: int, idx: int) -> GlobalState:
    evader = idx % n
    rest = idx // n
    pursuers = [0] * m
    for i in range(m - 1, -1, -1):
        pursuers[i] = rest % n
        rest //= n
    return GlobalState(pursuers=tuple(pursuers), evader=evader)


# ---------------------------------------------------------------------------
# spec config documents


def spec_to_config(spec: PegSpec, graph_path: str) -> dict:
    """Config document referencing the graph by path."""
    doc = {
        "graph": graph_path,
        "m": spec.m,
        "capture_radius": spec.capture_radius,
        "capture_threshold": spec.capture_threshold,
        "exits": list(spec.exits),
        "horizon": spec.horizon,
        "discount": spec.discount,
        "capture_priority": spec.capture_priority,
    }
    if spec.grouping is not None:
        doc["grouping"] = [list(team) for team in spec.grouping]
    return doc


def load_spec(path) -> PegSpec:
    """Load a spec config (JSON) and its referenced graph file.

    Relative graph paths resolve against the config file's directory. Exits
    default to the ones recorded in the graph file unless the config
    overrides them.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    graph_path = Path(doc["graph"])
    if not graph_path.is_absolute():
        graph_path = path.parent / graph_path
    graph, file_exits = parse_graph_with_exits(graph_path.read_text())
    exits = doc.get("exits", None)
    if exits is None:
        exits = file_exits
    return make_spec(
        graph,
        int(doc["m"]),
        exits=exits,
        capture_radius=doc.get("capture_radius"),
        capture_threshold=doc.get("capture_threshold"),
        horizon=doc.get("horizon"),
        discount=float(doc.get("discount", 0.99)),
        capture_priority=bool(doc.get("capture_priority", True)),
        grouping=doc.get("grouping"),
    )
