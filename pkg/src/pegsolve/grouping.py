"""Team decomposition: scale the exact solver to many pursuers.

Large pursuer teams split into sub-teams of two or three; each sub-team
plays its own exact small-team policy on a shared sub-game table. The evader
cannot observe the split, so it scores every possible split and plays the
exact evader move inside the most threatening team of the least threatening
split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dp import DpTable, _evader_move, _pursuer_move, solve_dp
from .errors import QueryError
from .game import GlobalState, PegSpec, is_terminal, make_spec

Grouping = tuple[tuple[int, ...], ...]

#: refuse specs whose grouping count would make the evader query intractable
GROUPING_ENUM_CAP = 10_000


def enumerate_groupings(m: int) -> tuple[Grouping, ...]:
    """All partitions of pursuer indices ``0..m-1`` into teams of 2 and 3.

    Teams are unordered; each grouping lists its teams by smallest member,
    members ascending. Enumeration order is deterministic: the smallest
    unassigned index anchors a team of size 2 before size 3, partners in
    ascending combination order. Downstream tie-breaks rely on this order.
    """
    if m < 2:
        raise ValueError(f"grouping needs at least 2 pursuers, got {m}")
    out: list[Grouping] = []

    def recurse(remaining: tuple[int, ...], acc: tuple[tuple[int, ...], ...]):
        if not remaining:
            out.append(acc)
            return
        anchor, rest = remaining[0], remaining[1:]
        for size in (2, 3):
            if size == 3 and len(rest) < 2:
                continue
            if size == 2 and len(rest) < 1:
                continue
            if size == 2:
                for i in range(len(rest)):
                    team = (anchor, rest[i])
                    left = rest[:i] + rest[i + 1 :]
                    recurse(left, acc + (team,))
            else:
                for i in range(len(rest)):
                    for j in range(i + 1, len(rest)):
                        team = (anchor, rest[i], rest[j])
                        left = rest[:i] + rest[i + 1 : j] + rest[j + 1 :]
                        recurse(left, acc + (team,))

    recurse(tuple(range(m)), ())
    return tuple(out)


def sub_spec(spec: PegSpec, team_size: int) -> PegSpec:
    """Spec of the sub-game one team plays: same graph and radius, capture
    threshold ``ceil(team_size / 2)``."""
    return make_spec(
        spec.graph,
        team_size,
        capture_radius=spec.capture_radius,
        capture_threshold=math.ceil(team_size / 2),
        horizon=spec.horizon,
        discount=spec.discount,
        capture_priority=spec.capture_priority,
        apsp=spec.apsp,
    )


@dataclass(frozen=True)
class GroupedOracle:
    """Sub-game tables plus the fixed split the pursuer side uses."""

    spec2: PegSpec
    table2: DpTable
    spec3: PegSpec | None
    table3: DpTable | None
    grouping: Grouping

    def team_table(self, size: int) -> tuple[DpTable, PegSpec]:
        if size == 2:
            return self.table2, self.spec2
        if size == 3 and self.table3 is not None:
            return self.table3, self.spec3
        raise ValueError(f"no table for team size {size}")


def build_grouped_oracle(
    spec: PegSpec,
    grouping: Grouping | None = None,
    *,
    state_cap: int | None = None,
    backend: str | None = None,
) -> GroupedOracle:
    """Solve the 2-team (and, when any split needs one, 3-team) sub-games.

    The pursuer split defaults to the spec's override, else the first
    grouping in enumeration order.
    """
    groupings = enumerate_groupings(spec.m)
    if len(groupings) > GROUPING_ENUM_CAP:
        raise ValueError(
            f"{len(groupings)} groupings for m={spec.m} exceeds the "
            f"enumeration cap {GROUPING_ENUM_CAP}"
        )
    if grouping is None:
        grouping = spec.grouping if spec.grouping is not None else groupings[0]
    grouping = tuple(tuple(sorted(t)) for t in grouping)
    if grouping not in groupings:
        raise ValueError(f"grouping {grouping} is not a valid 2/3 split of m={spec.m}")

    kwargs = {}
    if state_cap is not None:
        kwargs["state_cap"] = state_cap
    if backend is not None:
        kwargs["backend"] = backend

    spec2 = sub_spec(spec, 2)
    table2 = solve_dp(spec2, **kwargs)
    spec3 = table3 = None
    if any(len(t) == 3 for g in groupings for t in g):
        spec3 = sub_spec(spec, 3)
        table3 = solve_dp(spec3, **kwargs)
    return GroupedOracle(
        spec2=spec2, table2=table2, spec3=spec3, table3=table3, grouping=grouping
    )


def _team_state(s: GlobalState, team: tuple[int, ...]) -> GlobalState:
    return GlobalState(
        pursuers=tuple(s.pursuers[i] for i in team), evader=s.evader
    )


def grouped_pursuer_action(
    oracle: GroupedOracle, spec: PegSpec, s: GlobalState
) -> tuple[int, ...]:
    """Each team plays its exact sub-game move; results merge by index."""
    if is_terminal(spec, s):
        raise QueryError(f"grouped pursuer queried at terminal state {s}")
    joint = [0] * spec.m
    for team in oracle.grouping:
        table, tspec = oracle.team_table(len(team))
        move = _pursuer_move(table, tspec, _team_state(s, team))
        for member, target in zip(team, move):
            joint[member] = target
    return tuple(joint)


def grouped_evader_action(
    oracle: GroupedOracle, spec: PegSpec, s: GlobalState
) -> int:
    """Minimax over every possible split the pursuers might be using.

    A split scores as the steps value of its slowest team (max over teams,
    infinity on top). The worst case for the evader is the split minimizing
    that score — even the most distant team closes in fast — so that split
    is selected (first in enumeration order on ties) and the evader plays
    the exact sub-game evader move against its slowest team (smallest team
    index on ties).
    """
    if is_terminal(spec, s):
        raise QueryError(f"grouped evader queried at terminal state {s}")
    best_score = None
    best_grouping = None
    for grouping in enumerate_groupings(spec.m):
        score = 0
        for team in grouping:
            table, _ = oracle.team_table(len(team))
            value = table.lookup(_team_state(s, team).pursuers, s.evader)
            if value > score:
                score = value
        if best_score is None or score < best_score:
            best_score = score
            best_grouping = grouping
    target_team = None
    target_value = -1
    for team in best_grouping:
        table, _ = oracle.team_table(len(team))
        value = table.lookup(_team_state(s, team).pursuers, s.evader)
        if value > target_value:
            target_value = value
            target_team = team
    table, tspec = oracle.team_table(len(target_team))
    return _evader_move(table, tspec, _team_state(s, target_team))
