"""Normalized shortest-path distance features for external policies.

One row per pursuer, one for the evader, one per exit (ascending id); column
``v`` of an agent row holds ``dist(v, agent) / diameter``, so an entry is
zero exactly where the agent stands. On collision-free states the feature
plus the acting agent's node id reconstructs the full state, which the
round-trip here enforces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MalformedFeatureError
from .game import GlobalState, PegSpec


@dataclass(frozen=True)
class StateFeature:
    matrix: np.ndarray  # (m + 1 + exits, n) float64 in [0, 1]
    acting_index: int  # node id of the acting pursuer
    acting_order: int  # which pursuer is acting, 1-based
    num_pursuers: int


def extract_feature(spec: PegSpec, s: GlobalState, acting_order: int = 1) -> StateFeature:
    """Distance rows for all agents and exits, normalized by graph diameter."""
    if spec.apsp.diameter <= 0:
        raise ValueError("distance feature undefined on a single-node graph")
    if not 1 <= acting_order <= spec.m:
        raise ValueError(f"acting order must lie in 1..{spec.m}")
    anchors = list(s.pursuers) + [s.evader] + list(spec.exits)
    matrix = spec.apsp.dist[np.array(anchors, dtype=np.int64)].astype(np.float64)
    matrix /= float(spec.apsp.diameter)
    matrix.setflags(write=False)
    return StateFeature(
        matrix=matrix,
        acting_index=s.pursuers[acting_order - 1],
        acting_order=acting_order,
        num_pursuers=spec.m,
    )


def reconstruct_state(feature: StateFeature) -> tuple[GlobalState, int]:
    """Invert :func:`extract_feature` by locating the zero of each agent row.

    Requires a collision-free source state: a duplicated zero within a row,
    a missing zero, or an ambiguous acting column all raise
    :class:`MalformedFeatureError`.
    """
    m = feature.num_pursuers
    positions = []
    for i in range(m + 1):
        zeros = np.flatnonzero(feature.matrix[i] == 0.0)
        if zeros.size != 1:
            raise MalformedFeatureError(
                f"agent row {i} has {zeros.size} zeros, expected exactly one"
            )
        positions.append(int(zeros[0]))
    pursuer_rows = np.flatnonzero(
        feature.matrix[:m, feature.acting_index] == 0.0
    )
    if pursuer_rows.size != 1:
        raise MalformedFeatureError(
            f"acting column {feature.acting_index} matches "
            f"{pursuer_rows.size} pursuer rows, expected exactly one"
        )
    order = int(pursuer_rows[0]) + 1
    return GlobalState(pursuers=tuple(positions[:m]), evader=positions[m]), order


def feature_payload(feature: StateFeature) -> dict:
    """Wire form used by the policy-exchange protocol."""
    return {
        "rows": [[float(x) for x in row] for row in feature.matrix],
        "c": feature.acting_index,
        "l": feature.acting_order,
    }
