"""Retrograde pursuit-step table, minimax policies, and the value-iteration
cross-check.

``solve_dp`` computes, for every joint state, the minimum number of steps
within which the pursuers can force capture under optimal simultaneous play
(0xFFFF encodes "never"). Seeding puts every capture state at 0; a FIFO queue
then expands backwards: when a popped state ``(s_p, s_e)`` certifies that all
evader moves out of some neighbor ``n_e`` are already won for pursuer
position ``s_p``, every joint predecessor ``(n_p, n_e)`` still unsolved gets
the popped value plus one. Each state enters the queue at most once and
popped values never decrease.

Policies derive from the table on demand: the pursuer minimizes the worst
reply, the evader maximizes the worst case (with value-if-pursuers-hold as a
deterministic tie-break, see ``dp_evader_action``). ``value_iteration_oracle``
solves the same game by a synchronous Bellman minimax operator and exists
purely to certify the table: ``discount ** steps`` must match it everywhere.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from time import perf_counter

import numpy as np

from . import _dppure
from .errors import CapacityError, FingerprintMismatchError, ModeError, QueryError
from .game import GlobalState, PegSpec, is_terminal

try:  # compiled kernel is optional; the pure twin covers small instances
    from . import _dpcore
except ImportError:  # pragma: no cover - depends on build environment
    _dpcore = None

if os.environ.get("PEGSOLVE_PURE"):
    _dpcore = None

#: step-count sentinel meaning "capture cannot be forced"
STEPS_INF = 0xFFFF

BACKEND = "compiled" if _dpcore is not None else "pure"

DEFAULT_STATE_CAP = 2**31
VI_STATE_GUARD = 2_000_000
CHECK_STATE_GUARD = 20_000_000

MAGIC = b"PEGDPT01"


@dataclass(frozen=True)
class SolveStats:
    states: int
    seeds: int
    pushes: int
    pops: int
    max_finite: int
    wall_time: float
    backend: str


@dataclass(frozen=True)
class DpTable:
    """Flat mixed-radix table of guaranteed pursuit steps for one spec."""

    fingerprint: str
    n: int
    m: int
    steps: np.ndarray  # uint16, length n ** (m + 1)
    stats: SolveStats | None = None

    def lookup(self, pursuers, evader: int, *, canonicalize: bool = False) -> int:
        """Steps entry for a joint position; ``STEPS_INF`` when hopeless.

        ``canonicalize`` sorts the pursuer positions first; pursuers are
        homogeneous so the value is unchanged (tested), the flag exists for
        callers holding permutation-reduced position sets.
        """
        if canonicalize:
            pursuers = sorted(pursuers)
        idx = 0
        for p in pursuers:
            idx = idx * self.n + p
        return int(self.steps[idx * self.n + evader])

    @property
    def finite_fraction(self) -> float:
        return float(np.count_nonzero(self.steps != STEPS_INF) / self.steps.size)

    @property
    def finite_everywhere(self) -> bool:
        """Proxy flag for "pursuit guaranteed from every state"."""
        return bool((self.steps != STEPS_INF).all())


def _csr_closed(graph) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(graph.node_count + 1, dtype=np.int32)
    chunks = []
    for v, nbrs in enumerate(graph.closed):
        indptr[v + 1] = indptr[v] + len(nbrs)
        chunks.extend(nbrs)
    return indptr, np.array(chunks, dtype=np.int32)


def _within_radius(spec: PegSpec) -> np.ndarray:
    return np.ascontiguousarray(
        (spec.apsp.dist <= spec.capture_radius).astype(np.uint8)
    )


def solve_dp(
    spec: PegSpec,
    *,
    state_cap: int = DEFAULT_STATE_CAP,
    backend: str | None = None,
    memo: bool = True,
) -> DpTable:
    """Build the pursuit-step table for a no-exit spec.

    ``backend`` forces "compiled" or "pure"; default prefers the compiled
    kernel when present. ``memo=False`` switches the compiled kernel to the
    plain re-check expansion (the pure backend always re-checks). All
    combinations produce bit-identical tables; only wall time differs.
    """
    if spec.has_exits:
        raise ModeError("retrograde solving covers no-exit games only")
    total = spec.state_count()
    if total > state_cap:
        raise CapacityError(
            f"state space n^(m+1) = {total} exceeds cap {state_cap}"
        )
    if backend is None:
        backend = BACKEND
    if backend == "compiled" and _dpcore is None:
        raise CapacityError("compiled kernel not available in this install")
    if backend not in ("compiled", "pure"):
        raise ValueError(f"unknown backend {backend!r}")

    indptr, indices = _csr_closed(spec.graph)
    within = _within_radius(spec)
    steps = np.full(total, STEPS_INF, dtype=np.uint16)

    start = perf_counter()
    if backend == "compiled":
        if total >= 2**32:
            raise CapacityError("compiled kernel queue is limited to 2^32 states")
        queue = np.empty(total, dtype=np.uint32)
        raw = _dpcore.solve(
            spec.n, spec.m, indptr, indices, within,
            spec.capture_threshold, steps, queue, memo,
        )
        del queue
    else:
        raw = _dppure.solve(
            spec.n, spec.m, indptr, indices, within,
            spec.capture_threshold, steps,
        )
    wall = perf_counter() - start

    if raw["overflow"]:
        raise CapacityError("pursuit step count exceeded the 16-bit table range")
    if not raw["monotone_ok"]:
        raise AssertionError("retrograde queue popped decreasing values")
    if raw["pushes"] > total:
        raise AssertionError("retrograde queue pushed a state twice")

    stats = SolveStats(
        states=total,
        seeds=raw["seeds"],
        pushes=raw["pushes"],
        pops=raw["pops"],
        max_finite=raw["max_finite"],
        wall_time=wall,
        backend=backend,
    )
    return DpTable(
        fingerprint=spec.fingerprint, n=spec.n, m=spec.m, steps=steps, stats=stats
    )


# ---------------------------------------------------------------------------
# policy extraction (computed per query; the table alone is precomputed)


def _joint_bases(spec: PegSpec, pursuers) -> np.ndarray:
    """Row offsets of every joint pursuer move, in lexicographic order."""
    n = spec.n
    closed = spec.graph.closed
    bases = []
    for joint in product(*(closed[p] for p in pursuers)):
        ridx = 0
        for q in joint:
            ridx = ridx * n + q
        bases.append(ridx * n)
    return np.asarray(bases, dtype=np.int64)


def _joint_moves(spec: PegSpec, pursuers) -> list[tuple[int, ...]]:
    closed = spec.graph.closed
    return list(product(*(closed[p] for p in pursuers)))


def _pursuer_move(table: DpTable, spec: PegSpec, s: GlobalState) -> tuple[int, ...]:
    bases = _joint_bases(spec, s.pursuers)
    replies = np.asarray(spec.graph.closed[s.evader], dtype=np.int64)
    worst = table.steps[bases[:, None] + replies[None, :]].max(axis=1)
    best = int(np.argmin(worst))  # first minimum = lexicographically smallest
    return _joint_moves(spec, s.pursuers)[best]


def _evader_move(table: DpTable, spec: PegSpec, s: GlobalState) -> int:
    n = spec.n
    moves = spec.graph.closed[s.evader]
    moves_arr = np.asarray(moves, dtype=np.int64)
    bases = _joint_bases(spec, s.pursuers)
    grid = table.steps[bases[:, None] + moves_arr[None, :]]
    primary = grid.min(axis=0)  # worst case over simultaneous pursuer moves
    hold = 0
    for p in s.pursuers:
        hold = hold * n + p
    secondary = table.steps[hold * n + moves_arr]
    best = 0
    for i in range(1, len(moves)):
        if (primary[i], secondary[i]) > (primary[best], secondary[best]):
            best = i
    return moves[best]


def dp_pursuer_action(table: DpTable, spec: PegSpec, s: GlobalState) -> tuple[int, ...]:
    """Joint move minimizing the worst-reply steps value (ties: lexicographic).

    When every candidate is infinite the tie-break still applies; the policy
    does not fall back to a chase heuristic.
    """
    if is_terminal(spec, s):
        raise QueryError(f"pursuer policy queried at terminal state {s}")
    return _pursuer_move(table, spec, s)


def dp_evader_action(table: DpTable, spec: PegSpec, s: GlobalState) -> int:
    """Move maximizing the worst-case steps value, infinity on top.

    Worst case means the minimum over all simultaneous joint pursuer moves.
    Ties break on the table value with pursuers holding position (so the
    evader keeps a safe distance instead of drifting into reach), then on the
    smallest node id. Both orderings treat the infinity sentinel as largest.
    """
    if is_terminal(spec, s):
        raise QueryError(f"evader policy queried at terminal state {s}")
    return _evader_move(table, spec, s)


def nash_value(table: DpTable, spec: PegSpec, s: GlobalState) -> float:
    """``discount ** steps`` with the infinite sentinel mapping to 0."""
    d = table.lookup(s.pursuers, s.evader)
    if d == STEPS_INF:
        return 0.0
    return spec.discount**d


# ---------------------------------------------------------------------------
# independent certification


def value_iteration_oracle(
    spec: PegSpec,
    tol: float = 1e-12,
    *,
    state_guard: int = VI_STATE_GUARD,
) -> np.ndarray:
    """Fixed point of the synchronous Bellman minimax operator, from below.

    Capture states are pinned to 1; elsewhere each sweep applies
    ``discount * max over joint pursuer moves of min over evader moves`` to
    the previous iterate. Returns one value per state index, converged to a
    residual below ``tol``. Independent of the retrograde path by design;
    used to certify tables on small instances.
    """
    if spec.has_exits:
        raise ModeError("value-iteration oracle covers no-exit games only")
    total = spec.state_count()
    if total > state_guard:
        raise CapacityError(
            f"state space {total} exceeds the value-iteration guard {state_guard}"
        )
    n, m = spec.n, spec.m
    closed = spec.graph.closed
    within = _within_radius(spec)

    rest = np.arange(n**m, dtype=np.int64)
    counts = np.zeros((n**m, n), dtype=np.int32)
    for j in range(m):
        digits = (rest // n ** (m - 1 - j)) % n
        counts += within[digits]
    capture = counts >= spec.capture_threshold

    values = np.zeros((n**m, n), dtype=np.float64)
    values[capture] = 1.0
    shape = (n,) * (m + 1)
    max_sweeps = total + 2
    for _ in range(max_sweeps):
        worst_reply = np.empty_like(values)
        for e in range(n):
            worst_reply[:, e] = values[:, closed[e]].min(axis=1)
        pooled = worst_reply.reshape(shape)
        for axis in range(m):
            pooled = _axis_maxpool(pooled, axis, closed)
        new_values = spec.discount * pooled.reshape(n**m, n)
        new_values[capture] = 1.0
        residual = float(np.abs(new_values - values).max())
        values = new_values
        if residual < tol:
            return values.reshape(total)
    raise AssertionError("value iteration failed to converge within the sweep cap")


def _axis_maxpool(arr: np.ndarray, axis: int, closed) -> np.ndarray:
    out = np.empty_like(arr)
    index = [slice(None)] * arr.ndim
    for v in range(arr.shape[axis]):
        index[axis] = v
        out[tuple(index)] = arr.take(closed[v], axis=axis).max(axis=axis)
    return out


def _axis_minpool(arr: np.ndarray, axis: int, closed) -> np.ndarray:
    out = np.empty_like(arr)
    index = [slice(None)] * arr.ndim
    for v in range(arr.shape[axis]):
        index[axis] = v
        out[tuple(index)] = arr.take(closed[v], axis=axis).min(axis=axis)
    return out


def bellman_residual_check(
    table: DpTable,
    spec: PegSpec,
    *,
    state_guard: int = CHECK_STATE_GUARD,
) -> int:
    """Count states violating local consistency of the steps table.

    Capture states must hold 0; every other state must equal one plus the
    minimum over joint pursuer moves of the maximum over evader moves of its
    successors, with infinity absorbing. Returns the number of violations
    (zero for a correct table).
    """
    total = spec.state_count()
    if total > state_guard:
        raise CapacityError(
            f"state space {total} exceeds the consistency-check guard {state_guard}"
        )
    n, m = spec.n, spec.m
    closed = spec.graph.closed
    within = _within_radius(spec)
    sentinel = np.int64(2**40)

    dvals = table.steps.astype(np.int64).reshape(n**m, n)
    dvals[dvals == STEPS_INF] = sentinel

    rest = np.arange(n**m, dtype=np.int64)
    counts = np.zeros((n**m, n), dtype=np.int32)
    for j in range(m):
        digits = (rest // n ** (m - 1 - j)) % n
        counts += within[digits]
    capture = counts >= spec.capture_threshold

    best_reply = np.empty_like(dvals)
    for e in range(n):
        best_reply[:, e] = dvals[:, closed[e]].max(axis=1)
    pooled = best_reply.reshape((n,) * (m + 1))
    for axis in range(m):
        pooled = _axis_minpool(pooled, axis, closed)
    rhs = pooled.reshape(n**m, n) + 1
    rhs[rhs > sentinel] = sentinel

    bad = np.where(capture, dvals != 0, dvals != rhs)
    return int(np.count_nonzero(bad))


# ---------------------------------------------------------------------------
# persistence


def save_table(table: DpTable, path) -> None:
    """Binary layout: magic, 16-byte fingerprint, n and m as u32 LE, raw
    little-endian u16 array."""
    path = Path(path)
    header = MAGIC + bytes.fromhex(table.fingerprint)
    header += struct.pack("<II", table.n, table.m)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(table.steps, dtype="<u2").tobytes())


def load_table(path, spec: PegSpec | None = None) -> DpTable:
    """Load a persisted table, refusing one that belongs to a different spec."""
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 16 + 8 or blob[: len(MAGIC)] != MAGIC:
        raise FingerprintMismatchError(f"{path} is not a pursuit table file")
    offset = len(MAGIC)
    fingerprint = blob[offset : offset + 16].hex()
    offset += 16
    n, m = struct.unpack_from("<II", blob, offset)
    offset += 8
    steps = np.frombuffer(blob, dtype="<u2", offset=offset).astype(np.uint16)
    if steps.size != n ** (m + 1):
        raise FingerprintMismatchError(
            f"{path}: array length {steps.size} does not match n={n} m={m}"
        )
    if spec is not None and fingerprint != spec.fingerprint:
        raise FingerprintMismatchError(
            f"{path}: table fingerprint {fingerprint} does not match spec "
            f"{spec.fingerprint}"
        )
    return DpTable(fingerprint=fingerprint, n=n, m=m, steps=steps)
