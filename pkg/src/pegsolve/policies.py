"""Policy selection, baselines, the external-policy protocol, and exact
best-response evaluation.

A :class:`PolicyHandle` names a side and a policy kind plus kind-specific
configuration; :meth:`PolicyHandle.bind` turns it into a bound policy object
with ``begin_episode`` / ``act`` / ``end_episode`` hooks the episode engine
drives. Heavy preparation (table solves, subprocess launches) happens once
per handle and is reused across episodes.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import socket
import subprocess
import sys
from dataclasses import dataclass, field

import numpy as np

from . import dp as dp_mod
from .dp import DpTable, solve_dp
from .errors import CapacityError, ModeError, ProtocolError, QueryError
from .exits import heuristic_evader_action, heuristic_pursuer_action
from .features import extract_feature, feature_payload
from .game import (
    GlobalState,
    PegSpec,
    is_terminal,
    reward,
    state_index,
    state_unindex,
)
from .grouping import GroupedOracle, build_grouped_oracle, grouped_evader_action, grouped_pursuer_action

PROTOCOL_VERSION = 1

PURSUER = "pursuer"
EVADER = "evader"

KINDS = ("dp", "grouped-dp", "exit-heuristic", "sps", "random", "external", "stay")


# ---------------------------------------------------------------------------
# baseline actions as plain spec operations


def sps_pursuer_action(spec: PegSpec, s: GlobalState) -> tuple[int, ...]:
    """Each pursuer independently descends the distance to the evader
    (smallest-id move on ties; stays only when already on the evader)."""
    if is_terminal(spec, s):
        raise QueryError(f"shortest-path pursuer queried at terminal state {s}")
    dist = spec.apsp.dist
    joint = []
    for p in s.pursuers:
        moves = spec.graph.closed[p]
        best = min(moves, key=lambda u: (int(dist[u, s.evader]), u))
        joint.append(best)
    return tuple(joint)


def greedy_evader_action(spec: PegSpec, s: GlobalState) -> int:
    """Mirror of the shortest-path chase: greedily maximize the distance to
    the nearest pursuer (smallest-id move on ties)."""
    if is_terminal(spec, s):
        raise QueryError(f"greedy evader queried at terminal state {s}")
    dist = spec.apsp.dist

    def clearance(u: int) -> int:
        return min(int(dist[u, p]) for p in s.pursuers)

    moves = spec.graph.closed[s.evader]
    best = moves[0]
    for u in moves[1:]:
        if clearance(u) > clearance(best):
            best = u
    return best


def random_action(spec: PegSpec, s: GlobalState, side: str, rng):
    """Uniform draw over each acting agent's closed neighborhood."""
    if is_terminal(spec, s):
        raise QueryError(f"random policy queried at terminal state {s}")
    closed = spec.graph.closed
    if side == PURSUER:
        return tuple(
            moves[int(rng.integers(len(moves)))]
            for moves in (closed[p] for p in s.pursuers)
        )
    moves = closed[s.evader]
    return moves[int(rng.integers(len(moves)))]


# ---------------------------------------------------------------------------
# bound policies


class BoundPolicy:
    kind = "abstract"

    def __init__(self, side: str, spec: PegSpec):
        self.side = side
        self.spec = spec

    def begin_episode(self, episode: int, seed: int, spec: PegSpec) -> None:
        self.spec = spec

    def act(self, s: GlobalState):
        raise NotImplementedError

    def end_episode(self, outcome: str, steps: int) -> None:
        pass

    def close(self) -> None:
        pass


class DpPolicy(BoundPolicy):
    kind = "dp"

    def __init__(self, side: str, spec: PegSpec, table: DpTable):
        super().__init__(side, spec)
        self.table = table

    def act(self, s: GlobalState):
        if self.side == PURSUER:
            return dp_mod.dp_pursuer_action(self.table, self.spec, s)
        return dp_mod.dp_evader_action(self.table, self.spec, s)


class GroupedDpPolicy(BoundPolicy):
    kind = "grouped-dp"

    def __init__(self, side: str, spec: PegSpec, oracle: GroupedOracle):
        super().__init__(side, spec)
        self.oracle = oracle

    def act(self, s: GlobalState):
        if self.side == PURSUER:
            return grouped_pursuer_action(self.oracle, self.spec, s)
        return grouped_evader_action(self.oracle, self.spec, s)


class ExitHeuristicPolicy(BoundPolicy):
    kind = "exit-heuristic"

    def act(self, s: GlobalState):
        if self.side == PURSUER:
            return heuristic_pursuer_action(self.spec, s)
        return heuristic_evader_action(self.spec, s)


class SpsPolicy(BoundPolicy):
    kind = "sps"

    def act(self, s: GlobalState):
        if self.side == PURSUER:
            return sps_pursuer_action(self.spec, s)
        return greedy_evader_action(self.spec, s)


class StayPolicy(BoundPolicy):
    """Test utility: every agent holds position."""

    kind = "stay"

    def act(self, s: GlobalState):
        if self.side == PURSUER:
            return tuple(s.pursuers)
        return s.evader


class RandomPolicy(BoundPolicy):
    kind = "random"

    def __init__(self, side: str, spec: PegSpec, seed: int):
        super().__init__(side, spec)
        self.base_seed = seed
        self._reseed(seed)

    def _reseed(self, seed: int) -> None:
        salt = 0 if self.side == PURSUER else 1
        self.rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((seed, salt)))
        )

    def begin_episode(self, episode: int, seed: int, spec: PegSpec) -> None:
        super().begin_episode(episode, seed, spec)
        self._reseed(seed)

    def act(self, s: GlobalState):
        return random_action(self.spec, s, self.side, self.rng)


# ---------------------------------------------------------------------------
# external policies: line-delimited JSON over a pipe or socket


class _LineChannel:
    """Newline-framed JSON messages with a read timeout."""

    def __init__(self, timeout: float):
        self.timeout = timeout
        self._buffer = bytearray()

    def _read_chunk(self) -> bytes:
        raise NotImplementedError

    def _write_bytes(self, data: bytes) -> None:
        raise NotImplementedError

    def send(self, message: dict) -> None:
        line = json.dumps(message, separators=(",", ":")) + "\n"
        self._write_bytes(line.encode())

    def recv(self) -> dict:
        while b"\n" not in self._buffer:
            chunk = self._read_chunk()
            if not chunk:
                raise ProtocolError("external policy closed the connection")
            self._buffer.extend(chunk)
        line, _, rest = bytes(self._buffer).partition(b"\n")
        self._buffer = bytearray(rest)
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"external policy sent invalid JSON: {line!r}") from exc
        if not isinstance(message, dict):
            raise ProtocolError(f"external policy sent a non-object: {line!r}")
        return message

    def close(self) -> None:
        pass


class _ProcessChannel(_LineChannel):
    def __init__(self, argv: list[str], timeout: float):
        super().__init__(timeout)
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
        )

    def _read_chunk(self) -> bytes:
        fd = self.proc.stdout.fileno()
        ready, _, _ = select.select([fd], [], [], self.timeout)
        if not ready:
            raise ProtocolError(
                f"external policy reply timed out after {self.timeout}s"
            )
        return os.read(fd, 65536)

    def _write_bytes(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ProtocolError("external policy process is gone") from exc

    def close(self) -> None:
        try:
            self.proc.stdin.close()
            self.proc.wait(timeout=2)
        except Exception:
            self.proc.kill()
            self.proc.wait()


class _SocketChannel(_LineChannel):
    def __init__(self, host: str, port: int, timeout: float):
        super().__init__(timeout)
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)

    def _read_chunk(self) -> bytes:
        try:
            return self.sock.recv(65536)
        except socket.timeout as exc:
            raise ProtocolError(
                f"external policy reply timed out after {self.timeout}s"
            ) from exc

    def _write_bytes(self, data: bytes) -> None:
        self.sock.sendall(data)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class ExternalPolicy(BoundPolicy):
    """Engine side of the policy-exchange protocol.

    Handshake: engine sends ``hello`` (protocol version, spec fingerprint,
    n, m, exits, side), the policy answers ``ready`` echoing the fingerprint.
    Each decision is one ``act`` -> ``move`` exchange; ``end`` closes an
    episode. When an episode runs under a different spec (resampled exits),
    the engine re-handshakes before its first ``act``.
    """

    kind = "external"

    def __init__(
        self,
        side: str,
        spec: PegSpec,
        *,
        command: list[str] | None = None,
        address: tuple[str, int] | None = None,
        send_feature: bool = False,
        timeout: float = 30.0,
    ):
        super().__init__(side, spec)
        if (command is None) == (address is None):
            raise ValueError("external policy needs exactly one of command/address")
        self.send_feature = send_feature
        if command is not None:
            self.channel: _LineChannel = _ProcessChannel(command, timeout)
        else:
            self.channel = _SocketChannel(address[0], address[1], timeout)
        self._episode = -1
        self._t = 0
        self._hello(spec)

    def _hello(self, spec: PegSpec) -> None:
        self.channel.send(
            {
                "type": "hello",
                "protocol_version": PROTOCOL_VERSION,
                "fingerprint": spec.fingerprint,
                "n": spec.n,
                "m": spec.m,
                "exits": list(spec.exits),
                "side": self.side,
            }
        )
        answer = self.channel.recv()
        if answer.get("type") != "ready":
            raise ProtocolError(f"expected 'ready', got {answer!r}")
        if answer.get("fingerprint") != spec.fingerprint:
            raise ProtocolError(
                f"fingerprint mismatch: engine has {spec.fingerprint}, "
                f"policy echoed {answer.get('fingerprint')!r}"
            )
        self._ready_for = spec.fingerprint

    def begin_episode(self, episode: int, seed: int, spec: PegSpec) -> None:
        if spec.fingerprint != self._ready_for:
            self._hello(spec)
        super().begin_episode(episode, seed, spec)
        self._episode = episode
        self._t = 0

    def act(self, s: GlobalState):
        message = {
            "type": "act",
            "episode": self._episode,
            "t": self._t,
            "s_p": list(s.pursuers),
            "s_e": s.evader,
        }
        if self.send_feature:
            payload = feature_payload(extract_feature(self.spec, s, 1))
            if self.side == EVADER:
                payload["c"] = s.evader
                payload["l"] = 0
            message["feature"] = payload
        self.channel.send(message)
        self._t += 1
        answer = self.channel.recv()
        if answer.get("type") != "move":
            raise ProtocolError(f"expected 'move', got {answer!r}")
        return self._check_move(s, answer.get("move"))

    def _check_move(self, s: GlobalState, move):
        closed = self.spec.graph.closed
        if self.side == PURSUER:
            if not isinstance(move, list) or len(move) != self.spec.m:
                raise ProtocolError(
                    f"pursuer move must list {self.spec.m} node ids, got {move!r}"
                )
            out = []
            for i, (src, dst) in enumerate(zip(s.pursuers, move)):
                if not isinstance(dst, int) or dst not in closed[src]:
                    raise ProtocolError(
                        f"illegal move for pursuer {i}: {src} -> {dst!r}"
                    )
                out.append(dst)
            return tuple(out)
        if not isinstance(move, int) or move not in closed[s.evader]:
            raise ProtocolError(f"illegal move for evader: {s.evader} -> {move!r}")
        return move

    def end_episode(self, outcome: str, steps: int) -> None:
        self.channel.send(
            {"type": "end", "episode": self._episode, "outcome": outcome, "steps": steps}
        )

    def close(self) -> None:
        self.channel.close()


# ---------------------------------------------------------------------------
# handles


@dataclass
class PolicyHandle:
    """Named policy selection; ``bind`` builds the runnable policy.

    Kind-specific fields: ``table`` (dp; solved on demand when omitted),
    ``grouping`` (grouped-dp override), ``seed`` (random), ``command`` or
    ``address`` plus ``send_feature`` (external).
    """

    side: str
    kind: str
    table: DpTable | None = None
    oracle: GroupedOracle | None = None
    grouping: tuple | None = None
    seed: int = 0
    command: list[str] | None = None
    address: tuple[str, int] | None = None
    send_feature: bool = False
    timeout: float = 30.0
    state_cap: int | None = None

    def __post_init__(self):
        if self.side not in (PURSUER, EVADER):
            raise ValueError(f"side must be pursuer or evader, got {self.side!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")

    def bind(self, spec: PegSpec) -> BoundPolicy:
        kind = self.kind
        if kind in ("dp", "grouped-dp") and spec.has_exits:
            raise ModeError(f"{kind} policies require a no-exit spec")
        if kind == "exit-heuristic" and not spec.has_exits:
            raise ModeError("exit-heuristic policies require a spec with exits")
        if kind == "dp":
            if self.table is None:
                kwargs = {"state_cap": self.state_cap} if self.state_cap else {}
                self.table = solve_dp(spec, **kwargs)
            if self.table.fingerprint != spec.fingerprint:
                raise ModeError("dp policy table belongs to a different spec")
            return DpPolicy(self.side, spec, self.table)
        if kind == "grouped-dp":
            if self.oracle is None:
                self.oracle = build_grouped_oracle(
                    spec, self.grouping, state_cap=self.state_cap
                )
            return GroupedDpPolicy(self.side, spec, self.oracle)
        if kind == "exit-heuristic":
            return ExitHeuristicPolicy(self.side, spec)
        if kind == "sps":
            return SpsPolicy(self.side, spec)
        if kind == "stay":
            return StayPolicy(self.side, spec)
        if kind == "random":
            return RandomPolicy(self.side, spec, self.seed)
        return ExternalPolicy(
            self.side,
            spec,
            command=self.command,
            address=self.address,
            send_feature=self.send_feature,
            timeout=self.timeout,
        )


def parse_policy_arg(side: str, text: str, *, table=None) -> PolicyHandle:
    """CLI shorthand: a kind name, ``external:<command line>``, or
    ``external:tcp:<host>:<port>``."""
    if text.startswith("external:"):
        rest = text[len("external:") :]
        if rest.startswith("tcp:"):
            host, _, port = rest[len("tcp:") :].rpartition(":")
            if not host:
                raise ValueError(f"bad external address {rest!r}")
            return PolicyHandle(side, "external", address=(host, int(port)))
        return PolicyHandle(side, "external", command=shlex.split(rest))
    return PolicyHandle(side, text, table=table)


# ---------------------------------------------------------------------------
# exact best response against a fixed deterministic opponent


@dataclass(frozen=True)
class BestResponseReport:
    value: float
    improving: bool | None
    residual: float


DETERMINISTIC_KINDS = ("dp", "grouped-dp", "exit-heuristic", "sps", "stay")


def best_response_value(
    spec: PegSpec,
    opponent,
    side: str,
    s0: GlobalState,
    *,
    tol: float = 1e-10,
    state_guard: int = dp_mod.VI_STATE_GUARD,
    reference: float | None = None,
) -> BestResponseReport:
    """Optimal discounted value for ``side`` at ``s0`` with the opponent fixed.

    Fixing a deterministic stationary opponent collapses the game to a
    single-controller decision process, solved here by value iteration over
    the full state space (capture pins +1, escape pins -1). ``opponent`` may
    be a handle or an already-bound policy; it must be deterministic and
    stationary, so ``random`` and ``external`` kinds are rejected.
    """
    if isinstance(opponent, PolicyHandle):
        opponent = opponent.bind(spec)
    if opponent.kind not in DETERMINISTIC_KINDS:
        raise ValueError(
            f"best response needs a deterministic stationary opponent, "
            f"got kind {opponent.kind!r}"
        )
    expected_side = EVADER if side == PURSUER else PURSUER
    if opponent.side != expected_side:
        raise ValueError(f"opponent must play side {expected_side!r}")
    total = spec.state_count()
    if total > state_guard:
        raise CapacityError(
            f"state space {total} exceeds the best-response guard {state_guard}"
        )
    n, m = spec.n, spec.m
    closed = spec.graph.closed

    pinned = np.zeros(total, dtype=np.float64)
    terminal = np.zeros(total, dtype=bool)
    starts = [0]
    succ: list[int] = []
    for idx in range(total):
        s = state_unindex(n, m, idx)
        r = reward(spec, s)
        if r != 0:
            terminal[idx] = True
            pinned[idx] = float(r)
            starts.append(len(succ))
            continue
        opp_move = opponent.act(s)
        if side == PURSUER:
            for joint in _joint_products(closed, s.pursuers):
                succ.append(state_index(n, m, GlobalState(joint, opp_move)))
        else:
            for b in closed[s.evader]:
                succ.append(state_index(n, m, GlobalState(tuple(opp_move), b)))
        starts.append(len(succ))
    succ_arr = np.asarray(succ, dtype=np.int64)
    nonterm = ~terminal
    # segment starts for nonterminal rows only; terminal rows contribute no
    # successors, so nonterminal segments stay contiguous and nonempty
    nt_starts = np.asarray(starts[:-1], dtype=np.int64)[nonterm]

    reducer = np.maximum.reduceat if side == PURSUER else np.minimum.reduceat
    values = pinned.copy()
    max_sweeps = int(np.ceil(np.log(tol) / np.log(spec.discount))) + 3
    residual = 0.0
    for _ in range(max_sweeps if nonterm.any() else 0):
        opt = reducer(values[succ_arr], nt_starts)
        new_values = pinned.copy()
        new_values[nonterm] = spec.discount * opt
        residual = float(np.abs(new_values - values).max())
        values = new_values
        if residual < tol:
            break
    value = float(values[state_index(n, m, s0)])
    improving = None
    if reference is not None:
        if side == PURSUER:
            improving = value > reference + 1e-9
        else:
            improving = value < reference - 1e-9
    return BestResponseReport(value=value, improving=improving, residual=residual)


def _joint_products(closed, pursuers):
    from itertools import product

    return product(*(closed[p] for p in pursuers))
