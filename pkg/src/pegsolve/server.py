"""Policy side of the exchange protocol: serve a built-in policy over a
stream.

Lets any built-in kind be dialed as an ``external`` policy, which is how the
wire format gets exercised end to end (an externally served policy must act
identically to its in-process twin). Speaks newline-delimited JSON on
stdin/stdout or a single TCP connection; answers every ``hello`` with
``ready``, every ``act`` with ``move``, ignores ``end``, and exits on EOF.
"""

from __future__ import annotations

import json
import socket
import sys

from .game import GlobalState, PegSpec
from .policies import PolicyHandle
from .sim import episode_seed

SERVE_KINDS = ("dp", "grouped-dp", "exit-heuristic", "sps", "random", "stay")


def serve(spec: PegSpec, kind: str, reader, writer, *, table=None, seed: int = 0) -> None:
    """Answer one engine connection until EOF. ``reader`` yields lines;
    ``writer`` is a text stream."""
    if kind not in SERVE_KINDS:
        raise ValueError(f"cannot serve policy kind {kind!r}")
    policy = None
    current_spec = spec
    episode = None

    def reply(obj: dict) -> None:
        writer.write(json.dumps(obj, separators=(",", ":")) + "\n")
        writer.flush()

    for line in reader:
        line = line.strip()
        if not line:
            continue
        message = json.loads(line)
        mtype = message.get("type")
        if mtype == "hello":
            current_spec = spec.with_exits(message.get("exits", []))
            handle = PolicyHandle(
                side=message["side"], kind=kind, table=table, seed=seed
            )
            policy = handle.bind(current_spec)
            episode = None
            reply({"type": "ready", "fingerprint": current_spec.fingerprint})
        elif mtype == "act":
            if policy is None:
                raise RuntimeError("act before hello")
            ep = message.get("episode", 0)
            if ep != episode:
                episode = ep
                policy.begin_episode(ep, episode_seed(seed, ep), current_spec)
            s = GlobalState(
                pursuers=tuple(message["s_p"]), evader=message["s_e"]
            )
            move = policy.act(s)
            if isinstance(move, tuple):
                move = list(move)
            reply({"type": "move", "move": move})
        elif mtype == "end":
            pass
        # unknown message types are ignored per the protocol contract


def serve_stdio(spec: PegSpec, kind: str, *, table=None, seed: int = 0) -> None:
    serve(spec, kind, sys.stdin, sys.stdout, table=table, seed=seed)


def serve_tcp(
    spec: PegSpec, kind: str, port: int, *, host: str = "127.0.0.1", table=None, seed: int = 0
) -> None:
    """Listen for a single engine connection, serve it, then return."""
    with socket.create_server((host, port)) as server:
        print(f"serving {kind} on {host}:{server.getsockname()[1]}", file=sys.stderr)
        conn, _ = server.accept()
        with conn:
            reader = conn.makefile("r", encoding="utf-8")
            writer = conn.makefile("w", encoding="utf-8")
            serve(spec, kind, reader, writer, table=table, seed=seed)
