"""Seeded episode engine, initial-condition samplers, metric aggregation.

Episodes are deterministic given (spec, policies, seed): the seed drives the
initial-condition sampler and every stochastic policy. Evaluation derives
per-episode seeds from a base seed with a fixed mixing function, so reports
are reproducible byte for byte and episodes stay independent under any
execution order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleSpecError
from .game import GlobalState, PegSpec, is_capture, is_escape, is_terminal, reward, step
from .policies import PolicyHandle

REJECTION_BUDGET = 100_000

#: minimum pursuer-evader distance at t=0 in no-exit games
MIN_START_DISTANCE = 5


def episode_seed(base_seed: int, index: int) -> int:
    """Documented 64-bit mix: the splitmix64 stream seeded at ``base_seed``,
    evaluated at position ``index + 1``."""
    mask = (1 << 64) - 1
    z = (base_seed + (index + 1) * 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)


@dataclass(frozen=True)
class EpisodeResult:
    outcome: str  # capture | escape | timeout
    steps: int
    seed: int
    trajectory: tuple | None = None  # ((state, (a, b)), ...) when recorded


@dataclass(frozen=True)
class EvalReport:
    spec_id: str
    pursuer: str
    evader: str
    episodes: int
    captures: int
    escapes: int
    timeouts: int
    success_rate: float
    mean_steps: float
    std_steps: float
    base_seed: int

    CSV_HEADER = "spec,pursuer,evader,episodes,success_rate,mean_steps,std_steps,timeouts"

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "spec": self.spec_id,
                "pursuer": self.pursuer,
                "evader": self.evader,
                "episodes": self.episodes,
                "success_rate": self.success_rate,
                "mean_steps": self.mean_steps,
                "std_steps": self.std_steps,
                "timeouts": self.timeouts,
                "captures": self.captures,
                "escapes": self.escapes,
                "base_seed": self.base_seed,
            },
            separators=(",", ":"),
        )

    def to_csv_row(self) -> str:
        return (
            f"{self.spec_id},{self.pursuer},{self.evader},{self.episodes},"
            f"{self.success_rate!r},{self.mean_steps!r},{self.std_steps!r},"
            f"{self.timeouts}"
        )


# ---------------------------------------------------------------------------
# initial-condition samplers


def sample_initial_no_exit(spec: PegSpec, rng) -> GlobalState:
    """Uniform joint positions conditioned on every pursuer starting more
    than :data:`MIN_START_DISTANCE` away from the evader."""
    n = spec.n
    dist = spec.apsp.dist
    for _ in range(REJECTION_BUDGET):
        pursuers = tuple(int(v) for v in rng.integers(n, size=spec.m))
        evader = int(rng.integers(n))
        if any(int(dist[p, evader]) <= MIN_START_DISTANCE for p in pursuers):
            continue
        s = GlobalState(pursuers=pursuers, evader=evader)
        if is_terminal(spec, s):
            continue
        return s
    raise InfeasibleSpecError(
        f"no start with pursuer distance > {MIN_START_DISTANCE} found in "
        f"{REJECTION_BUDGET} draws (graph diameter {spec.apsp.diameter})"
    )


def sample_initial_multi_exit(
    spec: PegSpec, rng
) -> tuple[GlobalState, tuple[int, ...]]:
    """Resample exit placement and positions for one multi-exit episode.

    Accepts a draw when the evader can reach some exit within the horizon,
    every exit the evader can reach that fast is covered by a pursuer at
    least as close, the evader does not start on an exit, and the start
    state is not terminal. Draw order per attempt: exits (uniform, no
    replacement), pursuers, evader.
    """
    n = spec.n
    dist = spec.apsp.dist
    exit_count = len(spec.exits)
    if exit_count == 0:
        raise InfeasibleSpecError("multi-exit sampler needs a spec with exits")
    for _ in range(REJECTION_BUDGET):
        exits = tuple(sorted(int(x) for x in rng.choice(n, size=exit_count, replace=False)))
        pursuers = tuple(int(v) for v in rng.integers(n, size=spec.m))
        evader = int(rng.integers(n))
        if evader in exits:
            continue
        reach = [int(dist[evader, x]) for x in exits]
        if min(reach) > spec.horizon:
            continue
        covered = all(
            any(int(dist[p, x]) <= d for p in pursuers)
            for x, d in zip(exits, reach)
            if d <= spec.horizon
        )
        if not covered:
            continue
        ep_spec = spec.with_exits(exits)
        s = GlobalState(pursuers=pursuers, evader=evader)
        if is_terminal(ep_spec, s):
            continue
        return s, exits
    raise InfeasibleSpecError(
        f"no feasible multi-exit start found in {REJECTION_BUDGET} draws"
    )


# ---------------------------------------------------------------------------
# episodes


def run_episode(
    spec: PegSpec,
    pursuer: PolicyHandle,
    evader: PolicyHandle,
    seed: int,
    *,
    episode: int = 0,
    initial: GlobalState | None = None,
    record_trajectory: bool = False,
    _bound: tuple | None = None,
) -> EpisodeResult:
    """Play one episode to termination or the horizon.

    Both policies see the same pre-move state each step; moves apply
    simultaneously, then capture (or escape, under flipped priority) is
    evaluated on the post-move state. ``initial`` overrides the seeded
    sampler, e.g. for scripted starts.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    ep_spec = spec
    if initial is None:
        if spec.has_exits:
            initial, exits = sample_initial_multi_exit(spec, rng)
            ep_spec = spec.with_exits(exits)
        else:
            initial = sample_initial_no_exit(spec, rng)
    own_policies = _bound is None
    if _bound is not None:
        p_policy, e_policy = _bound
    else:
        p_policy = pursuer.bind(ep_spec)
        e_policy = evader.bind(ep_spec)
    try:
        p_policy.begin_episode(episode, seed, ep_spec)
        e_policy.begin_episode(episode, seed, ep_spec)

        s = initial
        t = 0
        trajectory = [] if record_trajectory else None
        outcome = "timeout"
        while t < ep_spec.horizon:
            a = p_policy.act(s)
            b = e_policy.act(s)
            if record_trajectory:
                trajectory.append((s, (a, b)))
            s = step(ep_spec, s, a, b)
            t += 1
            r = reward(ep_spec, s)
            if r == 1:
                outcome = "capture"
                break
            if r == -1:
                outcome = "escape"
                break
        steps = t
        p_policy.end_episode(outcome, steps)
        e_policy.end_episode(outcome, steps)
    finally:
        if own_policies:
            p_policy.close()
            e_policy.close()
    return EpisodeResult(
        outcome=outcome,
        steps=steps,
        seed=seed,
        trajectory=tuple(trajectory) if record_trajectory else None,
    )


def evaluate(
    spec: PegSpec,
    pursuer: PolicyHandle,
    evader: PolicyHandle,
    episodes: int,
    base_seed: int,
    *,
    threads: int = 1,
) -> EvalReport:
    """Run ``episodes`` seeded episodes and aggregate the protocol metrics.

    Success rate counts captures; timeout episodes enter the step statistics
    at the horizon (the ``timeouts`` field keeps the other accounting
    recoverable). Standard deviation is the population form. Episodes are
    independent given their derived seeds, so ``threads > 1`` changes wall
    time only, never the report.
    """
    if episodes < 1:
        raise ValueError("need at least one episode")
    results: list[EpisodeResult | None] = [None] * episodes

    def worker(block: range, bound) -> None:
        try:
            for i in block:
                results[i] = run_episode(
                    spec,
                    pursuer,
                    evader,
                    episode_seed(base_seed, i),
                    episode=i,
                    _bound=bound,
                )
        finally:
            if bound is not None:
                for policy in bound:
                    policy.close()

    if threads <= 1:
        # warm shared tables once, then reuse across no-exit episodes
        bound = None
        if not spec.has_exits:
            bound = (pursuer.bind(spec), evader.bind(spec))
        worker(range(episodes), bound)
    else:
        if not spec.has_exits:
            pursuer.bind(spec)  # solve shared tables before forking workers
            evader.bind(spec)
        chunks = np.array_split(np.arange(episodes), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = []
            for chunk in chunks:
                if chunk.size == 0:
                    continue
                block = range(int(chunk[0]), int(chunk[-1]) + 1)
                bound = None
                if not spec.has_exits:
                    bound = (pursuer.bind(spec), evader.bind(spec))
                futures.append(pool.submit(worker, block, bound))
            for fut in futures:
                fut.result()

    steps = np.array([r.steps for r in results], dtype=np.float64)
    captures = sum(1 for r in results if r.outcome == "capture")
    escapes = sum(1 for r in results if r.outcome == "escape")
    timeouts = sum(1 for r in results if r.outcome == "timeout")
    return EvalReport(
        spec_id=spec.fingerprint[:12],
        pursuer=pursuer.kind,
        evader=evader.kind,
        episodes=episodes,
        captures=captures,
        escapes=escapes,
        timeouts=timeouts,
        success_rate=captures / episodes,
        mean_steps=float(steps.mean()),
        std_steps=float(steps.std()),
        base_seed=base_seed,
    )
