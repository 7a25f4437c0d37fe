"""Pure-Python twin of the compiled retrograde kernel.

Kept semantically in lockstep with ``_dpcore.solve`` (same seeding order,
same FIFO discipline, same guards); the test suite asserts bit-identical
output. Orders of magnitude slower, so only sensible for small instances or
environments without the compiled extension.
"""

from __future__ import annotations

from collections import deque
from itertools import product

import numpy as np

INF16 = 0xFFFF


def solve(n, m, indptr, indices, within, threshold, steps, queue_capacity=None):
    """Seed capture states and run FIFO expansion in place on ``steps``."""
    closed = [
        [int(x) for x in indices[indptr[v] : indptr[v + 1]]] for v in range(n)
    ]
    within = np.asarray(within)

    # seeding in ascending state-index order
    queue: deque[int] = deque()
    counts = np.zeros(n, dtype=np.int64)
    seeds = 0
    for rest, positions in enumerate(product(range(n), repeat=m)):
        counts[:] = 0
        for v in positions:
            counts += within[v]
        base = rest * n
        for e in np.nonzero(counts >= threshold)[0]:
            idx = base + int(e)
            steps[idx] = 0
            queue.append(idx)
            seeds += 1

    pushes = seeds
    pops = 0
    max_d = 0
    last_d = 0
    monotone_ok = True
    overflow = False

    while queue:
        idx = queue.popleft()
        pops += 1
        d = int(steps[idx])
        if d < last_d:
            monotone_ok = False
        last_d = d
        max_d = max(max_d, d)
        if d + 1 >= INF16:
            overflow = True
            break
        e = idx % n
        rest = idx // n
        base = rest * n
        pos = []
        t = rest
        for _ in range(m):
            pos.append(t % n)
            t //= n
        pos.reverse()
        for ne in closed[e]:
            if any(steps[base + x] > d for x in closed[ne]):
                continue
            for joint in product(*(closed[v] for v in pos)):
                tidx = 0
                for q in joint:
                    tidx = tidx * n + q
                tidx = tidx * n + ne
                if steps[tidx] == INF16:
                    steps[tidx] = d + 1
                    queue.append(tidx)
                    pushes += 1

    return {
        "seeds": seeds,
        "pushes": pushes,
        "pops": pops,
        "max_finite": max_d,
        "monotone_ok": monotone_ok,
        "overflow": overflow,
    }
