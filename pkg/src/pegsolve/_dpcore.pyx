# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled retrograde-expansion kernel for the pursuit-step table.

Operates on a flat uint16 array indexed mixed-radix base n with the evader
digit least significant. 0xFFFF is the infinity sentinel. The pure-Python
twin in ``_dppure`` must produce a bit-identical array.

With ``memo`` enabled (the default), a byte per (pursuer-position, evader
-predecessor) pair records that its joint-predecessor sweep already ran; the
first guard pass is exactly when the plain algorithm makes all of its
assignments for the pair, so the memo changes neither the array nor the
queue, only the wall time.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def solve(int n,
          int m,
          cnp.int32_t[::1] indptr,
          cnp.int32_t[::1] indices,
          cnp.uint8_t[:, ::1] within,
          int threshold,
          cnp.uint16_t[::1] steps,
          cnp.uint32_t[::1] queue,
          bint memo=True):
    """Run seeding plus FIFO expansion in place; returns solve statistics.

    ``indptr``/``indices`` hold closed neighborhoods in CSR form (sorted
    ascending per node). ``within[v, e]`` is 1 when dist(v, e) <= radius.
    ``steps`` must come in filled with the infinity sentinel; ``queue`` must
    have capacity for every state.
    """
    cdef Py_ssize_t total = steps.shape[0]
    cdef Py_ssize_t head = 0, tail = 0
    cdef Py_ssize_t idx, rest, base, t, off1, off2
    cdef Py_ssize_t n2 = <Py_ssize_t> n * n
    cdef Py_ssize_t n3 = n2 * n
    cdef int e, ne, j, jj, guard_ok
    cdef int d, d1, last_d = 0, max_d = 0
    cdef bint monotone_ok = True, overflow = False
    cdef Py_ssize_t k, kk, k1, k2, k3, seeds

    cdef int MAXP = 16
    cdef int[16] p               # pursuer digits of the popped state
    cdef Py_ssize_t[16] cursor   # odometer position per digit (m > 3 path)
    cdef Py_ssize_t[16] pref     # mixed-radix prefix of chosen digits
    cdef const cnp.uint8_t* wrow[16]

    if m > MAXP:
        raise ValueError("kernel supports at most 16 pursuers")

    cdef cnp.uint8_t[::1] done
    if memo:
        done = np.zeros(total, dtype=np.uint8)
    else:
        done = np.zeros(1, dtype=np.uint8)

    # --- seeding: every capture state gets 0 and enters the queue ---------
    with nogil:
        for j in range(m):
            p[j] = 0
            wrow[j] = &within[0, 0]
        rest = 0
        while True:
            base = rest * n
            for e in range(n):
                d = 0
                for j in range(m):
                    d += wrow[j][e]
                if d >= threshold:
                    steps[base + e] = 0
                    queue[tail] = <cnp.uint32_t> (base + e)
                    tail += 1
            j = m - 1
            while j >= 0:
                p[j] += 1
                if p[j] < n:
                    wrow[j] = &within[p[j], 0]
                    break
                p[j] = 0
                wrow[j] = &within[0, 0]
                j -= 1
            if j < 0:
                break
            rest += 1
        seeds = tail

        # --- FIFO retrograde expansion ------------------------------------
        while head < tail:
            idx = <Py_ssize_t> queue[head]
            head += 1
            d = steps[idx]
            if d < last_d:
                monotone_ok = False
            last_d = d
            if d > max_d:
                max_d = d
            if d + 1 >= 0xFFFF:
                overflow = True
                break
            d1 = d + 1
            e = <int> (idx % n)
            rest = idx / n
            base = rest * n
            t = rest
            for j in range(m - 1, -1, -1):
                p[j] = <int> (t % n)
                t = t / n
            # candidate evader predecessor positions: closed neighbors of e
            for k in range(indptr[e], indptr[e + 1]):
                ne = indices[k]
                if memo and done[base + ne]:
                    continue
                # expand only if every evader move out of ne is already won
                guard_ok = 1
                for kk in range(indptr[ne], indptr[ne + 1]):
                    if steps[base + indices[kk]] > d:
                        guard_ok = 0
                        break
                if not guard_ok:
                    continue
                if memo:
                    done[base + ne] = 1
                # enumerate joint pursuer predecessors
                if m == 1:
                    for k1 in range(indptr[p[0]], indptr[p[0] + 1]):
                        t = <Py_ssize_t> indices[k1] * n + ne
                        if steps[t] == 0xFFFF:
                            steps[t] = <cnp.uint16_t> d1
                            queue[tail] = <cnp.uint32_t> t
                            tail += 1
                elif m == 2:
                    for k1 in range(indptr[p[0]], indptr[p[0] + 1]):
                        off1 = <Py_ssize_t> indices[k1] * n2 + ne
                        for k2 in range(indptr[p[1]], indptr[p[1] + 1]):
                            t = off1 + <Py_ssize_t> indices[k2] * n
                            if steps[t] == 0xFFFF:
                                steps[t] = <cnp.uint16_t> d1
                                queue[tail] = <cnp.uint32_t> t
                                tail += 1
                elif m == 3:
                    for k1 in range(indptr[p[0]], indptr[p[0] + 1]):
                        off1 = <Py_ssize_t> indices[k1] * n3 + ne
                        for k2 in range(indptr[p[1]], indptr[p[1] + 1]):
                            off2 = off1 + <Py_ssize_t> indices[k2] * n2
                            for k3 in range(indptr[p[2]], indptr[p[2] + 1]):
                                t = off2 + <Py_ssize_t> indices[k3] * n
                                if steps[t] == 0xFFFF:
                                    steps[t] = <cnp.uint16_t> d1
                                    queue[tail] = <cnp.uint32_t> t
                                    tail += 1
                else:
                    for j in range(m):
                        cursor[j] = indptr[p[j]]
                    pref[0] = indices[cursor[0]]
                    for j in range(1, m):
                        pref[j] = pref[j - 1] * n + indices[cursor[j]]
                    while True:
                        t = pref[m - 1] * n + ne
                        if steps[t] == 0xFFFF:
                            steps[t] = <cnp.uint16_t> d1
                            queue[tail] = <cnp.uint32_t> t
                            tail += 1
                        j = m - 1
                        while j >= 0:
                            cursor[j] += 1
                            if cursor[j] < indptr[p[j] + 1]:
                                break
                            cursor[j] = indptr[p[j]]
                            j -= 1
                        if j < 0:
                            break
                        for jj in range(j, m):
                            if jj == 0:
                                pref[0] = indices[cursor[0]]
                            else:
                                pref[jj] = pref[jj - 1] * n + indices[cursor[jj]]

    return {
        "seeds": int(seeds),
        "pushes": int(tail),
        "pops": int(head),
        "max_finite": int(max_d),
        "monotone_ok": bool(monotone_ok),
        "overflow": bool(overflow),
    }
