"""Brute-force infection-path enumeration, independent of the sweep kernels.

A path sits at a site from its arrival time until the next recovery mark
there and may leave along any arrow fired in that window.  Enumerating
every reachable (site, arrival time) pair gives hitting times and
configurations directly from the per-object event lists.
"""

import bisect
import math


def arrivals(log, A, s=0.0, T=None):
    """All (site, arrival time) pairs reachable from ``A x {s}``."""
    T = log.horizon if T is None else T
    lat = log.lattice
    seen = set()
    stack = [(tuple(a), s) for a in A]
    while stack:
        z, tau = stack.pop()
        if (z, tau) in seen:
            continue
        seen.add((z, tau))
        rec = list(log.recovery_marks(z))
        k = bisect.bisect_right(rec, tau)
        recover = rec[k] if k < len(rec) else math.inf
        for j in range(2 * lat.d):
            w = lat.step(z, j)
            if w not in lat:
                continue
            for a in log.arrows(z, j):
                if tau < a < recover and a <= T:
                    stack.append((w, float(a)))
    return seen


def configuration(log, A, t, s=0.0):
    """Sites infected at time ``t`` (recovery marks in (arrival, t] clear a path)."""
    out = set()
    for y, tau in arrivals(log, A, s, t):
        if tau > t:
            continue
        rec = log.recovery_marks(y)
        k = bisect.bisect_right(rec, tau)
        if k >= len(rec) or rec[k] > t:
            out.add(y)
    return out


def first_hits(log, A):
    hits = {}
    for y, tau in arrivals(log, A):
        hits[y] = min(hits.get(y, math.inf), tau)
    return hits
