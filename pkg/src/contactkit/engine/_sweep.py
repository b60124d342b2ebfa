"""Compiled single-pass sweeps over a merged event sequence.

State arrays are uint8 infection indicators indexed by site.  A sweep
processes events ``start, start + 1, ...`` while their time is at most
``stop_time``.  A recovery mark clears its site; an arrow infects its
target when the source is infected and the target is inside the region.
An arrow from an infected site whose target lies outside is a boundary
contact.  The empty configuration is absorbing, so every sweep stops as
soon as the infected count reaches zero.
"""

import numpy as np
from numba import njit

REC = 0


@njit(cache=True, nogil=True)
def sweep(ev_time, ev_kind, ev_src, ev_dst, start, stop_time, state, first_hit):
    """Advance ``state`` in place.

    If ``first_hit`` is non-empty, every site newly infected at time ``t``
    whose entry is still ``inf`` gets ``t`` written into it.

    Returns ``(count, death_pos, boundary, next_pos)`` where ``death_pos``
    is the index of the event that emptied the configuration (or -1).
    """
    track = first_hit.shape[0] > 0
    count = 0
    for k in range(state.shape[0]):
        count += state[k]
    boundary = False
    death_pos = -1
    n = ev_time.shape[0]
    i = start
    if count == 0:
        return count, death_pos, boundary, i
    while i < n:
        if ev_time[i] > stop_time:
            break
        s = ev_src[i]
        if state[s]:
            if ev_kind[i] == REC:
                state[s] = 0
                count -= 1
                if count == 0:
                    death_pos = i
                    i += 1
                    break
            else:
                dd = ev_dst[i]
                if dd < 0:
                    boundary = True
                elif state[dd] == 0:
                    state[dd] = 1
                    count += 1
                    if track and first_hit[dd] == np.inf:
                        first_hit[dd] = ev_time[i]
        i += 1
    return count, death_pos, boundary, i


@njit(cache=True, nogil=True)
def sweep_toggles(ev_time, ev_kind, ev_src, ev_dst, start, end, state, watch):
    """Run events ``start .. end - 1`` recording every on/off switch of watched sites.

    Returns ``(pos, site, on, count, death_pos)``; ``pos`` holds the event
    index at which the switch happened.
    """
    n = end
    size = max(n - start, 0)
    pos = np.empty(size, np.int64)
    site = np.empty(size, np.int64)
    on = np.empty(size, np.uint8)
    m = 0
    count = 0
    for k in range(state.shape[0]):
        count += state[k]
    death_pos = -1
    i = start
    while i < n and count > 0:
        s = ev_src[i]
        if state[s]:
            if ev_kind[i] == REC:
                state[s] = 0
                count -= 1
                if watch[s]:
                    pos[m] = i
                    site[m] = s
                    on[m] = 0
                    m += 1
                if count == 0:
                    death_pos = i
            else:
                dd = ev_dst[i]
                if dd >= 0 and state[dd] == 0:
                    state[dd] = 1
                    count += 1
                    if watch[dd]:
                        pos[m] = i
                        site[m] = dd
                        on[m] = 1
                        m += 1
        i += 1
    return pos[:m], site[:m], on[:m], count, death_pos
