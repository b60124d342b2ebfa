"""Hitting times, essential hitting times and survival verdicts on one event log.

The essential hitting time of ``x`` for the process started from ``A``
is built by alternating two times.  ``u_k`` is the first time at or after
``v_{k-1}`` at which ``x`` is infected by the process started from ``A``.
``v_k`` is the time at which the process started from the single infection
at ``(x, u_k)`` dies out.  The first ``u_k`` whose branch does not die is
the essential hitting time ``sigma``; on a finite horizon "does not die"
means "still alive at the horizon".
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .engine.dynamics import (
    ConfigurationSet,
    ExtinctionResult,
    extinction_from,
    run_sweep,
    start_position,
    state_vector,
)
from .engine._sweep import sweep_toggles
from .engine.eventlog import EventLog
from .engine.lattice import as_site
from .errors import ContactKitError, HorizonError, PreconditionError


class InvariantViolation(ContactKitError, AssertionError):
    category = "invariant"


class Verdict(str, enum.Enum):
    SURVIVES = "SURVIVES"
    DIES = "DIES"
    AMBIGUOUS = "AMBIGUOUS"


@dataclass(frozen=True)
class HittingRecord:
    """First infection times ``t_A(x)`` (``inf`` if not hit before the horizon)."""

    initial: frozenset
    times: dict
    horizon: float

    def time(self, x) -> float:
        return self.times[_key(x)]

    def once_infected(self, t: float) -> set:
        """The set ``H_t`` of tracked sites infected at some time ``<= t``."""
        return {x for x, s in self.times.items() if s <= t}


def _key(x) -> tuple:
    return (int(x),) if np.isscalar(x) else tuple(int(c) for c in x)


@dataclass(frozen=True)
class EssentialRecord:
    """Outcome of the ``u``/``v`` recursion at one site.

    ``u`` and ``v`` hold the finite entries only.  ``sigma`` and ``K`` are
    set only when some branch started at a ``u_k`` was alive at the horizon.
    Otherwise the flags say why:

    never_hit
        ``x`` was not infected before the horizon.
    global_death
        the process from ``A`` died, so no further ``u`` exists.
    branch_censored
        the horizon ran out before a surviving branch was found, or a
        branch died after touching the box boundary.
    boundary_contact
        some replayed branch pushed an arrow out of the box.

    Invariants are checked on construction.
    """

    site: tuple
    u: tuple
    v: tuple
    sigma: float | None
    K: int | None
    horizon: float
    never_hit: bool = False
    global_death: bool = False
    branch_censored: bool = False
    boundary_contact: bool = False

    n_checked = 0

    def __post_init__(self):
        self.check()
        type(self).n_checked += 1

    @property
    def hit_time(self) -> float:
        return self.u[0] if self.u else math.inf

    @property
    def gap(self) -> float | None:
        """``sigma - t(x)`` when ``sigma`` is defined."""
        return None if self.sigma is None else self.sigma - self.u[0]

    def check(self):
        u, v = self.u, self.v
        fail = []
        if any(b <= a for a, b in zip(u, u[1:])):
            fail.append("u not strictly increasing")
        if any(b <= a for a, b in zip(v, v[1:])):
            fail.append("v not strictly increasing")
        if len(v) not in (len(u), len(u) - 1) and u:
            fail.append("length mismatch between u and v")
        if any(vk <= uk for uk, vk in zip(u, v)):
            fail.append("some v_k <= u_k")
        if any(u[k + 1] < v[k] for k in range(min(len(v), len(u) - 1))):
            fail.append("some u_{k+1} < v_k")
        if self.never_hit and u:
            fail.append("never_hit with finite u")
        if self.sigma is not None:
            if self.K != len(u) or len(v) != len(u) - 1:
                fail.append("K inconsistent with sequences")
            if self.sigma != u[-1]:
                fail.append("sigma != u_K")
            if self.sigma < u[0]:
                fail.append("sigma < t(x)")
            if (self.sigma == u[0]) != (self.K == 1):
                fail.append("sigma == t(x) but K != 1, or conversely")
        elif self.K is not None:
            fail.append("K set without sigma")
        if fail:
            raise InvariantViolation(f"EssentialRecord at {self.site}: " + "; ".join(fail))


@dataclass(frozen=True)
class SurvivalVerdict:
    verdict: Verdict
    extinction_time: float | None
    population: int
    boundary_contact: bool

    @property
    def survives(self) -> bool:
        return self.verdict is Verdict.SURVIVES


def _initial_sites(log: EventLog, A) -> frozenset:
    if isinstance(A, ConfigurationSet):
        A = A.sites
    sites = frozenset(as_site(a, log.lattice.d) for a in A)
    if not sites:
        raise PreconditionError("initial set must be nonempty")
    for a in sites:
        log.lattice.index(a)
    return sites


def _horizon(log: EventLog, T: float | None) -> float:
    if T is None:
        return log.horizon
    if T > log.horizon:
        raise HorizonError(f"horizon {T} exceeds the log horizon {log.horizon}")
    return float(T)


def hitting_times(log: EventLog, A, tracked: Iterable | None = None, T: float | None = None) -> HittingRecord:
    """First infection time of every tracked site (all sites by default) in one sweep."""
    T = _horizon(log, T)
    sites = _initial_sites(log, A)
    lat = log.lattice
    state = state_vector(log, sites)
    first = np.full(lat.n_sites, np.inf)
    first[state.astype(bool)] = 0.0
    run_sweep(log, state, 0, T, first)
    if tracked is None:
        idx = range(lat.n_sites)
        keys = [lat.site(i) for i in idx]
    else:
        keys = [as_site(x, lat.d) for x in tracked]
        idx = [lat.index(x) for x in keys]
    return HittingRecord(sites, {k: float(first[i]) for k, i in zip(keys, idx)}, T)


class _Trajectory:
    """On/off event positions of watched sites for the process started from ``A``."""

    def __init__(self, log: EventLog, sites: frozenset, watch_idx: Sequence[int], T: float):
        state = state_vector(log, sites)
        watch = np.zeros(log.lattice.n_sites, dtype=np.uint8)
        watch[list(watch_idx)] = 1
        end = int(np.searchsorted(log.ev_time, T, side="right"))
        initial = state.copy()
        pos, site, on, count, death_pos = sweep_toggles(
            log.ev_time, log.ev_kind, log.ev_src, log.ev_dst, 0, end, state, watch
        )
        self.end = end
        self.alive = count > 0
        self.death_pos = int(death_pos)
        self.intervals = {}
        for i in watch_idx:
            mine = site == i
            p, o = pos[mine], on[mine]
            starts = list(p[o == 1])
            stops = list(p[o == 0])
            if initial[i]:
                starts.insert(0, -1)
            if len(stops) < len(starts):
                stops.append(end)
            self.intervals[i] = (np.array(starts, np.int64), np.array(stops, np.int64))

    def next_infection(self, i: int, after_pos: int) -> int | None:
        """Event position from which ``i`` is infected right after event ``after_pos``.

        Returns ``after_pos`` itself if ``i`` is infected just after it, the
        position of the next infection otherwise, or None.
        """
        starts, stops = self.intervals[i]
        k = int(np.searchsorted(starts, after_pos, side="right")) - 1
        if k >= 0 and stops[k] > after_pos:
            return after_pos
        if k + 1 < len(starts):
            return int(starts[k + 1])
        return None


def essential_hitting(log: EventLog, A, x, T: float | None = None, start: float = 0.0) -> EssentialRecord:
    """Run the ``u``/``v`` recursion at site ``x`` for the process started from ``A``.

    ``A`` must contain the origin.  ``start`` replaces the initial value
    ``v_0 = 0``; restarting at some ``v_k`` reproduces the tail of the
    recursion from ``start = 0``.
    """
    T = _horizon(log, T)
    sites = _initial_sites(log, A)
    if log.lattice.origin not in sites:
        raise PreconditionError("initial set must contain the origin")
    return _essential(log, sites, [as_site(x, log.lattice.d)], T, start)[0]


def essential_records(log: EventLog, A, xs: Iterable, T: float | None = None) -> list[EssentialRecord]:
    """:func:`essential_hitting` for several sites sharing one trajectory sweep."""
    T = _horizon(log, T)
    sites = _initial_sites(log, A)
    if log.lattice.origin not in sites:
        raise PreconditionError("initial set must contain the origin")
    return _essential(log, sites, [as_site(x, log.lattice.d) for x in xs], T, 0.0)


def _essential(log, sites, xs, T, start) -> list[EssentialRecord]:
    lat = log.lattice
    idx = [lat.index(x) for x in xs]
    traj = _Trajectory(log, sites, sorted(set(idx)), T)
    v_pos = start_position(log, start) - 1
    return [_recursion(log, traj, x, i, T, v_pos, float(start)) for x, i in zip(xs, idx)]


def _recursion(log, traj, x, i, T, v_pos, v_time) -> EssentialRecord:
    u, v = [], []
    boundary = False
    while True:
        p = traj.next_infection(i, v_pos)
        if p is None:
            died = not traj.alive
            return EssentialRecord(
                x, tuple(u), tuple(v), None, None, T,
                never_hit=not u,
                global_death=died,
                branch_censored=bool(u) and not died,
                boundary_contact=boundary,
            )
        u_time = v_time if p == v_pos else float(log.ev_time[p])
        u.append(u_time)
        ext: ExtinctionResult = extinction_from(log, i, p + 1, u_time, T)
        boundary |= ext.boundary_contact
        if ext.alive_at_horizon:
            return EssentialRecord(x, tuple(u), tuple(v), u_time, len(u), T, boundary_contact=boundary)
        if ext.boundary_contact:
            return EssentialRecord(
                x, tuple(u), tuple(v), None, None, T, branch_censored=True, boundary_contact=True
            )
        v_pos, v_time = ext.death_pos, ext.death_time
        v.append(v_time)


def survival_proxy(log: EventLog, seed, T: float | None = None, mode: str = "horizon") -> SurvivalVerdict:
    """Survival verdict for the process started from the point ``seed = (x, s)``.

    SURVIVES if it is alive at ``T``.  A process that died after pushing
    an arrow out of the box is AMBIGUOUS, otherwise DIES.
    """
    if mode != "horizon":
        raise ValueError(f"unknown survival proxy mode {mode!r}")
    T = _horizon(log, T)
    x, s = seed
    if s > T:
        raise HorizonError(f"seed time {s} is after the horizon {T}")
    ext = extinction_from(log, log.lattice.index(x), start_position(log, s), float(s), T)
    if ext.alive_at_horizon:
        verdict = Verdict.SURVIVES
    elif ext.boundary_contact:
        verdict = Verdict.AMBIGUOUS
    else:
        verdict = Verdict.DIES
    return SurvivalVerdict(verdict, ext.death_time, ext.population, ext.boundary_contact)
