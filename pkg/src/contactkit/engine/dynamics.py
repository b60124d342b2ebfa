"""Coupled evolution of the contact process on a shared event log."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..errors import HorizonError, OrderingError, PreconditionError
from ._sweep import sweep
from .eventlog import EventLog
from .lattice import as_site

_NO_TRACK = np.empty(0)


@dataclass(frozen=True)
class ConfigurationSet:
    """Infected sites (as coordinate tuples) at a given time."""

    sites: frozenset
    time: float = 0.0

    @classmethod
    def of(cls, sites: Iterable, d: int, time: float = 0.0) -> "ConfigurationSet":
        return cls(frozenset(as_site(s, d) for s in sites), float(time))

    def __len__(self):
        return len(self.sites)

    def __contains__(self, x):
        key = (int(x),) if np.isscalar(x) else tuple(int(c) for c in x)
        return key in self.sites

    def __iter__(self):
        return iter(sorted(self.sites))

    @property
    def empty(self) -> bool:
        return not self.sites


@dataclass(frozen=True)
class ExtinctionResult:
    """Outcome of the single-site process started at a space-time point.

    ``death_time`` is when the process inside the box became empty (None
    if it was still alive at the horizon).  The result counts as censored
    when the process is alive at the horizon or when it ever pushed an
    arrow out of the box, since its death may then be a killing artifact.
    """

    start: float
    death_time: float | None
    alive_at_horizon: bool
    boundary_contact: bool
    death_pos: int = -1
    population: int = 0

    @property
    def censored(self) -> bool:
        return self.alive_at_horizon or self.boundary_contact

    @property
    def time(self) -> float | None:
        """Extinction time, or None for CENSORED."""
        return None if self.censored else self.death_time


def start_position(log: EventLog, s: float) -> int:
    """Index of the first event strictly after time ``s``."""
    return int(np.searchsorted(log.ev_time, s, side="right"))


def state_vector(log: EventLog, sites: Iterable) -> np.ndarray:
    state = np.zeros(log.lattice.n_sites, dtype=np.uint8)
    for x in sites:
        state[log.lattice.index(x)] = 1
    return state


def run_sweep(log: EventLog, state: np.ndarray, start: int, stop_time: float, first_hit=_NO_TRACK):
    return sweep(log.ev_time, log.ev_kind, log.ev_src, log.ev_dst, start, stop_time, state, first_hit)


def _check_time(log: EventLog, t: float):
    if t > log.horizon:
        raise HorizonError(f"time {t} exceeds the log horizon {log.horizon}")
    if t < 0:
        raise OrderingError(f"negative time {t}")


def evolve(log: EventLog, A, t: float) -> ConfigurationSet:
    """Configuration at time ``t`` of the process started from ``A``.

    ``A`` is either a :class:`ConfigurationSet`, whose timestamp is the
    start time, or an iterable of sites started at time 0.
    """
    if not isinstance(A, ConfigurationSet):
        A = ConfigurationSet.of(A, log.lattice.d)
    _check_time(log, t)
    if t < A.time:
        raise OrderingError(f"cannot evolve backwards from {A.time} to {t}")
    state = state_vector(log, A.sites)
    run_sweep(log, state, start_position(log, A.time), t)
    lat = log.lattice
    return ConfigurationSet(frozenset(lat.site(i) for i in np.flatnonzero(state)), float(t))


def reachable(log: EventLog, source, target) -> bool:
    """Whether an infection path ``(x, s) ~> (y, t)`` exists in the log."""
    (x, s), (y, t) = source, target
    if s > t:
        raise OrderingError(f"source time {s} is after target time {t}")
    _check_time(log, t)
    _check_time(log, s)
    state = state_vector(log, [x])
    run_sweep(log, state, start_position(log, s), t)
    return bool(state[log.lattice.index(y)])


def extinction_from(
    log: EventLog, i: int, start: int, s: float, stop_time: float = math.inf
) -> ExtinctionResult:
    """Extinction of the process started from site index ``i`` before event ``start``."""
    state = np.zeros(log.lattice.n_sites, dtype=np.uint8)
    state[i] = 1
    count, death_pos, boundary, _ = run_sweep(log, state, start, stop_time)
    if count > 0:
        return ExtinctionResult(s, None, True, bool(boundary), population=int(count))
    return ExtinctionResult(s, float(log.ev_time[death_pos]), False, bool(boundary), int(death_pos))


def extinction_time(log: EventLog, seed) -> ExtinctionResult:
    """Death time of the process started from the single point ``seed = (x, s)``."""
    x, s = seed
    _check_time(log, s)
    return extinction_from(log, log.lattice.index(x), start_position(log, s), float(s))


def require_in_box(log: EventLog, sites: Iterable):
    for x in sites:
        if x not in log.lattice:
            raise PreconditionError(f"site {x!r} is not in the lattice region")
