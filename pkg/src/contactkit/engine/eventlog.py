"""Graphical representation (Harris construction) inside a finite space-time box.

Every site carries a rate-1 Poisson process of recovery marks and every
directed edge a Poisson process of transmission arrows.  Each process is
drawn from its own counter-based stream (Philox) whose key is derived from
``(root_seed, replica_id, stream type, direction, site coordinates)``
(see :class:`StreamFactory`).  The
key does not mention the box radius or the horizon, so enlarging either
only appends events and never perturbs existing ones.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError
from .lattice import STREAM_ARROW, STREAM_RECOVERY, Lattice, RateSpec, as_site, zigzag

KIND_RECOVERY = 0
KIND_ARROW = 1


class StreamFactory:
    """Keyed Philox streams for the objects of one replica.

    The Philox key of an object is a keyed BLAKE2b digest of ``(stream
    type, direction, site coordinates)``, where the hash key comes from
    ``SeedSequence(root_seed, spawn_key=(replica_id,))``.  One bit
    generator is re-keyed per object, which is much cheaper than building
    a fresh one, so a factory must not be shared between threads.
    """

    _ZERO = np.zeros(4, dtype=np.uint64)

    def __init__(self, root_seed: int, replica_id: int):
        ss = np.random.SeedSequence(int(root_seed), spawn_key=(int(replica_id),))
        self._hash_key = ss.generate_state(4, np.uint64).tobytes()
        self._bitgen = np.random.Philox(0)
        self.generator = np.random.Generator(self._bitgen)

    def key(self, stream: int, site, direction: int = 0) -> np.ndarray:
        words = (stream, int(direction), *(zigzag(v) for v in site))
        digest = hashlib.blake2b(struct.pack(f"<{len(words)}Q", *words), digest_size=16, key=self._hash_key)
        return np.frombuffer(digest.digest(), dtype=np.uint64).copy()

    def stream(self, stream: int, site, direction: int = 0) -> np.random.Generator:
        """The shared generator, rewound to the start of this object's stream."""
        self._bitgen.state = {
            "bit_generator": "Philox",
            "state": {"counter": self._ZERO, "key": self.key(stream, site, direction)},
            "buffer": self._ZERO,
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self.generator


def object_stream(root_seed: int, replica_id: int, stream: int, site, direction: int = 0):
    """Independent generator for one recovery/arrow process (same stream as the factory)."""
    factory = StreamFactory(root_seed, replica_id)
    factory.stream(stream, site, direction)
    return factory.generator


def poisson_times(gen: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Arrival times in ``(0, horizon]`` of a Poisson process of ``rate``.

    The n-th arrival is the sequential sum of the first n exponential gaps,
    so the result for a larger horizon extends the one for a smaller
    horizon bit for bit.
    """
    if rate <= 0.0:
        return np.empty(0)
    mean = rate * horizon
    chunk = int(mean + 4.0 * np.sqrt(mean)) + 8
    parts = []
    last = 0.0
    while True:
        gaps = gen.standard_exponential(chunk)
        if rate != 1.0:
            gaps /= rate
        # sequential sums: 0 + g is exact, later chunks continue from the last arrival
        t = gaps.cumsum() if not parts else np.concatenate(([last], gaps)).cumsum()[1:]
        if t[-1] > horizon:
            parts.append(t[: t.searchsorted(horizon, side="right")])
            break
        parts.append(t)
        last = t[-1]
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


class EventLog:
    """Immutable recovery marks and arrows of one replica in a finite box.

    Per-object lists are stored CSR-style: recovery marks of site ``i`` are
    ``recovery_times[recovery_offsets[i]:recovery_offsets[i + 1]]`` and the
    arrows of slot ``e = i * 2d + j`` (site ``i``, direction ``j``) are
    ``arrow_times[arrow_offsets[e]:arrow_offsets[e + 1]]``.

    All events are also merged into one sequence ordered by (time, event
    id), where the event id is the position in the per-object layout.  The
    sweeps in :mod:`contactkit.engine.dynamics` walk that sequence.
    """

    def __init__(
        self,
        lattice: Lattice,
        horizon: float,
        recovery_offsets: np.ndarray,
        recovery_times: np.ndarray,
        arrow_offsets: np.ndarray,
        arrow_times: np.ndarray,
        rates: RateSpec | None = None,
        root_seed: int | None = None,
        replica_id: int | None = None,
    ):
        self.lattice = lattice
        self.horizon = float(horizon)
        self.rates = rates
        self.root_seed = root_seed
        self.replica_id = replica_id
        self.recovery_offsets = recovery_offsets
        self.recovery_times = recovery_times
        self.arrow_offsets = arrow_offsets
        self.arrow_times = arrow_times
        self._check()
        self._merge()
        for arr in (
            self.recovery_offsets, self.recovery_times, self.arrow_offsets, self.arrow_times,
            self.ev_time, self.ev_kind, self.ev_src, self.ev_dst,
        ):
            arr.setflags(write=False)

    def _check(self):
        n, two_d = self.lattice.n_sites, 2 * self.lattice.d
        if len(self.recovery_offsets) != n + 1 or len(self.arrow_offsets) != n * two_d + 1:
            raise ConfigError("event offsets do not match the lattice")
        for offsets, times in (
            (self.recovery_offsets, self.recovery_times),
            (self.arrow_offsets, self.arrow_times),
        ):
            if len(times) and (times.min() <= 0.0 or times.max() > self.horizon):
                raise ConfigError("event times must lie in (0, horizon]")
            first = np.zeros(len(times), dtype=bool)
            first[offsets[:-1][np.diff(offsets) > 0]] = True
            if not (first[1:] | (np.diff(times) > 0)).all():
                raise ConfigError("per-object event times must be strictly increasing")

    def _merge(self):
        lat = self.lattice
        two_d = 2 * lat.d
        n_rec = np.diff(self.recovery_offsets)
        n_arr = np.diff(self.arrow_offsets)
        rec_site = np.repeat(np.arange(lat.n_sites), n_rec)
        slot = np.repeat(np.arange(lat.n_sites * two_d), n_arr)
        arr_site = slot // two_d
        arr_dst = lat.neighbors.reshape(-1)[slot]

        # event id order: all recovery marks, then all arrows; ties in time
        # are broken by this order through the stable sort
        times = np.concatenate((self.recovery_times, self.arrow_times))
        order = np.argsort(times, kind="stable")
        self.ev_time = times[order]
        self.ev_kind = np.concatenate(
            (np.full(len(rec_site), KIND_RECOVERY, np.int8), np.full(len(slot), KIND_ARROW, np.int8))
        )[order]
        self.ev_src = np.concatenate((rec_site, arr_site)).astype(np.int64)[order]
        self.ev_dst = np.concatenate((np.full(len(rec_site), -1, np.int64), arr_dst))[order]

    @property
    def n_events(self) -> int:
        return len(self.ev_time)

    def recovery_marks(self, x) -> np.ndarray:
        i = self.lattice.index(x)
        return self.recovery_times[self.recovery_offsets[i]:self.recovery_offsets[i + 1]]

    def arrows(self, x, direction: int) -> np.ndarray:
        e = self.lattice.index(x) * 2 * self.lattice.d + direction
        return self.arrow_times[self.arrow_offsets[e]:self.arrow_offsets[e + 1]]

    def digest(self) -> str:
        """SHA-256 over the per-object event arrays."""
        h = hashlib.sha256()
        h.update(repr((self.lattice.d, self.horizon)).encode())
        h.update(self.lattice.coords.tobytes())
        for arr in (self.recovery_offsets, self.recovery_times, self.arrow_offsets, self.arrow_times):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def __repr__(self) -> str:
        return (
            f"EventLog({self.lattice!r}, horizon={self.horizon}, events={self.n_events}, "
            f"replica_id={self.replica_id})"
        )

    @classmethod
    def from_events(
        cls,
        lattice: Lattice,
        horizon: float,
        recoveries: Mapping | None = None,
        arrows: Mapping | None = None,
    ) -> "EventLog":
        """Build a log from explicit event lists.

        ``recoveries`` maps a site to its recovery-mark times; ``arrows``
        maps ``(source, target)`` to arrow times.  Targets must be nearest
        neighbours of the source and may lie outside the region.
        """
        d = lattice.d
        two_d = 2 * d
        rec_lists = [[] for _ in range(lattice.n_sites)]
        arr_lists = [[] for _ in range(lattice.n_sites * two_d)]
        for x, ts in (recoveries or {}).items():
            rec_lists[lattice.index(x)] = sorted(float(t) for t in ts)
        for (x, y), ts in (arrows or {}).items():
            sx, sy = as_site(x, d), as_site(y, d)
            diff = [b - a for a, b in zip(sx, sy)]
            if sum(abs(v) for v in diff) != 1:
                raise ConfigError(f"arrow {sx} -> {sy} is not between nearest neighbours")
            a = next(k for k, v in enumerate(diff) if v)
            direction = 2 * a + (0 if diff[a] > 0 else 1)
            arr_lists[lattice.index(sx) * two_d + direction] = sorted(float(t) for t in ts)
        return cls(lattice, horizon, *_pack(rec_lists), *_pack(arr_lists))


def _pack(lists: Sequence[Sequence[float]]):
    counts = np.array([len(v) for v in lists], dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    flat = np.concatenate([np.asarray(v, dtype=float) for v in lists]) if lists else np.empty(0)
    return offsets, flat.astype(float)


def generate_event_log(
    lattice: Lattice,
    rates: RateSpec,
    T: float,
    root_seed: int,
    replica_id: int,
    slot_rates: np.ndarray | None = None,
) -> EventLog:
    """Sample the graphical representation of one replica on ``lattice`` up to time ``T``.

    Arrows along slots that leave the region are sampled too (they are
    needed to detect boundary contact) but never infect anything.
    ``slot_rates`` may carry ``rates.directed_rates(lattice)`` precomputed.
    """
    if not T > 0 or not np.isfinite(T):
        raise ConfigError(f"horizon must be a positive finite number, got {T}")
    if root_seed < 0 or replica_id < 0:
        raise ConfigError("seeds and replica ids must be nonnegative")
    two_d = 2 * lattice.d
    if slot_rates is None:
        slot_rates = rates.directed_rates(lattice)
    streams = StreamFactory(root_seed, replica_id)
    rec_lists = []
    arr_lists = []
    # a tiny rate can overflow a gap to inf, which simply lands past the horizon
    with np.errstate(over="ignore"):
        for i in range(lattice.n_sites):
            x = lattice.site(i)
            rec_lists.append(poisson_times(streams.stream(STREAM_RECOVERY, x), 1.0, T))
            for j in range(two_d):
                rate = slot_rates[i, j]
                if rate > 0.0:
                    arr_lists.append(poisson_times(streams.stream(STREAM_ARROW, x, j), rate, T))
                else:
                    arr_lists.append(np.empty(0))
    return EventLog(
        lattice, T, *_pack(rec_lists), *_pack(arr_lists),
        rates=rates, root_seed=root_seed, replica_id=replica_id,
    )
