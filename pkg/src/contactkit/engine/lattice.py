"""Finite regions of Z^d with a killing boundary, and infection-rate specs."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError, SiteOutsideBoxError

# stream type tags used in RNG spawn keys; never renumber
STREAM_RECOVERY = 0
STREAM_ARROW = 1
STREAM_ENV = 2


def zigzag(v: int) -> int:
    """Map an integer onto the naturals (0, -1, 1, -2, ... -> 0, 1, 2, 3, ...)."""
    return 2 * v if v >= 0 else -2 * v - 1


def as_site(x, d: int) -> tuple[int, ...]:
    """Normalize a site given as int (d=1) or sequence of ints to a tuple."""
    if np.isscalar(x):
        site = (int(x),)
    else:
        site = tuple(int(c) for c in x)
    if len(site) != d:
        raise ConfigError(f"site {x!r} does not have dimension {d}")
    return site


class Lattice:
    """A finite set of sites of Z^d with nearest-neighbour structure.

    Sites are indexed contiguously in lexicographic order of their
    coordinates.  Each site has exactly ``2d`` neighbour slots; slot
    ``2a`` points along ``+e_a`` and slot ``2a + 1`` along ``-e_a``.  A slot
    whose target lies outside the region holds ``-1``: arrows along it are
    generated but absorb nothing (killing boundary).

    Use :func:`build_lattice` for the usual 1-norm ball; the constructor
    accepts any finite site set, which the oracle comparisons rely on.
    """

    def __init__(self, d: int, sites: Iterable[Sequence[int]], radius: int | None = None):
        if d < 1:
            raise ConfigError(f"dimension must be positive, got {d}")
        coords = sorted({as_site(s, d) for s in sites})
        if not coords:
            raise ConfigError("lattice needs at least one site")
        self.d = int(d)
        self.coords = np.array(coords, dtype=np.int64).reshape(len(coords), d)
        self.coords.setflags(write=False)
        self._index = {c: i for i, c in enumerate(coords)}
        if radius is None:
            radius = int(np.abs(self.coords).sum(axis=1).max())
        self.radius = int(radius)

        nbrs = np.full((len(coords), 2 * d), -1, dtype=np.int64)
        for i, c in enumerate(coords):
            for a in range(d):
                for sign_slot, step in ((0, 1), (1, -1)):
                    y = list(c)
                    y[a] += step
                    nbrs[i, 2 * a + sign_slot] = self._index.get(tuple(y), -1)
        nbrs.setflags(write=False)
        self.neighbors = nbrs

    @property
    def n_sites(self) -> int:
        return self.coords.shape[0]

    @property
    def origin(self) -> tuple[int, ...]:
        return (0,) * self.d

    def __len__(self) -> int:
        return self.n_sites

    def __contains__(self, x) -> bool:
        try:
            return as_site(x, self.d) in self._index
        except ConfigError:
            return False

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Lattice)
            and self.d == other.d
            and np.array_equal(self.coords, other.coords)
        )

    def __hash__(self) -> int:
        return hash((self.d, self.coords.tobytes()))

    def __repr__(self) -> str:
        return f"Lattice(d={self.d}, radius={self.radius}, n_sites={self.n_sites})"

    def index(self, x) -> int:
        """Contiguous index of site ``x``; raises if ``x`` is outside the region."""
        site = as_site(x, self.d)
        try:
            return self._index[site]
        except KeyError:
            raise SiteOutsideBoxError(f"site {site} is outside the lattice region") from None

    def indices(self, sites: Iterable) -> np.ndarray:
        return np.array([self.index(s) for s in sites], dtype=np.int64)

    def site(self, i: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self.coords[i])

    def step(self, x, direction: int) -> tuple[int, ...]:
        """Coordinates of the neighbour of ``x`` along ``direction`` (may lie outside)."""
        a, neg = divmod(direction, 2)
        y = list(as_site(x, self.d))
        y[a] += -1 if neg else 1
        return tuple(y)

    def is_boundary(self, i: int) -> bool:
        return bool((self.neighbors[i] < 0).any())


def build_lattice(d: int, M: int) -> Lattice:
    """All sites ``x`` of Z^d with ``|x|_1 <= M``."""
    if int(d) != d or d < 1:
        raise ConfigError(f"dimension must be a positive integer, got {d!r}")
    if int(M) != M or M < 1:
        raise ConfigError(f"radius must be a positive integer, got {M!r}")
    d, M = int(d), int(M)
    sites = (
        c
        for c in itertools.product(range(-M, M + 1), repeat=d)
        if sum(abs(v) for v in c) <= M
    )
    return Lattice(d, sites, radius=M)


@dataclass(frozen=True)
class RateSpec:
    """Infection rates on directed nearest-neighbour edges; recovery rate is 1.

    Uniform mode sets every edge to ``lam``.  Environment mode (``lam_min``
    and ``lam_max`` given) draws one rate per undirected edge, i.i.d.
    uniform on ``[lam_min, lam_max]``, from a stream keyed by ``env_seed``
    and the edge's coordinates, so both orientations share it.
    """

    lam: float | None = None
    lam_min: float | None = None
    lam_max: float | None = None
    env_seed: int = 0
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.random_environment:
            if self.lam is not None:
                raise ConfigError("give either lam or (lam_min, lam_max), not both")
            if self.lam_min is None or self.lam_max is None:
                raise ConfigError("environment mode needs both lam_min and lam_max")
            if not 0 <= self.lam_min <= self.lam_max:
                raise ConfigError(
                    f"need 0 <= lam_min <= lam_max, got [{self.lam_min}, {self.lam_max}]"
                )
        else:
            if self.lam is None:
                raise ConfigError("infection rate lam is required")
            if not np.isfinite(self.lam) or self.lam < 0:
                raise ConfigError(f"infection rate must be a finite nonnegative number, got {self.lam}")

    @property
    def random_environment(self) -> bool:
        return self.lam_min is not None or self.lam_max is not None

    def edge_rate(self, x: tuple[int, ...], direction: int) -> float:
        """Rate of arrows from ``x`` along ``direction``."""
        if not self.random_environment:
            return float(self.lam)
        a, neg = divmod(direction, 2)
        lower = list(x)
        if neg:
            lower[a] -= 1
        key = (a, *(zigzag(v) for v in lower))
        rate = self._cache.get(key)
        if rate is None:
            ss = np.random.SeedSequence(self.env_seed, spawn_key=(STREAM_ENV, *key))
            u = np.random.Generator(np.random.Philox(ss)).random()
            rate = self.lam_min + (self.lam_max - self.lam_min) * u
            self._cache[key] = rate
        return rate

    def directed_rates(self, lattice: Lattice) -> np.ndarray:
        """Array of shape ``(n_sites, 2d)`` with the rate of every outgoing slot."""
        out = np.empty((lattice.n_sites, 2 * lattice.d))
        if not self.random_environment:
            out.fill(self.lam)
            return out
        for i in range(lattice.n_sites):
            x = lattice.site(i)
            for j in range(2 * lattice.d):
                out[i, j] = self.edge_rate(x, j)
        return out
