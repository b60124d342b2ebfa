"""Exact contact-process laws on tiny site sets via the subset-state CTMC.

States are bitmasks over ``chain.sites``: bit ``i`` set means site ``i`` is
infected.  An infected site recovers at rate 1; a healthy site becomes
infected at rate ``lambda`` times its number of infected neighbours
(nearest neighbours in 1-norm).  Sites outside the set never become
infected, which is the killing boundary used by the engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy import stats
from scipy.sparse.linalg import spsolve

from .engine.lattice import as_site
from .errors import ConfigError, PreconditionError

MAX_SITES = 12


@dataclass(frozen=True)
class SubsetChain:
    sites: tuple
    lam: float
    generator: sp.csr_matrix

    @property
    def n_states(self) -> int:
        return 1 << len(self.sites)

    def mask(self, subset: Iterable) -> int:
        d = len(self.sites[0])
        pos = {s: i for i, s in enumerate(self.sites)}
        m = 0
        for x in subset:
            key = as_site(x, d)
            if key not in pos:
                raise PreconditionError(f"site {key} is not in the chain")
            m |= 1 << pos[key]
        return m

    def subset(self, mask: int) -> frozenset:
        return frozenset(s for i, s in enumerate(self.sites) if mask >> i & 1)

    def bit(self, x) -> int:
        return self.mask([x])


def build_subset_chain(sites: Iterable, lam: float, edge_rates: Mapping | None = None) -> SubsetChain:
    """Generator of the contact process restricted to ``sites``.

    ``edge_rates`` optionally maps ``frozenset({x, y})`` to the infection
    rate of that edge, overriding ``lam``.
    """
    sites = list(sites)
    if not sites:
        raise ConfigError("need at least one site")
    d = 1 if np.isscalar(sites[0]) else len(sites[0])
    sites = tuple(dict.fromkeys(as_site(s, d) for s in sites))
    n = len(sites)
    if n > MAX_SITES:
        raise ConfigError(f"at most {MAX_SITES} sites supported, got {n}")
    if lam < 0:
        raise ConfigError(f"infection rate must be >= 0, got {lam}")
    edge_rates = {frozenset(map(tuple, k)): float(v) for k, v in (edge_rates or {}).items()}

    rate = np.zeros((n, n))
    for i, x in enumerate(sites):
        for j, y in enumerate(sites):
            if sum(abs(a - b) for a, b in zip(x, y)) == 1:
                rate[i, j] = edge_rates.get(frozenset((x, y)), lam)

    N = 1 << n
    states = np.arange(N)
    bits = (states[:, None] >> np.arange(n)[None, :]) & 1  # (N, n)
    rows, cols, vals = [], [], []
    for i in range(n):
        inf_i = bits[:, i] == 1
        # recovery of site i
        rows.append(states[inf_i])
        cols.append(states[inf_i] ^ (1 << i))
        vals.append(np.ones(inf_i.sum()))
        # infection of site i from infected neighbours
        r = bits @ rate[:, i]
        go = (~inf_i) & (r > 0)
        rows.append(states[go])
        cols.append(states[go] | (1 << i))
        vals.append(r[go])
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    Q = (Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())).tocsr()
    return SubsetChain(sites, float(lam), Q)


def _initial(chain: SubsetChain, initial) -> np.ndarray:
    if isinstance(initial, np.ndarray) and initial.dtype.kind == "f":
        if initial.shape != (chain.n_states,):
            raise PreconditionError("initial distribution has the wrong length")
        return initial.astype(float)
    pi = np.zeros(chain.n_states)
    pi[chain.mask(initial)] = 1.0
    return pi


def uniformize(Q: sp.csr_matrix, pi: np.ndarray, t: float, tol: float = 1e-10) -> np.ndarray:
    """``pi @ expm(Q t)`` by uniformization, dropping Poisson tail mass below ``tol``."""
    if t < 0:
        raise PreconditionError(f"time must be >= 0, got {t}")
    q = float(-Q.diagonal().min()) if Q.shape[0] else 0.0
    if t == 0 or q == 0:
        return pi.copy()
    qt = q * t
    n_terms = int(stats.poisson.isf(tol, qt)) + 2
    while stats.poisson.sf(n_terms - 1, qt) >= tol:
        n_terms += 1
    weights = stats.poisson.pmf(np.arange(n_terms), qt)
    P = (sp.identity(Q.shape[0], format="csr") + Q / q).T.tocsr()
    v = pi.copy()
    out = weights[0] * v
    for k in range(1, n_terms):
        v = P @ v
        out += weights[k] * v
    return out


def transient_probability(chain: SubsetChain, initial, t: float, tol: float = 1e-10) -> np.ndarray:
    """Distribution over subsets (indexed by bitmask) at time ``t``."""
    return uniformize(chain.generator, _initial(chain, initial), t, tol)


def extinction_probability(chain: SubsetChain, initial, t: float) -> float:
    """P(configuration empty at time t)."""
    return float(transient_probability(chain, initial, t)[0])


def _absorbing(chain: SubsetChain, target_bit: int) -> sp.csr_matrix:
    Q = chain.generator.tolil(copy=True)
    hit = np.flatnonzero(np.arange(chain.n_states) & target_bit)
    for s in hit:
        Q.rows[s] = []
        Q.data[s] = []
    return Q.tocsr()


def hitting_probability(chain: SubsetChain, initial, target, horizon: float | None = None) -> float:
    """Probability that ``target`` is ever infected (by ``horizon`` if given)."""
    init = chain.mask(initial)
    tb = chain.bit(target)
    if init & tb:
        return 1.0
    if horizon is not None and math.isfinite(horizon):
        Q = _absorbing(chain, tb)
        pi = np.zeros(chain.n_states)
        pi[init] = 1.0
        dist = uniformize(Q, pi, horizon)
        return float(dist[np.arange(chain.n_states) & tb > 0].sum())
    if init == 0:
        return 0.0
    states = np.arange(chain.n_states)
    transient = np.flatnonzero((states & tb == 0) & (states != 0))
    hit = states & tb > 0
    Q = chain.generator
    A = Q[transient][:, transient]
    b = -np.asarray(Q[transient][:, hit].sum(axis=1)).ravel()
    h = np.atleast_1d(spsolve(A.tocsc(), b))
    return float(np.clip(h[np.searchsorted(transient, init)], 0.0, 1.0))
