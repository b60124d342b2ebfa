"""Replica batches conditioned on survival of the process started from the origin."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..config import ExperimentConfig
from ..engine.eventlog import generate_event_log
from ..engine.lattice import build_lattice
from ..errors import AcceptanceCapError, ConfigError, SiteOutsideBoxError
from ..hitting import EssentialRecord, Verdict, essential_records, hitting_times, survival_proxy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReplicaRecord:
    replica_id: int
    verdict: Verdict
    boundary_contact: bool
    extinction_time: float | None
    population: int
    hits: dict = field(default_factory=dict)
    essential: dict = field(default_factory=dict)
    prechecked: bool = field(default=False, compare=False)

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.SURVIVES

    def to_dict(self) -> dict:
        def ess(r: EssentialRecord):
            return dict(
                u=list(r.u), v=list(r.v), sigma=r.sigma, K=r.K, never_hit=r.never_hit,
                global_death=r.global_death, branch_censored=r.branch_censored,
                boundary_contact=r.boundary_contact,
            )

        return dict(
            replica_id=self.replica_id,
            verdict=self.verdict.value,
            boundary_contact=self.boundary_contact,
            extinction_time=self.extinction_time,
            population=self.population,
            hits={",".join(map(str, k)): (None if np.isinf(t) else t) for k, t in self.hits.items()},
            essential={",".join(map(str, k)): ess(r) for k, r in self.essential.items()},
        )


class ReplicaSimulator:
    """Simulates single replicas of a configuration.

    A replica whose origin process dies inside a small box before a short
    horizon, without ever pushing an arrow out of that box, is rejected
    right there.  Event streams are keyed by site and edge, so the small
    box sees exactly the events of the full box and the verdict is the
    one the full log would give.
    """

    def __init__(self, config: ExperimentConfig, tracked: Iterable | None = None,
                 essential: Iterable | None = None):
        self.config = config
        self.lattice = build_lattice(config.d, config.radius)
        self.rates = config.rate_spec()
        self.tracked = tuple(sorted(set(tracked if tracked is not None else config.tracked_sites())))
        self.essential_sites = tuple(sorted(set(essential if essential is not None else config.essential_sites())))
        for x in self.tracked + self.essential_sites:
            if x not in self.lattice:
                raise SiteOutsideBoxError(f"tracked site {x} lies outside the box of radius {config.radius}")
        self.slot_rates = self.rates.directed_rates(self.lattice)
        pr = min(config.precheck_radius, config.radius)
        ph = min(config.precheck_horizon, config.horizon)
        self.small = None
        if pr < config.radius or ph < config.horizon:
            self.small = (build_lattice(config.d, pr), ph)
        self.origin = (0,) * config.d

    def event_log(self, replica_id: int):
        cfg = self.config
        return generate_event_log(self.lattice, self.rates, cfg.horizon, cfg.seed, replica_id,
                                  slot_rates=self.slot_rates)

    def run(self, replica_id: int) -> ReplicaRecord:
        cfg = self.config
        if self.small is not None:
            lat, T0 = self.small
            small_log = generate_event_log(lat, self.rates, T0, cfg.seed, replica_id)
            sv = survival_proxy(small_log, (self.origin, 0.0))
            if sv.verdict is Verdict.DIES:
                return ReplicaRecord(replica_id, Verdict.DIES, False, sv.extinction_time, 0, prechecked=True)
        ev = self.event_log(replica_id)
        sv = survival_proxy(ev, (self.origin, 0.0))
        if sv.verdict is not Verdict.SURVIVES:
            return ReplicaRecord(replica_id, sv.verdict, sv.boundary_contact, sv.extinction_time, 0)
        hits = hitting_times(ev, [self.origin], self.tracked).times
        ess = {}
        if self.essential_sites:
            recs = essential_records(ev, [self.origin], self.essential_sites)
            ess = {r.site: r for r in recs}
        return ReplicaRecord(replica_id, sv.verdict, sv.boundary_contact, None, sv.population, hits, ess)


@dataclass(frozen=True)
class ReplicaBatch:
    """All simulated replicas of one configuration, ordered by replica id.

    ``accepted`` replicas (global verdict SURVIVES) are the sample for
    every estimator conditioned on survival; DIES counts as rejected and
    AMBIGUOUS is kept apart.
    """

    config: ExperimentConfig
    records: tuple
    tracked: tuple = ()
    essential_sites: tuple = ()

    def __post_init__(self):
        recs = tuple(sorted(self.records, key=lambda r: r.replica_id))
        ids = [r.replica_id for r in recs]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate replica ids in batch")
        object.__setattr__(self, "records", recs)

    @property
    def accepted(self) -> list[ReplicaRecord]:
        return [r for r in self.records if r.verdict is Verdict.SURVIVES]

    @property
    def n_accepted(self) -> int:
        return sum(r.verdict is Verdict.SURVIVES for r in self.records)

    @property
    def n_rejected(self) -> int:
        return sum(r.verdict is Verdict.DIES for r in self.records)

    @property
    def n_ambiguous(self) -> int:
        return sum(r.verdict is Verdict.AMBIGUOUS for r in self.records)

    @property
    def total(self) -> int:
        return len(self.records)

    def merge(self, other: "ReplicaBatch") -> "ReplicaBatch":
        """Pool two batches of the same configuration (union of replicas)."""
        if self.tracked != other.tracked or self.essential_sites != other.essential_sites:
            raise ConfigError("cannot merge batches tracking different sites")
        return ReplicaBatch(self.config, self.records + other.records, self.tracked, self.essential_sites)

    def subset(self, replica_ids: Iterable[int]) -> "ReplicaBatch":
        keep = set(replica_ids)
        return ReplicaBatch(self.config, tuple(r for r in self.records if r.replica_id in keep),
                            self.tracked, self.essential_sites)

    def hit_matrix(self, sites) -> np.ndarray:
        """Hitting times of ``sites`` (columns) over accepted replicas (rows)."""
        acc = self.accepted
        out = np.empty((len(acc), len(sites)))
        for j, x in enumerate(sites):
            if x not in self.tracked:
                raise SiteOutsideBoxError(f"site {x} is not tracked by this batch")
            for i, r in enumerate(acc):
                out[i, j] = r.hits[x]
        return out

    def diagnostics(self) -> dict:
        total = self.total
        return dict(
            total=total,
            accepted=self.n_accepted,
            rejected=self.n_rejected,
            ambiguous=self.n_ambiguous,
            acceptance_rate=self.n_accepted / total if total else float("nan"),
            rejection_rate=1.0 - self.n_accepted / total if total else float("nan"),
            ambiguous_fraction=self.n_ambiguous / total if total else float("nan"),
            boundary_contact_fraction=(
                sum(r.boundary_contact for r in self.records) / total if total else float("nan")
            ),
        )

    def seed_rows(self) -> list[dict]:
        return [
            dict(replica_id=r.replica_id, root_seed=self.config.seed, verdict=r.verdict.value,
                 boundary_contact=int(r.boundary_contact))
            for r in self.records
        ]


def run_replicas(
    config: ExperimentConfig,
    threads: int = 1,
    tracked: Iterable | None = None,
    essential: Iterable | None = None,
    block: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> ReplicaBatch:
    """Simulate replicas ``0, 1, 2, ...`` until ``config.replicas`` are accepted.

    The batch keeps replicas up to and including the target-th accepted
    one, so it does not depend on ``threads`` or ``block``.

    Raises
    ------
    AcceptanceCapError
        if the attempt cap is reached first; the partial batch is attached.
    """
    sim = ReplicaSimulator(config, tracked, essential)
    threads = max(1, int(threads))
    block = block or max(32, 8 * threads)
    target, cap = config.replicas, config.attempt_cap
    records, n_acc, next_id = [], 0, 0
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        while n_acc < target and next_id < cap:
            ids = range(next_id, min(next_id + block, cap))
            outs = pool.map(sim.run, ids) if pool else map(sim.run, ids)
            for rec in outs:
                records.append(rec)
                n_acc += rec.accepted
                if n_acc == target:
                    break
            next_id = ids.stop
            if progress is not None:
                progress(n_acc, len(records))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    batch = ReplicaBatch(config, tuple(records), sim.tracked, sim.essential_sites)
    if n_acc < target:
        rate = 1.0 - n_acc / len(records) if records else 1.0
        raise AcceptanceCapError(
            f"accepted {n_acc} of {len(records)} replicas (target {target}); rejection rate {rate:.4f}; "
            "lambda may be subcritical or the horizon/box too small",
            batch,
        )
    log.info("batch done: %d accepted of %d", n_acc, len(records))
    return batch
