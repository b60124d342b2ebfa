import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contactkit.config import ExperimentConfig
from contactkit.errors import AcceptanceCapError, FitUndefinedError, PreconditionError, SiteOutsideBoxError
from contactkit.hitting import EssentialRecord, Verdict, survival_proxy
from contactkit.stats import (
    ReplicaBatch,
    ReplicaRecord,
    ReplicaSimulator,
    estimate_mu,
    estimate_rho,
    run_replicas,
    sigma_gap_tail,
    theorem1_order_stats,
    theorem2_moment_stats,
    wilson_interval,
)

SMALL = ExperimentConfig(
    kind="theorem1", seed=17, d=1, radius=30, lam=2.0, horizon=30.0, replicas=60,
    direction=(2,), n=5, n_list=(2, 4), pairs=(((2,), (6,)), ((-4,), (4,)), ((0,), (8,))),
    sites=((-4,), (4,), (8,)), L_grid=(0.0, 0.5, 1.0, 2.0, 4.0), bootstrap=200,
)


TRACKED = [(i,) for i in range(-12, 13)]


@pytest.fixture(scope="module")
def batch():
    return run_replicas(SMALL, tracked=TRACKED)


def statistics(b):
    """Every estimator output on ``b`` as plain data, for exact comparisons."""
    return (
        estimate_rho(b).rows(),
        estimate_mu(b, (2,), (2, 4)).rows(),
        theorem1_order_stats(b, (2,), 5).rows(),
        theorem1_order_stats(b, (2,), 5).summary(),
        theorem2_moment_stats(b, SMALL.pairs, 1.0).rows(),
        theorem2_moment_stats(b, SMALL.pairs, 2.0).summary(),
        sigma_gap_tail(b, SMALL.sites, SMALL.L_grid, fit=False).rows(),
    )


# intervals ---------------------------------------------------------------------------------------

def test_wilson_reference_value():
    lo, hi = wilson_interval(50, 100, 0.95)
    assert lo == pytest.approx(0.4038, abs=5e-4) and hi == pytest.approx(0.5962, abs=5e-4)


def test_wilson_endpoints():
    assert wilson_interval(0, 17)[0] == 0.0
    assert wilson_interval(17, 17)[1] == 1.0


@pytest.mark.parametrize("s,n", [(-1, 5), (6, 5), (0, 0), (1.5, 4)])
def test_wilson_invalid(s, n):
    with pytest.raises(PreconditionError):
        wilson_interval(s, n)


@given(n=st.integers(1, 10_000), frac=st.floats(0, 1), conf=st.floats(0.5, 0.999))
def test_wilson_contains_estimate(n, frac, conf):
    s = int(round(frac * n))
    lo, hi = wilson_interval(s, n, conf)
    assert 0.0 <= lo <= s / n <= hi <= 1.0


# batches -----------------------------------------------------------------------------------------

def test_zero_rate_hits_the_cap():
    cfg = SMALL.replace(lam=0.0, replicas=5, max_attempts=40)
    with pytest.raises(AcceptanceCapError) as info:
        run_replicas(cfg)
    assert info.value.rejection_rate == 1.0
    assert info.value.batch.n_accepted == 0 and info.value.batch.total == 40


def test_batch_stops_at_target(batch):
    assert batch.n_accepted == SMALL.replicas
    assert batch.records[-1].accepted
    assert [r.replica_id for r in batch.records] == list(range(batch.total))


def test_rerun_reproduces_record(batch):
    sim = ReplicaSimulator(SMALL, tracked=TRACKED)
    for rec in batch.records[::7]:
        assert sim.run(rec.replica_id) == rec


def test_precheck_matches_full_log():
    cfg = SMALL.replace(radius=40, horizon=40.0, precheck_radius=6, precheck_horizon=4.0)
    sim = ReplicaSimulator(cfg)
    n_pre = 0
    for rid in range(150):
        rec = sim.run(rid)
        full = survival_proxy(sim.event_log(rid), ((0,), 0.0))
        assert rec.verdict is full.verdict
        if rec.prechecked:
            n_pre += 1
            assert rec.extinction_time == full.extinction_time
    assert n_pre > 20


def test_threads_do_not_change_batch(batch):
    assert run_replicas(SMALL, threads=3, block=5, tracked=TRACKED).records == batch.records


def test_conditioning_only_uses_survivors(batch):
    assert batch.n_rejected > 0
    assert all(r.verdict is Verdict.SURVIVES for r in batch.accepted)
    assert len(batch.hit_matrix([(2,)])) == batch.n_accepted


def test_statistics_invariant_under_reorder_and_merge(batch):
    ref = statistics(batch)
    shuffled = ReplicaBatch(SMALL, tuple(reversed(batch.records)), batch.tracked, batch.essential_sites)
    assert statistics(shuffled) == ref
    ids = [r.replica_id for r in batch.records]
    left, right = batch.subset(ids[::2]), batch.subset(ids[1::2])
    assert statistics(left.merge(right)) == ref
    assert statistics(right.merge(left)) == ref
    a, b, c = batch.subset(ids[:10]), batch.subset(ids[10:40]), batch.subset(ids[40:])
    assert statistics(a.merge(b).merge(c)) == statistics(a.merge(b.merge(c))) == ref


def test_duplicate_ids_rejected(batch):
    with pytest.raises(Exception):
        batch.merge(batch)


# estimators --------------------------------------------------------------------------------------

def _record(rid, verdict=Verdict.SURVIVES, hits=None, essential=None):
    return ReplicaRecord(rid, verdict, False, None, 1, hits or {}, essential or {})


def test_rho_counts():
    cfg = SMALL.replace(kind="rho")
    recs = [_record(i) for i in range(50)] + [_record(50 + i, Verdict.DIES) for i in range(50)]
    est = estimate_rho(ReplicaBatch(cfg, tuple(recs)))
    assert est.rho == 0.5
    assert est.ci == pytest.approx((0.4038, 0.5962), abs=5e-4)
    none = estimate_rho(ReplicaBatch(cfg, tuple(_record(i, Verdict.DIES) for i in range(9))))
    assert none.rho == 0.0 and none.ci[0] == 0.0


def test_rho_brackets_ambiguous():
    recs = [_record(0), _record(1, Verdict.DIES), _record(2, Verdict.AMBIGUOUS), _record(3, Verdict.DIES)]
    est = estimate_rho(ReplicaBatch(SMALL, tuple(recs)))
    assert est.rho == pytest.approx(1 / 3)
    assert (est.rho_low, est.rho_high) == (0.25, 0.5)
    with pytest.raises(PreconditionError):
        estimate_rho(ReplicaBatch(SMALL, (_record(0, Verdict.AMBIGUOUS),)))


def test_rho_respects_first_step_bound(batch):
    est = estimate_rho(batch)
    n = est.accepted + est.rejected
    assert est.rho <= 0.8 + 3 * math.sqrt(0.8 * 0.2 / n)


def test_order_stats_invariants(batch):
    for x, n in [((1,), 6), ((2,), 5), ((-3,), 4)]:
        st_ = theorem1_order_stats(batch, x, n)
        assert st_.p_hat[0] == 1.0
        assert ((st_.p_hat >= 0) & (st_.p_hat <= 1)).all()
        assert ((st_.ci_lo <= st_.p_hat) & (st_.p_hat <= st_.ci_hi)).all()
        assert st_.cesaro == pytest.approx(np.mean(st_.p_hat), abs=1e-15)
        assert len(st_.rows()) == n
    assert theorem1_order_stats(batch, (3,), 1).cesaro == 1.0


def test_order_stats_censoring_convention():
    cfg = SMALL.replace(radius=10)
    tracked = ((0,), (1,), (2,), (3,))
    inf = math.inf
    rows = [
        {(0,): 0.0, (1,): 1.0, (2,): inf, (3,): inf},  # k=2 ordered (flag), k=3 dropped (flag)
        {(0,): 0.0, (1,): 2.0, (2,): 1.0, (3,): 3.0},  # k=2 unordered
    ]
    b = ReplicaBatch(cfg, tuple(_record(i, hits=h) for i, h in enumerate(rows)), tracked)
    st_ = theorem1_order_stats(b, (1,), 3, n_boot=10)
    assert st_.p_hat.tolist() == [1.0, 0.5, 1.0]
    assert st_.trials.tolist() == [2, 2, 1]
    assert st_.flagged_fraction.tolist() == [0.0, 0.5, 0.5]


def test_order_stats_outside_box(batch):
    with pytest.raises(SiteOutsideBoxError):
        theorem1_order_stats(batch, (4,), 10)


def test_moment_stats(batch):
    fwd = theorem2_moment_stats(batch, [((2,), (6,)), ((-4,), (4,))], 1.0)
    rev = theorem2_moment_stats(batch, [((6,), (2,)), ((4,), (-4,))], 1.0)
    assert np.array_equal(fwd.ratio, rev.ratio)
    assert (fwd.ratio >= 0).all()
    assert ((fwd.ci_lo <= fwd.ratio) & (fwd.ratio <= fwd.ci_hi)).all()
    assert set(fwd.by_distance) == {4, 8}
    with pytest.raises(PreconditionError):
        theorem2_moment_stats(batch, [((2,), (2,))], 1.0)
    with pytest.raises(PreconditionError):
        theorem2_moment_stats(batch, [((2,), (6,))], 0.0)


def test_mu_estimates(batch):
    origin = estimate_mu(batch, (0,), [1, 2])
    assert origin.mu.tolist() == [0.0, 0.0]
    plus = estimate_mu(batch, (2,), [2, 4])
    assert (plus.mu > 0).all() and (plus.n_used > 0).all()
    assert plus.drift == pytest.approx((plus.mu[1] - plus.mu[0]) / plus.mu[0])
    with pytest.raises(SiteOutsideBoxError):
        estimate_mu(batch, (20,), [2])


def test_mu_reflection_symmetry():
    cfg = SMALL.replace(kind="shape", seed=3, direction=(5,), n_list=(1, 2), sites=(), pairs=(), n=None,
                        replicas=150)
    b = run_replicas(cfg, tracked=[(0,), (5,), (10,), (-5,), (-10,)])
    plus, minus = estimate_mu(b, (5,), [1, 2]), estimate_mu(b, (-5,), [1, 2])
    for k in range(2):
        gap = abs(plus.mu[k] - minus.mu[k])
        assert gap <= 3 * plus.se[k] + 3 * minus.se[k]


@pytest.mark.slow
def test_mu_consistent_between_scales():
    cfg = ExperimentConfig(kind="shape", seed=5, d=1, radius=50, lam=2.0, horizon=150.0, replicas=200,
                           direction=(1,), n_list=(20, 40))
    est = estimate_mu(run_replicas(cfg), (1,), (20, 40))
    assert (est.n_censored == 0).all()
    assert abs(est.drift) <= 0.10


def _ess(site, K, gap, t=1.0):
    u = tuple(t + gap * i / max(K - 1, 1) for i in range(K)) if K > 1 else (t,)
    v = tuple((a + b) / 2 for a, b in zip(u, u[1:]))
    return EssentialRecord(site, u, v, u[-1], K, 50.0)


def test_tail_all_k1_is_zero_and_fit_undefined():
    sites = ((2,), (4,))
    recs = tuple(_record(i, essential={s: _ess(s, 1, 0.0) for s in sites}) for i in range(30))
    b = ReplicaBatch(SMALL, recs, (), sites)
    curve = sigma_gap_tail(b, sites, [0.0, 1.0, 2.0], fit=False)
    assert curve.q_hat.tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(FitUndefinedError):
        sigma_gap_tail(b, sites, [0.0, 1.0, 2.0])


def test_tail_at_zero_is_renewal_fraction(batch):
    curve = sigma_gap_tail(batch, SMALL.sites, SMALL.L_grid, fit=False)
    recs = [r.essential[s] for r in batch.accepted for s in SMALL.sites if r.essential[s].sigma is not None]
    assert curve.n == len(recs)
    assert curve.q_hat[0] == sum(r.K >= 2 for r in recs) / len(recs)
    assert ((curve.ci_lo <= curve.q_hat) & (curve.q_hat <= curve.ci_hi)).all()


def test_tail_fit_recovers_stretched_exponential():
    # gaps with P(G > L) = exp(-L**0.5), assigned deterministically by quantile
    sites = ((2,),)
    n = 4000
    gaps = (-np.log((np.arange(n) + 0.5) / n)) ** 2
    recs = tuple(_record(i, essential={sites[0]: _ess(sites[0], 2, float(g))}) for i, g in enumerate(gaps))
    b = ReplicaBatch(SMALL.replace(bootstrap=50), recs, (), sites)
    curve = sigma_gap_tail(b, sites, [0.5, 1.0, 2.0, 4.0, 8.0])
    assert curve.gamma == pytest.approx(0.5, abs=0.02)
    assert 0 < curve.gamma_ci[0] <= curve.gamma <= curve.gamma_ci[1]


def test_tail_bad_grid(batch):
    with pytest.raises(PreconditionError):
        sigma_gap_tail(batch, SMALL.sites, [2.0, 1.0])
    with pytest.raises(PreconditionError):
        sigma_gap_tail(batch, [(6,)], [1.0])
