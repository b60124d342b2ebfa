"""Estimators over replica batches conditioned on survival.

Every estimator reads the accepted replicas in replica-id order and draws
bootstrap resamples from a fixed seed, so results are exactly invariant
under reordering the batch or splitting and re-merging it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import FitUndefinedError, PreconditionError, SiteOutsideBoxError
from ..hitting import InvariantViolation, Verdict
from .batch import ReplicaBatch
from .intervals import percentile_interval, resample_weights, wilson_interval

_ORDER_TAG = 1
_MOMENT_TAG = 2
_TAIL_TAG = 3


def _norm1(x) -> int:
    return sum(abs(c) for c in x)


def _accepted(batch: ReplicaBatch):
    acc = batch.accepted
    # conditioning on survival: nothing else may reach an estimator
    assert all(r.verdict is Verdict.SURVIVES for r in acc)
    return acc


def _hits(batch: ReplicaBatch, sites) -> np.ndarray:
    for x in sites:
        if _norm1(x) > batch.config.radius:
            raise SiteOutsideBoxError(f"site {x} lies outside the box of radius {batch.config.radius}")
        if x not in batch.tracked:
            raise PreconditionError(f"site {x} is not tracked by this batch")
    return batch.hit_matrix(list(sites))


def _boot_seed(batch: ReplicaBatch, tag: int, seed: int | None) -> int:
    base = batch.config.seed if seed is None else seed
    return (int(base) * 1_000_003 + tag) % 2**63


@dataclass(frozen=True)
class RhoEstimate:
    rho: float
    ci: tuple
    rho_low: float
    rho_high: float
    accepted: int
    rejected: int
    ambiguous: int

    def rows(self):
        return [dict(
            accepted=self.accepted, rejected=self.rejected, ambiguous=self.ambiguous,
            total=self.accepted + self.rejected + self.ambiguous, rho_hat=self.rho,
            ci_lo=self.ci[0], ci_hi=self.ci[1], rho_low=self.rho_low, rho_high=self.rho_high,
        )]

    def summary(self):
        return dict(rho=self.rho, ci=list(self.ci), bracket=[self.rho_low, self.rho_high])


def estimate_rho(batch: ReplicaBatch, confidence: float = 0.95) -> RhoEstimate:
    """Survival probability: accepted / (accepted + rejected), with a Wilson interval.

    Ambiguous replicas are left out of the point estimate; the bracket
    counts them as all dying (low) or all surviving (high).
    """
    a, r, m = batch.n_accepted, batch.n_rejected, batch.n_ambiguous
    if a + r == 0:
        raise PreconditionError("batch has no decided replicas")
    total = a + r + m
    return RhoEstimate(a / (a + r), wilson_interval(a, a + r, confidence), a / total, (a + m) / total, a, r, m)


@dataclass(frozen=True)
class MuEstimate:
    direction: tuple
    n_list: tuple
    mu: np.ndarray
    se: np.ndarray
    n_used: np.ndarray
    n_censored: np.ndarray
    drift: float

    def rows(self):
        return [
            dict(n=n, site=",".join(str(n * c) for c in self.direction), mu_hat=m, se=s,
                 n_used=int(u), n_censored=int(c))
            for n, m, s, u, c in zip(self.n_list, self.mu, self.se, self.n_used, self.n_censored)
        ]

    def summary(self):
        return dict(direction=list(self.direction), mu=dict(zip(map(str, self.n_list), self.mu.tolist())),
                    se=self.se.tolist(), drift=self.drift)


def estimate_mu(batch: ReplicaBatch, x, n_list) -> MuEstimate:
    """Per-n estimates ``mean(t(n x)) / n`` and the relative drift between the two largest n."""
    x = tuple(x)
    n_list = tuple(sorted(int(n) for n in n_list))
    if not n_list or n_list[0] < 1:
        raise PreconditionError("n_list must hold positive integers")
    _accepted(batch)
    sites = [tuple(n * c for c in x) for n in n_list]
    H = _hits(batch, sites)
    mu, se, used, cens = [], [], [], []
    for j, n in enumerate(n_list):
        col = H[:, j]
        fin = col[np.isfinite(col)] / n
        used.append(len(fin))
        cens.append(len(col) - len(fin))
        mu.append(fin.mean() if len(fin) else math.nan)
        se.append(fin.std(ddof=1) / math.sqrt(len(fin)) if len(fin) > 1 else math.nan)
    mu = np.array(mu)
    drift = math.nan
    if len(mu) >= 2:
        a, b = mu[-2], mu[-1]
        drift = 0.0 if a == b else (b - a) / a
    return MuEstimate(x, n_list, mu, np.array(se), np.array(used), np.array(cens), drift)


@dataclass(frozen=True)
class OrderStats:
    """Ordering of hitting times along the ray ``0, x, 2x, ..., n x``."""

    direction: tuple
    n: int
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    trials: np.ndarray
    flagged_fraction: np.ndarray
    mean_t: np.ndarray  # k = 0..n
    cesaro: float
    cesaro_se: float
    density: float
    density_se: float
    confidence: float = 0.95

    n_checked = 0

    def __post_init__(self):
        # t(o) = 0 makes the first pair ordered in every replica
        if self.trials[0] > 0 and self.p_hat[0] != 1.0:
            raise InvariantViolation(f"p_hat_1 = {self.p_hat[0]} in OrderStats along {self.direction}")
        if not np.all((self.p_hat >= 0) & (self.p_hat <= 1) | np.isnan(self.p_hat)):
            raise InvariantViolation("p_hat outside [0, 1]")
        type(self).n_checked += 1

    def rows(self):
        return [
            dict(k=k + 1, p_hat=self.p_hat[k], ci_lo=self.ci_lo[k], ci_hi=self.ci_hi[k],
                 mean_t_k=self.mean_t[k + 1], flagged_fraction=self.flagged_fraction[k])
            for k in range(self.n)
        ]

    def summary(self):
        return dict(direction=list(self.direction), n=self.n, cesaro=self.cesaro, cesaro_se=self.cesaro_se,
                    density=self.density, density_se=self.density_se,
                    flagged_fraction=float(self.flagged_fraction.mean()))


def theorem1_order_stats(batch: ReplicaBatch, x, n: int, confidence: float = 0.95,
                         n_boot: int | None = None, seed: int | None = None) -> OrderStats:
    """Per-k probabilities of ``t((k-1)x) <= t(kx)``, their Cesaro mean and the mean-increase density.

    A site not hit before the horizon counts as hit after every hit site;
    pairs with both sites unhit are dropped from that k.  Either case flags
    the replica at that k.  Standard errors of the Cesaro mean and the
    density come from a replica-level bootstrap.
    """
    x = tuple(x)
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if n * _norm1(x) > batch.config.radius:
        raise SiteOutsideBoxError(f"n*|x| = {n * _norm1(x)} exceeds the box radius {batch.config.radius}")
    _accepted(batch)
    H = _hits(batch, [tuple(k * c for c in x) for k in range(n + 1)])
    a, b = H[:, :-1], H[:, 1:]
    fa, fb = np.isfinite(a), np.isfinite(b)
    valid = fa | fb
    ordered = np.where(fa & fb, a <= b, fa & ~fb).astype(float)
    flagged = ~(fa & fb)
    succ = (ordered * valid).sum(axis=0)
    trials = valid.sum(axis=0)
    p_hat = np.where(trials > 0, succ / np.maximum(trials, 1), math.nan)
    cis = [wilson_interval(int(s), int(t), confidence) if t else (math.nan, math.nan)
           for s, t in zip(succ, trials)]
    R = H.shape[0]
    fin = np.isfinite(H)
    mean_t = np.where(fin.sum(0) > 0, np.where(fin, H, 0.0).sum(0) / np.maximum(fin.sum(0), 1), math.nan)
    density = float(np.mean(mean_t[1:] >= mean_t[:-1]))

    n_boot = batch.config.bootstrap if n_boot is None else n_boot
    W = resample_weights(R, n_boot, _boot_seed(batch, _ORDER_TAG, seed)).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        pb = (W @ (ordered * valid)) / (W @ valid)
        mb = (W @ np.where(fin, H, 0.0)) / (W @ fin)
    ces_b = np.nanmean(pb, axis=1)
    dens_b = np.mean(mb[:, 1:] >= mb[:, :-1], axis=1)
    return OrderStats(
        direction=x, n=n, p_hat=p_hat,
        ci_lo=np.array([c[0] for c in cis]), ci_hi=np.array([c[1] for c in cis]),
        trials=trials, flagged_fraction=flagged.mean(axis=0) if R else np.zeros(n),
        mean_t=mean_t, cesaro=float(np.nanmean(p_hat)),
        cesaro_se=float(np.std(ces_b, ddof=1)) if n_boot > 1 else math.nan,
        density=density,
        density_se=float(np.std(dens_b, ddof=1)) if n_boot > 1 else math.nan,
        confidence=confidence,
    )


@dataclass(frozen=True)
class MomentStats:
    """Plug-in ratios ``E|t(x) - t(y)|^p / |x - y|^p`` with bootstrap intervals."""

    p: float
    pairs: tuple
    ratio: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_used: np.ndarray
    by_distance: dict = field(default_factory=dict)  # distance -> (ratio, lo, hi)

    def rows(self):
        return [
            dict(x=",".join(map(str, x)), y=",".join(map(str, y)), distance=_norm1(np.subtract(x, y)),
                 p=self.p, ratio=r, ci_lo=lo, ci_hi=hi, n_used=int(u))
            for (x, y), r, lo, hi, u in zip(self.pairs, self.ratio, self.ci_lo, self.ci_hi, self.n_used)
        ]

    def summary(self):
        return dict(p=self.p, by_distance={str(k): list(v) for k, v in sorted(self.by_distance.items())})


def theorem2_moment_stats(batch: ReplicaBatch, pairs, p: float, confidence: float = 0.95,
                          n_boot: int | None = None, seed: int | None = None) -> MomentStats:
    """Moment ratios per pair and averaged over pairs at equal 1-norm distance.

    Replicas where either site was not hit before the horizon are dropped
    for that pair.
    """
    if not p > 0:
        raise PreconditionError(f"moment order must be > 0, got {p}")
    pairs = tuple((tuple(x), tuple(y)) for x, y in pairs)
    for x, y in pairs:
        if x == y:
            raise PreconditionError(f"pair ({x}, {y}) has x == y")
    _accepted(batch)
    sites = sorted({s for pair in pairs for s in pair})
    col = {s: j for j, s in enumerate(sites)}
    H = _hits(batch, sites)
    R = H.shape[0]
    n_boot = batch.config.bootstrap if n_boot is None else n_boot
    W = resample_weights(R, n_boot, _boot_seed(batch, _MOMENT_TAG, seed)).astype(float)

    vals = np.zeros((R, len(pairs)))
    ok = np.zeros((R, len(pairs)), dtype=bool)
    dist = np.array([_norm1(np.subtract(x, y)) for x, y in pairs])
    for k, (x, y) in enumerate(pairs):
        tx, ty = H[:, col[x]], H[:, col[y]]
        ok[:, k] = np.isfinite(tx) & np.isfinite(ty)
        diff = np.zeros(R)
        diff[ok[:, k]] = np.abs(tx[ok[:, k]] - ty[ok[:, k]])
        vals[:, k] = diff ** p / dist[k] ** p
    used = ok.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = vals.sum(axis=0) / used
        boot = (W @ vals) / (W @ ok)
    cis = [percentile_interval(boot[:, k], confidence) for k in range(len(pairs))]
    by_distance = {}
    for dd in sorted(set(dist.tolist())):
        m = dist == dd
        agg_b = boot[:, m].mean(axis=1)
        by_distance[int(dd)] = (float(ratio[m].mean()), *percentile_interval(agg_b, confidence))
    return MomentStats(float(p), pairs, ratio, np.array([c[0] for c in cis]), np.array([c[1] for c in cis]),
                       used, by_distance)


@dataclass(frozen=True)
class TailCurve:
    """Tail estimates of ``sigma(x) - t(x)`` on a grid of L.

    ``gamma`` is the slope of ``log(-log q)`` against ``log L`` over the
    grid points with ``L > 0``, ``0 < q < 1`` and at least ``min_exceed``
    exceedances; None when the fit was not requested.
    """

    sites: tuple
    L_grid: np.ndarray
    q_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    exceed: np.ndarray
    n: int
    per_site: dict
    censored_fraction: float
    gamma: float | None = None
    gamma_ci: tuple = (math.nan, math.nan)
    intercept: float | None = None
    fit_L: tuple = ()

    def rows(self):
        out = []
        for i, L in enumerate(self.L_grid):
            out.append(dict(L=L, site="pooled", q_hat=self.q_hat[i], ci_lo=self.ci_lo[i], ci_hi=self.ci_hi[i],
                            exceedances=int(self.exceed[i]), n=self.n))
            for s, (q, lo, hi, e, m) in self.per_site.items():
                out.append(dict(L=L, site=",".join(map(str, s)), q_hat=q[i], ci_lo=lo[i], ci_hi=hi[i],
                                exceedances=int(e[i]), n=m))
        return out

    def summary(self):
        return dict(sites=[list(s) for s in self.sites], gamma=self.gamma, gamma_ci=list(self.gamma_ci),
                    intercept=self.intercept, fit_L=list(self.fit_L), censored_fraction=self.censored_fraction)


def _fit_gamma(L, exceed, n, min_exceed):
    with np.errstate(divide="ignore", invalid="ignore"):
        q = exceed / n
    use = (L > 0) & (exceed >= min_exceed) & (q > 0) & (q < 1)
    if use.sum() < 2:
        return None
    slope, icpt = np.polyfit(np.log(L[use]), np.log(-np.log(q[use])), 1)
    return float(slope), float(icpt), tuple(L[use].tolist())


def sigma_gap_tail(batch: ReplicaBatch, sites, L_grid, confidence: float = 0.95, fit: bool = True,
                   min_exceed: int = 10, n_boot: int | None = None, seed: int | None = None) -> TailCurve:
    """Tail ``q(L) = P(sigma(x) - t(x) > L)`` pooled over ``sites`` and per site.

    Records without a defined ``sigma`` (never hit, or censored by the
    horizon or the box) are excluded and reported as ``censored_fraction``.

    Raises
    ------
    FitUndefinedError
        if ``fit`` and fewer than two grid points qualify for the fit.
    """
    sites = tuple(tuple(s) for s in sites)
    L = np.asarray(L_grid, dtype=float)
    if len(L) == 0 or (np.diff(L) <= 0).any() or (L < 0).any():
        raise PreconditionError("L grid must be nonempty, nonnegative and increasing")
    acc = _accepted(batch)
    for s in sites:
        if s not in batch.essential_sites:
            if _norm1(s) > batch.config.radius:
                raise SiteOutsideBoxError(f"site {s} lies outside the box")
            raise PreconditionError(f"site {s} has no essential records in this batch")
    R = len(acc)
    # per replica: number of sites with gap > L, and number of sites with a defined gap
    e_r = np.zeros((R, len(L)))
    n_r = np.zeros(R)
    per_site = {}
    n_records = 0
    for s in sites:
        gaps = np.array([r.essential[s].gap if r.essential[s].gap is not None else math.nan for r in acc])
        n_records += len(gaps)
        ok = np.isfinite(gaps)
        ex = (gaps[:, None] > L[None, :]) & ok[:, None]
        e_r += ex
        n_r += ok
        m = int(ok.sum())
        cnt = ex.sum(axis=0)
        q = cnt / m if m else np.full(len(L), math.nan)
        cis = [wilson_interval(int(c), m, confidence) if m else (math.nan, math.nan) for c in cnt]
        per_site[s] = (q, np.array([c[0] for c in cis]), np.array([c[1] for c in cis]), cnt, m)
    n = int(n_r.sum())
    exceed = e_r.sum(axis=0)
    q_hat = exceed / n if n else np.full(len(L), math.nan)
    cis = [wilson_interval(int(c), n, confidence) if n else (math.nan, math.nan) for c in exceed]
    censored = 1.0 - n / n_records if n_records else math.nan
    curve = dict(
        sites=sites, L_grid=L, q_hat=q_hat, ci_lo=np.array([c[0] for c in cis]),
        ci_hi=np.array([c[1] for c in cis]), exceed=exceed, n=n, per_site=per_site, censored_fraction=censored,
    )
    if not fit:
        return TailCurve(**curve)
    res = _fit_gamma(L, exceed, n, min_exceed) if n else None
    if res is None:
        raise FitUndefinedError("fewer than two L values with 0 < q < 1 and enough exceedances")
    gamma, icpt, fit_L = res
    n_boot = batch.config.bootstrap if n_boot is None else n_boot
    W = resample_weights(R, n_boot, _boot_seed(batch, _TAIL_TAG, seed)).astype(float)
    eb, nb = W @ e_r, W @ n_r
    gb = []
    for b in range(n_boot):
        rb = _fit_gamma(L, eb[b], nb[b], min_exceed) if nb[b] > 0 else None
        gb.append(rb[0] if rb else math.nan)
    return TailCurve(**curve, gamma=gamma, gamma_ci=percentile_interval(np.array(gb), confidence),
                     intercept=icpt, fit_L=fit_L)
