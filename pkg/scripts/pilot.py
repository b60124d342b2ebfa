"""Pilot run behind the frozen acceptance thresholds.

Runs the batch of ``configs/pilot.toml`` under a separate seed and prints
the statistics the acceptance suite compares against.

    python3 scripts/pilot.py --seed 1 --target 500
"""

import argparse
import json
import time
from pathlib import Path

from contactkit.config import load_config
from contactkit.stats import estimate_rho, run_replicas, sigma_gap_tail, theorem1_order_stats, theorem2_moment_stats

ROOT = Path(__file__).resolve().parent.parent


def pilot_tracked(cfg):
    """Pilot sites plus the |x| = 1 ray, which the ordering comparison needs."""
    return sorted(set(cfg.tracked_sites()) | set(cfg.ray()) | {(k,) for k in range(cfg.n + 1)})


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "pilot.toml")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--target", type=int, default=500)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config).replace(seed=args.seed, replicas=args.target)
    t0 = time.perf_counter()
    batch = run_replicas(cfg, threads=args.threads, tracked=pilot_tracked(cfg))
    one = theorem1_order_stats(batch, (1,), cfg.n)
    eight = theorem1_order_stats(batch, cfg.direction, cfg.n)
    moments = theorem2_moment_stats(batch, cfg.pairs, 1.0)
    tail = sigma_gap_tail(batch, cfg.sites, cfg.L_grid)
    out = dict(
        seed=args.seed,
        accepted=batch.n_accepted,
        diagnostics=batch.diagnostics(),
        rho=estimate_rho(batch).summary(),
        cesaro={"1": [one.cesaro, one.cesaro_se], "8": [eight.cesaro, eight.cesaro_se]},
        density={"1": [one.density, one.density_se], "8": [eight.density, eight.density_se]},
        flagged={"1": float(one.flagged_fraction.mean()), "8": float(eight.flagged_fraction.mean())},
        moment_by_distance={str(k): v for k, v in moments.by_distance.items()},
        q_hat=tail.q_hat.tolist(),
        gamma=[tail.gamma, *tail.gamma_ci],
        censored_fraction=tail.censored_fraction,
        wall_time_s=time.perf_counter() - t0,
    )
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
