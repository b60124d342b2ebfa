"""Command-line experiment harness.

    contactkit run --config exp.toml [--kind KIND] [--threads N] [--out DIR] [--seed U64]
    contactkit validate --config exp.toml
    contactkit rerun-replica --config exp.toml --replica ID

``run`` writes ``results.csv``, ``summary.json`` and ``seeds.csv`` into the
output directory.  Exit codes: 0 success, 2 invalid config or site
outside the box, 3 acceptance cap exceeded (diagnostics are still
written), 4 tail fit undefined (curve still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import KINDS, ExperimentConfig, check_config, load_config, validate_config
from .errors import AcceptanceCapError, ConfigError, ContactKitError, FitUndefinedError
from .stats import (
    ReplicaSimulator,
    estimate_mu,
    estimate_rho,
    run_replicas,
    sigma_gap_tail,
    theorem1_order_stats,
    theorem2_moment_stats,
)

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_FIT = 0, 2, 3, 4

# fixed CSV columns per experiment kind
COLUMNS = {
    "rho": ["accepted", "rejected", "ambiguous", "total", "rho_hat", "ci_lo", "ci_hi", "rho_low", "rho_high"],
    "shape": ["n", "site", "mu_hat", "se", "n_used", "n_censored"],
    "theorem1": ["k", "p_hat", "ci_lo", "ci_hi", "mean_t_k", "flagged_fraction"],
    "theorem2": ["x", "y", "distance", "p", "ratio", "ci_lo", "ci_hi", "n_used"],
    "sigma-tail": ["L", "site", "q_hat", "ci_lo", "ci_hi", "exceedances", "n"],
}

log = logging.getLogger("contactkit")


def artifact_version() -> str:
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+g{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("CONTACTKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer CONTACTKIT_THREADS=%r", env)
    return os.cpu_count() or 1


def _clean(obj):
    """JSON-safe copy: tuples to lists, numpy scalars to Python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def analyze(batch, cfg: ExperimentConfig):
    """Rows for results.csv and the estimate block for summary.json."""
    kind = cfg.kind
    if kind == "rho":
        est = estimate_rho(batch, cfg.confidence)
        return est.rows(), est.summary()
    if kind == "shape":
        est = estimate_mu(batch, cfg.direction, cfg.n_list)
        return est.rows(), est.summary()
    if kind == "theorem1":
        est = theorem1_order_stats(batch, cfg.direction, cfg.n, cfg.confidence)
        return est.rows(), est.summary()
    if kind == "theorem2":
        rows, summ = [], {}
        for p in cfg.p:
            est = theorem2_moment_stats(batch, cfg.pairs, p, cfg.confidence)
            rows += est.rows()
            summ[repr(p)] = est.summary()
        return rows, {"by_p": summ}
    if kind == "sigma-tail":
        est = sigma_gap_tail(batch, cfg.sites, cfg.L_grid, cfg.confidence)
        return est.rows(), est.summary()
    raise ConfigError(f"unknown kind {kind!r}")


def _config_for(path, kind=None, seed=None, out=None) -> ExperimentConfig:
    cfg = load_config(path)
    changes = {}
    if kind is not None:
        changes["kind"] = kind
    if seed is not None:
        changes["seed"] = seed
    if out is not None:
        changes["output_dir"] = str(out)
    if changes:
        cfg = cfg.replace(**changes)
        violations = check_config(cfg)
        if violations:
            err = ConfigError("; ".join(map(str, violations)))
            err.violations = violations
            raise err
    return cfg


def run_experiment(config_path, kind=None, threads=None, out=None, seed=None) -> int:
    """Run one experiment end to end and return the process exit code."""
    try:
        cfg = _config_for(config_path, kind, seed, out)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    threads = resolve_threads(threads)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed_log = out_dir / "seeds.csv"
    summary = dict(
        schema_version=SCHEMA_VERSION,
        kind=cfg.kind,
        artifact_version=artifact_version(),
        config=_clean(cfg.to_dict()),
        config_path=str(config_path),
    )
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        batch = run_replicas(cfg, threads=threads, progress=_progress)
    except AcceptanceCapError as exc:
        batch = exc.batch
        code = EXIT_CAP
        summary["error"] = dict(category=exc.category, message=str(exc), rejection_rate=exc.rejection_rate)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)

    write_csv(seed_log, ["replica_id", "root_seed", "verdict", "boundary_contact"], batch.seed_rows())
    if code == EXIT_OK or cfg.kind == "rho":
        try:
            rows, estimates = analyze(batch, cfg)
            write_csv(out_dir / "results.csv", COLUMNS[cfg.kind], rows)
            summary["estimates"] = estimates
        except FitUndefinedError as exc:
            curve = sigma_gap_tail(batch, cfg.sites, cfg.L_grid, cfg.confidence, fit=False)
            write_csv(out_dir / "results.csv", COLUMNS[cfg.kind], curve.rows())
            summary["estimates"] = curve.summary()
            summary["error"] = dict(category=exc.category, message=str(exc))
            code = EXIT_FIT
        except ContactKitError as exc:
            if batch.n_accepted + batch.n_rejected == 0:
                summary.setdefault("error", dict(category=exc.category, message=str(exc)))
            else:
                raise
    summary["diagnostics"] = dict(
        batch.diagnostics(),
        wall_time_s=time.perf_counter() - t0,
        threads=threads,
        seed_log=str(seed_log),
    )
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    if code != EXIT_OK:
        print(json.dumps(_clean(dict(exit=code, **summary["error"]))), file=sys.stderr)
    return code


def _progress(n_acc, n_total):
    log.info("accepted %d of %d replicas", n_acc, n_total)


def _fail(exc: ContactKitError, code: int) -> int:
    payload = dict(exit=code, error=exc.category, message=str(exc))
    violations = getattr(exc, "violations", None)
    if violations:
        payload["violations"] = [dict(field=v.field, message=v.message, category=v.category) for v in violations]
    print(json.dumps(payload), file=sys.stderr)
    return code


def cmd_validate(args) -> int:
    try:
        violations = validate_config(args.config)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    report = dict(config=str(args.config), valid=not violations,
                  violations=[dict(field=v.field, message=v.message, category=v.category) for v in violations])
    print(json.dumps(report, indent=2))
    return EXIT_OK if not violations else EXIT_CONFIG


def cmd_rerun(args) -> int:
    try:
        cfg = _config_for(args.config, args.kind, args.seed)
        rec = ReplicaSimulator(cfg).run(args.replica)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    text = json.dumps(_clean(rec.to_dict()), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contactkit", description="Contact-process Monte Carlo experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--kind", choices=KINDS)
    run.add_argument("--threads", type=int, help="worker threads (default: $CONTACTKIT_THREADS or all cores)")
    run.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    run.add_argument("--seed", type=int, help="root seed (overrides the config)")

    val = sub.add_parser("validate", help="list config violations without running")
    val.add_argument("--config", required=True, type=Path)

    rr = sub.add_parser("rerun-replica", help="re-simulate one replica and print its record")
    rr.add_argument("--config", required=True, type=Path)
    rr.add_argument("--replica", required=True, type=int)
    rr.add_argument("--kind", choices=KINDS)
    rr.add_argument("--seed", type=int)
    rr.add_argument("--out", type=Path, help="also write the record to this file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    if args.command == "run":
        return run_experiment(args.config, args.kind, args.threads, args.out, args.seed)
    if args.command == "validate":
        return cmd_validate(args)
    return cmd_rerun(args)


if __name__ == "__main__":
    sys.exit(main())
