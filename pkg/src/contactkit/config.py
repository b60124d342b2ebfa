"""Experiment configuration: TOML parsing, validation and echo."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .engine.lattice import RateSpec, build_lattice
from .errors import ConfigError, SiteOutsideBoxError

KINDS = ("shape", "theorem1", "theorem2", "sigma-tail", "rho")


@dataclass(frozen=True)
class Violation:
    field: str
    message: str
    category: str = "config"

    def __str__(self):
        return f"{self.field}: {self.message}"


@dataclass
class ExperimentConfig:
    kind: str = "rho"
    seed: int = 0
    d: int = 1
    radius: int = 50
    lam: float | None = None
    lam_min: float | None = None
    lam_max: float | None = None
    env_seed: int = 0
    horizon: float = 100.0
    replicas: int = 100
    max_attempts: int | None = None
    precheck_radius: int = 16
    precheck_horizon: float = 16.0
    # experiment fields; unused ones stay empty
    direction: tuple | None = None
    n: int | None = None
    n_list: tuple = ()
    pairs: tuple = ()
    p: tuple = (1.0,)
    L_grid: tuple = ()
    sites: tuple = ()
    bootstrap: int = 1000
    confidence: float = 0.95
    output_dir: str = "out"
    source: str | None = field(default=None, compare=False)

    @property
    def attempt_cap(self) -> int:
        return self.max_attempts if self.max_attempts is not None else 20 * self.replicas

    def rate_spec(self) -> RateSpec:
        if self.lam_min is not None or self.lam_max is not None:
            return RateSpec(lam_min=self.lam_min, lam_max=self.lam_max, env_seed=self.env_seed)
        return RateSpec(lam=self.lam)

    def lattice(self):
        return build_lattice(self.d, self.radius)

    def ray(self, n: int | None = None) -> list[tuple]:
        """Sites ``k * direction`` for ``k = 0..n``."""
        n = self.n if n is None else n
        return [tuple(k * c for c in self.direction) for k in range(n + 1)]

    def tracked_sites(self) -> list[tuple]:
        """Every site whose hitting time any configured estimator needs."""
        out = {(0,) * self.d}
        if self.direction is not None:
            if self.n is not None:
                out.update(self.ray())
            for m in self.n_list:
                out.add(tuple(m * c for c in self.direction))
        for x, y in self.pairs:
            out.update((x, y))
        out.update(self.sites)
        return sorted(out)

    def essential_sites(self) -> list[tuple]:
        return sorted(set(self.sites))

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out.pop("source")
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _site(v, d):
    if isinstance(v, (int, float)) and d == 1:
        return (int(v),)
    return tuple(int(c) for c in v)


def parse_config(raw: dict, source: str | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed TOML table.

    Raises ConfigError listing every violation.
    """
    cfg, violations = _parse(raw, source)
    violations += check_config(cfg) if cfg is not None else []
    if violations:
        err_cls = SiteOutsideBoxError if all(v.category == "site-outside-box" for v in violations) else ConfigError
        err = err_cls("; ".join(map(str, violations)))
        err.violations = violations
        raise err
    return cfg


def _parse(raw: dict, source):
    violations = []
    lattice = raw.get("lattice", {})
    rates = raw.get("rates", {})
    horizon = raw.get("horizon", {})
    reps = raw.get("replicas", {})
    surv = raw.get("survival", {})
    exp = raw.get("experiment", {})
    out = raw.get("output", {})
    try:
        d = int(lattice.get("d", 1))
        kw = dict(
            kind=str(raw.get("kind", "rho")),
            seed=int(raw.get("seed", 0)),
            d=d,
            radius=int(lattice.get("radius", 50)),
            lam=rates.get("lambda"),
            lam_min=rates.get("lambda_min"),
            lam_max=rates.get("lambda_max"),
            env_seed=int(rates.get("env_seed", 0)),
            horizon=float(horizon.get("T", 100.0)),
            replicas=int(reps.get("target", 100)),
            max_attempts=reps.get("max_attempts"),
            precheck_radius=int(surv.get("precheck_radius", 16)),
            precheck_horizon=float(surv.get("precheck_horizon", 16.0)),
            direction=_site(exp["direction"], d) if "direction" in exp else None,
            n=int(exp["n"]) if "n" in exp else None,
            n_list=tuple(int(v) for v in exp.get("n_list", ())),
            pairs=tuple((_site(a, d), _site(b, d)) for a, b in exp.get("pairs", ())),
            p=tuple(float(v) for v in exp.get("p", (1.0,))),
            L_grid=tuple(float(v) for v in exp.get("L_grid", ())),
            sites=tuple(_site(v, d) for v in exp.get("sites", ())),
            bootstrap=int(exp.get("bootstrap", 1000)),
            confidence=float(exp.get("confidence", 0.95)),
            output_dir=str(out.get("dir", "out")),
            source=source,
        )
        for key in ("lam", "lam_min", "lam_max"):
            if kw[key] is not None:
                kw[key] = float(kw[key])
        if kw["max_attempts"] is not None:
            kw["max_attempts"] = int(kw["max_attempts"])
    except (TypeError, ValueError, KeyError) as exc:
        return None, [Violation("config", f"malformed value: {exc}")]
    return ExperimentConfig(**kw), violations


def check_config(cfg: ExperimentConfig) -> list[Violation]:
    """All violations of ``cfg``; empty when the config is runnable."""
    v = []
    if cfg.kind not in KINDS:
        v.append(Violation("kind", f"unknown kind {cfg.kind!r}; expected one of {', '.join(KINDS)}"))
    if not 0 <= cfg.seed < 2**64:
        v.append(Violation("seed", "root seed must be an unsigned 64-bit integer"))
    if cfg.d < 1:
        v.append(Violation("lattice.d", "dimension must be >= 1"))
    if cfg.radius < 1:
        v.append(Violation("lattice.radius", "box radius must be >= 1"))
    if cfg.lam_min is None and cfg.lam_max is None:
        if cfg.lam is None:
            v.append(Violation("rates.lambda", "infection rate is required"))
        elif cfg.lam < 0:
            v.append(Violation("rates.lambda", f"infection rate must be >= 0, got {cfg.lam}"))
    else:
        if cfg.lam is not None:
            v.append(Violation("rates", "give lambda or lambda_min/lambda_max, not both"))
        if cfg.lam_min is None or cfg.lam_max is None:
            v.append(Violation("rates", "environment mode needs lambda_min and lambda_max"))
        elif not 0 <= cfg.lam_min <= cfg.lam_max:
            v.append(Violation("rates", "need 0 <= lambda_min <= lambda_max"))
    if not cfg.horizon > 0:
        v.append(Violation("horizon.T", f"horizon must be > 0, got {cfg.horizon}"))
    if cfg.replicas < 1:
        v.append(Violation("replicas.target", "target must be >= 1"))
    if cfg.max_attempts is not None and cfg.max_attempts < cfg.replicas:
        v.append(Violation("replicas.max_attempts", "attempt cap below the accepted target"))
    if cfg.precheck_radius < 1 or not cfg.precheck_horizon > 0:
        v.append(Violation("survival", "precheck radius and horizon must be positive"))
    if not 0 < cfg.confidence < 1:
        v.append(Violation("experiment.confidence", "confidence must lie in (0, 1)"))
    if cfg.bootstrap < 1:
        v.append(Violation("experiment.bootstrap", "need at least one bootstrap resample"))
    if cfg.d < 1 or cfg.radius < 1:
        return v

    def in_box(name, x):
        if len(x) != cfg.d:
            v.append(Violation(name, f"site {x} does not have dimension {cfg.d}"))
        elif sum(abs(c) for c in x) > cfg.radius:
            v.append(Violation(name, f"site {x} lies outside the box of radius {cfg.radius}", "site-outside-box"))

    kind = cfg.kind
    if kind in ("shape", "theorem1") and cfg.direction is None:
        v.append(Violation("experiment.direction", f"{kind} needs a direction"))
    if kind == "theorem1":
        if cfg.n is None or cfg.n < 1:
            v.append(Violation("experiment.n", "theorem1 needs n >= 1"))
        elif cfg.direction is not None:
            reach = cfg.n * sum(abs(c) for c in cfg.direction)
            if reach > cfg.radius:
                v.append(Violation(
                    "experiment.n", f"n*|x| = {reach} exceeds the box radius {cfg.radius}", "site-outside-box"
                ))
    if kind == "shape":
        if not cfg.n_list or any(m < 1 for m in cfg.n_list):
            v.append(Violation("experiment.n_list", "shape needs positive multipliers"))
        elif cfg.direction is not None:
            for m in cfg.n_list:
                in_box("experiment.n_list", tuple(m * c for c in cfg.direction))
    if kind == "theorem2" and not cfg.pairs:
        v.append(Violation("experiment.pairs", "theorem2 needs site pairs"))
    for x, y in cfg.pairs:
        in_box("experiment.pairs", x)
        in_box("experiment.pairs", y)
        if x == y:
            v.append(Violation("experiment.pairs", f"pair ({x}, {y}) has x == y"))
    if any(not p > 0 for p in cfg.p):
        v.append(Violation("experiment.p", "moment orders must be > 0"))
    if kind == "sigma-tail":
        if not cfg.sites:
            v.append(Violation("experiment.sites", "sigma-tail needs sites"))
        if not cfg.L_grid:
            v.append(Violation("experiment.L_grid", "sigma-tail needs an L grid"))
    if any(b <= a for a, b in zip(cfg.L_grid, cfg.L_grid[1:])) or any(L < 0 for L in cfg.L_grid):
        v.append(Violation("experiment.L_grid", "L grid must be nonnegative and increasing"))
    for x in cfg.sites:
        in_box("experiment.sites", x)
    if cfg.direction is not None and len(cfg.direction) != cfg.d:
        v.append(Violation("experiment.direction", f"direction does not have dimension {cfg.d}"))
    return v


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        err = ConfigError(f"cannot parse config {path}: {exc}")
        err.violations = [Violation("config", str(exc))]
        raise err from exc
    return parse_config(raw, str(path))


def validate_config(path) -> list[Violation]:
    """Every violation in the config file, without running anything.

    Raises ConfigError only when the file cannot be read.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        return [Violation("config", f"TOML syntax error: {exc}")]
    cfg, violations = _parse(raw, str(path))
    if cfg is None:
        return violations
    return violations + check_config(cfg)
