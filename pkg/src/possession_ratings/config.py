"""Run configuration and artifact headers."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

from .errors import ConfigurationError

SUBCOMMANDS = ("ingest", "fit", "rate", "validate", "simulate", "check")
GROUPINGS = ("position", "position_team", "singleton", "single")
COMBINERS = ("sum", "std_avg")


@dataclass(frozen=True)
class GridSpec:
    """Either explicit values or ``n`` log-spaced points from lambda_max down to ``ratio * lambda_max``."""
    n: int = 50
    ratio: float = 1e-4
    values: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        text = text.strip()
        try:
            if "," in text or "." in text.split(":")[0] or "e" in text.split(":")[0]:
                vals = tuple(sorted((float(v) for v in text.split(",") if v), reverse=True))
                if not vals or min(vals) <= 0:
                    raise ValueError
                return cls(len(vals), 0.0, vals)
            n, _, ratio = text.partition(":")
            spec = cls(int(n), float(ratio) if ratio else 1e-4)
        except ValueError:
            raise ConfigurationError(
                f"bad lambda grid {text!r}: use N[:RATIO] or a comma list of values") from None
        if spec.n < 1 or not 0 < spec.ratio < 1:
            raise ConfigurationError(f"bad lambda grid {text!r}")
        return spec


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    out: str = "."
    events: str | None = None
    event_format: str = "simple_csv"
    rosters: str | None = None
    possessions: str | None = None
    players: str | None = None
    penalty: str = "ridge"
    grouping: str | None = None
    lam: float | None = None
    grid: GridSpec = field(default_factory=GridSpec)
    cv_folds: int = 10
    combiner: str = "sum"
    split: int = 280
    matches: str | None = None
    elo: str | None = None
    ratings: tuple = ()
    fits: tuple = ()
    seed: int = 0
    leaky_ratings: bool = False
    backend: str = "splitting"
    adaptive: bool = False
    train_only: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"unknown subcommand {self.subcommand!r}")
        if self.grouping is not None and self.grouping not in GROUPINGS:
            raise ConfigurationError(f"unknown grouping {self.grouping!r}")
        if self.combiner not in COMBINERS:
            raise ConfigurationError(f"unknown combiner {self.combiner!r}")
        if self.cv_folds < 2:
            raise ConfigurationError("cv-folds must be at least 2")
        if self.split < 1:
            raise ConfigurationError("split must be at least 1")
        if self.lam is not None and self.lam < 0:
            raise ConfigurationError("lambda must be non-negative")

    def check_paths(self):
        for name in ("events", "rosters", "possessions", "players", "matches", "elo"):
            p = getattr(self, name)
            if p is not None and not os.path.exists(p):
                raise ConfigurationError(f"--{name} path does not exist: {p}")
        for p in tuple(self.fits) + tuple(v for _, v in self.ratings):
            if not os.path.exists(p):
                raise ConfigurationError(f"input path does not exist: {p}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


def header(config: RunConfig | dict, **more) -> str:
    """Comment line(s) recording the configuration and seed of an artifact."""
    d = config.to_dict() if isinstance(config, RunConfig) else dict(config)
    d.update(more)
    seed = d.get("seed", 0)
    return f"# possession_ratings seed={seed} config={json.dumps(d, sort_keys=True, default=str)}"


def read_header(text: str) -> dict:
    """Config dict from the first header comment of an artifact, or {}."""
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        if "config=" in line:
            return json.loads(line.split("config=", 1)[1])
    return {}
