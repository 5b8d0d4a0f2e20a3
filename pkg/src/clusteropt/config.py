"""Run configuration: defaults, file loading (TOML/JSON), overrides."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

TASKS = ("community", "facility")
MODES = ("learn+opt", "opt-only", "inductive", "finetune", "finetune-only")
METHODS = (
    "clusternet", "gcn-e2e",
    "train-cnm", "train-newman", "train-sc", "train-greedy", "train-gonzalez",
    "2stage-cnm", "2stage-newman", "2stage-sc", "2stage-greedy", "2stage-gonzalez",
)

RESULTS_ENV = "CLUSTEROPT_RESULTS"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything one experiment needs; defaults follow the single-graph recipe
    (beta 50 for community / 30 for facility, gamma 100, lr 0.01, 1000
    iterations, one k-means update per iteration rising to five after 500,
    hidden = embedding dim = 50)."""

    task: str = "community"
    method: str = "clusternet"
    mode: str = "opt-only"
    k: int = 5
    beta: float | None = None
    gamma: float = 100.0
    eta: float | None = None          # selection softmin sharpness; defaults to beta
    lr: float = 0.01
    iters: int = 1000
    kmeans_updates: int = 1
    kmeans_updates_late: int = 5
    late_after: int = 500
    hidden: int = 50
    embed: int = 50
    dropout: float = 0.0
    seed: int = 0
    fraction_held: float = 0.6
    rounding_trials: int = 10
    decode_restarts: int = 8
    softmax_temp: float = 100.0
    squash: str = "shifted-half"
    feature_mode: str = "auto"        # auto | buckets | buckets+noise
    twostage_mode: str | None = None  # None: per-algorithm default
    edge_path: str | None = None
    feature_path: str | None = None
    results_dir: str | None = None
    dataset_name: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0.0 < self.fraction_held < 1.0:
            raise ConfigError("fraction_held must be in (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.squash not in ("shifted-half", "shifted-one"):
            raise ConfigError(f"unknown squash {self.squash!r}")
        if self.feature_mode not in ("auto", "buckets", "buckets+noise"):
            raise ConfigError(f"unknown feature_mode {self.feature_mode!r}")
        if self.iters < 1 or self.kmeans_updates < 1:
            raise ConfigError("iters and kmeans_updates must be >= 1")

    @property
    def resolved_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        return 50.0 if self.task == "community" else 30.0

    @property
    def resolved_eta(self) -> float:
        return self.eta if self.eta is not None else self.resolved_beta

    @property
    def resolved_results_dir(self) -> Path:
        base = self.results_dir or os.environ.get(RESULTS_ENV, "results")
        return Path(base)

    def updates_at(self, iteration: int) -> int:
        return self.kmeans_updates_late if iteration >= self.late_after else self.kmeans_updates

    def snapshot(self) -> dict:
        d = dataclasses.asdict(self)
        d["beta"] = self.resolved_beta
        d["eta"] = self.resolved_eta
        return d

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


def inductive_defaults(**overrides) -> RunConfig:
    """Cross-graph training recipe: beta 70, lr 1e-3, dropout 0.2."""
    base = dict(mode="learn+opt", beta=70.0, lr=0.001, dropout=0.2,
                iters=70, kmeans_updates=10, late_after=10**9)
    base.update(overrides)
    return RunConfig(**base)


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    if isinstance(raw, str):
        ftype = _FIELD_TYPES[name].type
        if "int" in str(ftype):
            return int(raw)
        if "float" in str(ftype):
            return float(raw)
        if raw.lower() in ("none", "null"):
            return None
    return raw


def load_config(path=None, overrides=None) -> RunConfig:
    """Build a RunConfig from an optional TOML/JSON file plus key=value overrides."""
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        text = path.read_text()
        if path.suffix == ".json":
            data = json.loads(text)
        elif path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(text)
        else:
            raise ConfigError(f"config must be .toml or .json, got {path.suffix}")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        data[key.strip()] = _coerce(key.strip(), value.strip())
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in data.items()})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
