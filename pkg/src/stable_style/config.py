"""Experiment configuration: one YAML document, overridable from the command line.

Precedence, lowest first: built-in defaults, the YAML file, ``--set key=value``
overrides (dotted keys), then the dedicated flags (``--seed``, ``--out`` ...).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .classifier import ClassifierConfig
from .deleter import DeleterConfig
from .errors import ConfigError
from .evaluation.lm import LMConfig
from .generator import GeneratorConfig, TrainConfig


@dataclass
class DataConfig:
    root: str = "data/yelp"
    domain: str = "sentiment"
    styles: List[int] = field(default_factory=lambda: [0, 1])
    style_names: Dict[int, str] = field(default_factory=lambda: {0: "negative", 1: "positive"})
    references: Optional[str] = None
    n_refs: int = 1
    train_per_style: Optional[int] = None
    use_dev: bool = True


@dataclass
class TransferSettings:
    alpha: float = 0.7
    beta: float = 0.5
    batch_size: int = 64


@dataclass
class SweepSettings:
    alpha_grid: List[float] = field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8, 0.9])
    beta_grid: List[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75])
    fixed_alpha: float = 0.7
    fixed_beta: float = 0.5


@dataclass
class WalkSettings:
    w_grid: List[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    n_sentences: int = 10


@dataclass
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "runs/default"
    vocab_size: int = 10000
    data: DataConfig = field(default_factory=DataConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    eval_classifier: ClassifierConfig = field(default_factory=ClassifierConfig.evaluation_default)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    lm: LMConfig = field(default_factory=LMConfig)
    general_lm: LMConfig = field(default_factory=LMConfig)
    general_corpora: List[str] = field(default_factory=list)
    g_ppl_scores: Optional[str] = None
    transfer: TransferSettings = field(default_factory=TransferSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    walk: WalkSettings = field(default_factory=WalkSettings)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    def deleter(self, alpha: Optional[float] = None, beta: Optional[float] = None) -> DeleterConfig:
        return DeleterConfig(self.transfer.alpha if alpha is None else alpha,
                             self.transfer.beta if beta is None else beta)

    def validate(self, need_data: bool = True) -> "ExperimentConfig":
        if need_data and not Path(self.data.root).is_dir():
            raise ConfigError(f"data root {self.data.root} does not exist")
        if self.data.references and not Path(self.data.references).is_dir():
            raise ConfigError(f"reference directory {self.data.references} does not exist")
        for p in self.general_corpora:
            if not Path(p).exists():
                raise ConfigError(f"general corpus {p} does not exist")
        if len(set(self.data.styles)) < 2:
            raise ConfigError("declare at least two styles")
        if not self.sweep.alpha_grid or not self.sweep.beta_grid:
            raise ConfigError("sweep grids must be non-empty")
        return self


def _build(cls, values: Dict[str, Any]):
    if not isinstance(values, dict):
        raise ConfigError(f"expected a mapping for {cls.__name__}, got {values!r}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for name, v in values.items():
        default = known[name].default_factory() if known[name].default_factory is not dataclasses.MISSING \
            else known[name].default
        kwargs[name] = _build(type(default), v) if dataclasses.is_dataclass(default) else v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {cls.__name__}: {e}") from e


def _set_dotted(d: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
    d[parts[-1]] = value


def load_config(path: Optional[str] = None, overrides: Optional[List[str]] = None, **flags) -> ExperimentConfig:
    raw: dict = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        _set_dotted(raw, k, yaml.safe_load(v))
    for k, v in flags.items():
        if v is not None:
            _set_dotted(raw, k, v)
    cfg = _build(ExperimentConfig, raw)
    # one seed drives every component unless a component sets its own
    for part, key in ((cfg.classifier, "classifier"), (cfg.train, "train"), (cfg.lm, "lm"),
                      (cfg.general_lm, "general_lm")):
        if "seed" not in raw.get(key, {}):
            part.seed = cfg.seed
    if "seed" not in raw.get("eval_classifier", {}):
        cfg.eval_classifier.seed = cfg.seed + 1
    return cfg
