"""Pipeline configuration: INI-style ``key = value`` files with sections.

Sections and keys mirror the dataclasses below (``[window] length = 30``).
Unknown sections or keys are rejected. List values are comma separated.
"""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .autoencoder import TrainConfig
from .errors import ConfigError


@dataclass
class DataConfig:
    interval: str = "1h"
    gap_tolerance: int = 0
    forward_fill: bool = False
    endpoint: str = "https://api.binance.com/api/v3/klines"
    symbols: list[str] = field(default_factory=list)
    start: int = 0
    end: int = 0
    page_limit: int = 1000


@dataclass
class WindowConfig:
    length: int = 30
    stride: int = 1
    norm: str = "zscore"


@dataclass
class ModelConfig:
    hidden: int = 256
    latent: int = 64


@dataclass
class GraphConfig:
    threshold: float = 0.90
    # when set, keep the top-m pairs instead of thresholding
    matched_edges: int | None = None


@dataclass
class StabilityConfig:
    blocks: int = 4
    matched_edges: int | None = None
    sweep: list[float] = field(default_factory=lambda: [0.80, 0.82, 0.84, 0.86, 0.88, 0.90, 0.92, 0.94, 0.96, 0.98])
    vary_seed: bool = True


@dataclass
class DiagConfig:
    confidence: float = 0.95
    trials: int = 10_000
    max_lags_policy: str = "schwert"
    seed: int = 0


@dataclass
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    stability: StabilityConfig = field(default_factory=StabilityConfig)
    diag: DiagConfig = field(default_factory=DiagConfig)
    seed: int = 0
    deterministic: bool = True

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def train_config(self, seed_offset: int = 0) -> TrainConfig:
        """Training settings with the master seed applied."""
        return dataclasses.replace(self.train, seed=self.seed + seed_offset, deterministic=self.deterministic)

    def validate(self) -> "PipelineConfig":
        if self.window.length < 2 or self.window.stride < 1:
            raise ConfigError("window.length must be >= 2 and window.stride >= 1")
        if self.window.norm not in ("zscore", "minmax"):
            raise ConfigError(f"window.norm must be zscore or minmax, got {self.window.norm!r}")
        if self.model.hidden < 1 or self.model.latent < 1:
            raise ConfigError("model.hidden and model.latent must be positive")
        if not -1.0 <= self.graph.threshold <= 1.0:
            raise ConfigError("graph.threshold must lie in [-1, 1]")
        if self.stability.blocks < 2:
            raise ConfigError("stability.blocks must be >= 2")
        if f"{self.diag.confidence:.2f}" not in ("0.90", "0.95", "0.99"):
            raise ConfigError("diag.confidence must be one of 0.90, 0.95, 0.99")
        if self.diag.max_lags_policy not in ("schwert",) and not self.diag.max_lags_policy.isdigit():
            raise ConfigError("diag.max_lags_policy must be 'schwert' or an integer")
        try:
            TrainConfig(**dataclasses.asdict(self.train))
        except Exception as exc:
            raise ConfigError(str(exc)) from None
        return self


SECTIONS = ("data", "window", "model", "train", "graph", "stability", "diag")


def _parse(raw: str, tp, where: str):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if raw.lower() in ("", "none", "null"):
            return None
        tp = next(a for a in args if a is not type(None))
        origin = typing.get_origin(tp)
        args = typing.get_args(tp)
    try:
        if origin is list:
            return [_parse(v, args[0], where) for v in raw.split(",") if v.strip()]
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {getattr(tp, '__name__', tp)}") from None


def _fields(cls) -> dict[str, typing.Any]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def load_config(path: str | Path | None = None, text: str | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None and text is None:
        return cfg.validate()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        if text is not None:
            parser.read_string(text)
        else:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    for section in parser.sections():
        if section == "run":
            target, allowed = cfg, {"seed": int, "deterministic": bool}
        elif section in SECTIONS:
            target = getattr(cfg, section)
            allowed = _fields(type(target))
        else:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown config key {section}.{key}")
            setattr(target, key, _parse(raw, allowed[key], f"{section}.{key}"))
    return cfg.validate()


def dump_config(cfg: PipelineConfig) -> str:
    """INI text that :func:`load_config` reads back to an equal config."""
    lines = ["[run]", f"seed = {cfg.seed}", f"deterministic = {str(cfg.deterministic).lower()}", ""]
    for section in SECTIONS:
        lines.append(f"[{section}]")
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, list):
                v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            elif v is None:
                v = "none"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        lines.append("")
    return "\n".join(lines)
