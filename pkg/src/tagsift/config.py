"""Aggregate pipeline configuration and its INI file format.

Every stage keeps its own frozen dataclass; this module groups them,
reads overrides from an INI file whose sections mirror the group field
names, and flattens the effective values back out so reports can echo
the exact configuration they were produced under.
"""

from __future__ import annotations

import configparser
import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .annotator import AnnotatorConfig
from .approval import OracleConfig
from .clustering import APConfig, KMeansConfig
from .collage import CollageConfig
from .features import FeatureConfig
from .lsh import HasherConfig
from .segmenter import SegmenterConfig
from .synth import SyntheticConfig
from .trainset import TrainsetConfig


@dataclass(frozen=True)
class PipelineConfig:
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    hasher: HasherConfig = field(default_factory=HasherConfig)
    affinity: APConfig = field(default_factory=APConfig)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    collage: CollageConfig = field(default_factory=CollageConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    trainset: TrainsetConfig = field(default_factory=TrainsetConfig)
    annotator: AnnotatorConfig = field(default_factory=AnnotatorConfig)


class ConfigError(ValueError):
    pass


def _coerce(raw: str, annotation: object, where: str) -> object:
    origin = typing.get_origin(annotation)
    if origin in (typing.Union, types.UnionType):
        members = typing.get_args(annotation)
        if float in members and str in members:
            try:
                return float(raw)
            except ValueError:
                return raw
        raise ConfigError(f"{where}: unsupported option type {annotation}")
    if annotation is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{where}: expected a boolean, got '{raw}'")
    if annotation is int:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: expected an integer, got '{raw}'") from exc
    if annotation is float:
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: expected a number, got '{raw}'") from exc
    if annotation is str:
        return raw
    raise ConfigError(f"{where}: unsupported option type {annotation}")


def _build_section(
    cls: type, section: str, options: dict[str, str]
) -> object:
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for name, raw in options.items():
        if name not in known:
            raise ConfigError(
                f"[{section}] has no option '{name}' "
                f"(known: {', '.join(sorted(known))})"
            )
        kwargs[name] = _coerce(raw, hints[name], f"[{section}] {name}")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def default_config() -> PipelineConfig:
    return PipelineConfig()


def load_config(path: Path | str | None) -> PipelineConfig:
    """Defaults overridden by an INI file with one section per stage."""
    if path is None:
        return default_config()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    sections = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    kwargs = {}
    for section in parser.sections():
        if section not in sections:
            raise ConfigError(
                f"unknown config section [{section}] "
                f"(known: {', '.join(sorted(sections))})"
            )
        cls = typing.get_type_hints(PipelineConfig)[section]
        kwargs[section] = _build_section(cls, section, dict(parser[section]))
    return PipelineConfig(**kwargs)


def config_lines(config: PipelineConfig) -> list[str]:
    """Flat `section.option=value` lines describing the effective config."""
    lines = []
    for section_field in dataclasses.fields(PipelineConfig):
        section = getattr(config, section_field.name)
        for option in dataclasses.fields(section):
            value = getattr(section, option.name)
            lines.append(f"{section_field.name}.{option.name}={value}")
    return lines
