"""Run configuration: typed sections plus a plain ``key = value`` file format.

The on-disk format is an INI file with one section per config group. Every
run writes its fully resolved configuration next to its outputs so the run
can be reproduced from that file alone.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .encoder import EncoderConfig
from .errors import ContractViolationError


@dataclass(frozen=True)
class DatasetConfig:
    images_per_condition: int = 400
    image_size: int = 128
    num_grades: int = 3
    seed: int = 7


@dataclass(frozen=True)
class PatchConfig:
    patch_side: int = 32
    conf: float = 0.5
    miss_rate: float = 0.1
    box_jitter: float = 4.0
    patches_per_healthy_image: int = 2
    seed: int = 3
    eval_every_nth_image: int = 4  # every n-th image per condition held out for eval


@dataclass(frozen=True)
class PretrainConfig:
    variant: str = "full"
    temperature: float = 0.07
    batch_per_level: int = 16
    steps: int = 2000
    lr: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 11


@dataclass(frozen=True)
class ProbeConfig:
    mode: str = "finetune"
    epochs: int = 30
    lr: float = 1e-3
    seed: int = 13
    train_patches_per_class: int = 40  # labeled budget; 0 keeps everything


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    patches: PatchConfig = field(default_factory=PatchConfig)
    model: EncoderConfig = field(default_factory=EncoderConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    out_dir: str = "runs/default"


_SECTIONS = {
    "dataset": ("dataset", DatasetConfig),
    "patches": ("patches", PatchConfig),
    "model": ("model", EncoderConfig),
    "pretrain": ("pretrain", PretrainConfig),
    "probe": ("probe", ProbeConfig),
}


def _parse_value(raw: str, annotation: type):
    raw = raw.strip()
    if annotation is int:
        return int(raw)
    if annotation is float:
        return float(raw)
    if annotation is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    if annotation is str:
        return raw
    # tuple[int, ...] (model channels)
    return tuple(int(part) for part in raw.replace("(", "").replace(")", "").split(",") if part.strip())


def _section_from(parser: configparser.ConfigParser, section: str, cls):
    kwargs = {}
    hints = {f.name: f.type for f in dataclasses.fields(cls)}
    resolved = {f.name: f for f in dataclasses.fields(cls)}
    if parser.has_section(section):
        for key, raw in parser.items(section):
            if key not in hints:
                raise ContractViolationError(f"unknown config key [{section}] {key}")
            annotation = resolved[key].type
            if isinstance(annotation, str):
                annotation = {"int": int, "float": float, "str": str, "bool": bool}.get(
                    annotation, tuple
                )
            kwargs[key] = _parse_value(raw, annotation)
    return cls(**kwargs)


def load_config(path: str | Path | None = None,
                overrides: list[str] | None = None) -> RunConfig:
    """Build a RunConfig from an optional INI file plus section.key=value overrides."""
    parser = configparser.ConfigParser()
    if path is not None:
        text = Path(path).read_text()
        parser.read_string(text)
    for override in overrides or []:
        if "=" not in override or "." not in override.split("=", 1)[0]:
            raise ContractViolationError(
                f"override '{override}' must look like section.key=value"
            )
        dotted, value = override.split("=", 1)
        section, key = dotted.strip().split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value.strip())
    sections = {}
    for section, (attr, cls) in _SECTIONS.items():
        sections[attr] = _section_from(parser, section, cls)
    out_dir = "runs/default"
    if parser.has_section("run") and parser.has_option("run", "out_dir"):
        out_dir = parser.get("run", "out_dir")
    return RunConfig(out_dir=out_dir, **sections)


def dump_config(config: RunConfig) -> str:
    """Serialize to the INI format accepted by load_config."""
    lines: list[str] = []
    for section, (attr, _) in _SECTIONS.items():
        lines.append(f"[{section}]")
        obj = getattr(config, attr)
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        lines.append("")
    lines.append("[run]")
    lines.append(f"out_dir = {config.out_dir}")
    lines.append("")
    return "\n".join(lines)


def write_resolved_config(config: RunConfig, out_dir: str | Path) -> Path:
    path = Path(out_dir) / "resolved_config.ini"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_config(config))
    return path
