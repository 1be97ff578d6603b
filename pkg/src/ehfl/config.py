"""Flat ``key=value`` configuration files and overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

from ehfl.trainer import ScenarioConfig, config_dict


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    out_dir: str = "results"

    def to_dict(self) -> dict:
        d = config_dict(self.scenario)
        d["out_dir"] = self.out_dir
        return d


def read_pairs(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        pairs[key.strip()] = value.strip()
    return pairs


def split_overrides(items: Iterable[str]) -> dict:
    out = {}
    for item in items:
        for token in item.split():
            key, sep, value = token.partition("=")
            if not sep:
                raise ValueError(f"override must be key=value, got {token!r}")
            out[key.strip()] = value.strip()
    return out


def _convert(name: str, default, value: str):
    if name == "energy_groups":
        groups = tuple(g.strip() for g in value.split(",") if g.strip())
        if not groups:
            raise ValueError("energy_groups: empty")
        return groups
    if name == "antennas":
        return None if value.lower() in ("", "none", "auto") else int(value)
    try:
        if isinstance(default, bool):
            if value.lower() in ("1", "true", "yes"):
                return True
            if value.lower() in ("0", "false", "no"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            if "/" in value:
                num, den = value.split("/", 1)
                return float(num) / float(den)
            return float(value)
    except ValueError:
        raise ValueError(f"{name}: cannot parse {value!r} as {type(default).__name__}") from None
    return value


def apply_pairs(base, pairs: dict, extra: Optional[set] = None):
    """Return a copy of dataclass ``base`` with string ``pairs`` applied.

    Unknown keys raise ``ValueError`` naming the key.
    """
    known = {f.name: f for f in fields(base)}
    updates = {}
    for key, value in pairs.items():
        if extra and key in extra:
            continue
        if key not in known:
            raise ValueError(f"{key}: unknown configuration key")
        updates[key] = _convert(key, getattr(base, key), value)
    return dataclasses.replace(base, **updates)


def parse_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then the file (if any), then ``overrides``."""
    pairs = {}
    if path is not None:
        pairs.update(read_pairs(Path(path).read_text(encoding="utf-8")))
    if overrides:
        pairs.update(overrides)
    out_dir = pairs.pop("out_dir", "results")
    return RunConfig(apply_pairs(ScenarioConfig(), pairs), out_dir)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, (list, tuple)):
            value = ",".join(value)
        elif value is None:
            value = "none"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
