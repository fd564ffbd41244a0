"""Tool configuration: one JSON file with full defaults for every field.

The file may set any subset of the sections below; everything else keeps
its documented default. A seed passed on the command line overrides the
configured one and is pushed into the dataset section, so all randomness
flows from a single number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import BiseldError
from .features import StftParams
from .hrtf import HeadGeometry
from .synth import SynthConfig


@dataclass(frozen=True)
class ToolConfig:
    stft: StftParams = field(default_factory=StftParams)
    synth: SynthConfig = field(default_factory=SynthConfig)
    head: HeadGeometry = field(default_factory=HeadGeometry)
    decode_threshold: float = 0.5
    angle_thresh_deg: float = 20.0
    seed: int = 0

    def with_seed(self, seed: int) -> "ToolConfig":
        return replace(self, seed=seed, synth=replace(self.synth, seed=seed))


_SECTIONS = {"stft": StftParams, "synth": SynthConfig, "head": HeadGeometry}
_SCALARS = ("decode_threshold", "angle_thresh_deg", "seed")


def load_config(path=None, seed_override: int | None = None) -> ToolConfig:
    if path is None:
        cfg = ToolConfig()
        return cfg.with_seed(seed_override) if seed_override is not None else cfg
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise BiseldError("no such file", path=str(path)) from None
    except json.JSONDecodeError as exc:
        raise BiseldError(f"invalid JSON: {exc.msg}", path=str(path),
                          line=exc.lineno) from exc
    if not isinstance(raw, dict):
        raise BiseldError("config must be a JSON object", path=str(path))
    unknown = set(raw) - set(_SECTIONS) - set(_SCALARS)
    if unknown:
        raise BiseldError(f"unknown config sections: {sorted(unknown)}",
                          path=str(path), field=sorted(unknown)[0])
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name not in raw:
            continue
        section = raw[name]
        if not isinstance(section, dict):
            raise BiseldError(f"section {name!r} must be an object",
                              path=str(path), field=name)
        valid = set(cls.__dataclass_fields__)
        bad = set(section) - valid
        if bad:
            raise BiseldError(f"unknown keys in section {name!r}: {sorted(bad)}",
                              path=str(path), field=sorted(bad)[0])
        if cls is SynthConfig:
            for key in ("classes", "split", "azimuths", "elevations"):
                if key in section:
                    section[key] = tuple(section[key])
        kwargs[name] = cls(**section)
    for name in _SCALARS:
        if name in raw:
            kwargs[name] = raw[name]
    cfg = ToolConfig(**kwargs)
    return cfg.with_seed(seed_override) if seed_override is not None else cfg
