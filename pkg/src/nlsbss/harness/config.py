"""Scenario configuration: nested YAML sections mapped onto dataclasses.

Unknown keys anywhere are rejected, so a typo cannot silently fall back to a
default.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from ..room import RoomSpec
from ..signal import ConfigurationError, StftConfig

MODES = ("single_talk", "double_talk", "real_capture")
GENERATORS = ("speech", "white_noise", "silence")


class ConfigError(ValueError):
    """Scenario configuration is malformed or inconsistent."""


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(names)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class NonlinearitySpec:
    """Either a fixed ``x_max`` or an ``sdr_target`` to calibrate against the far end."""

    kind: str = "hard_clip"
    sdr_target: Optional[float] = 5.0
    x_max: Optional[float] = None
    rho: float = 2.0

    def __post_init__(self):
        if self.kind not in ("hard_clip", "soft_saturation", "identity"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "identity":
            self.sdr_target = None
            self.x_max = None
        elif (self.sdr_target is None) == (self.x_max is None):
            raise ValueError("give exactly one of sdr_target or x_max")


@dataclass
class SourceSpec:
    file: Optional[str] = None
    generator: Optional[str] = None
    duration: float = 10.0
    f0: Optional[float] = None
    channel: int = 0

    def __post_init__(self):
        if (self.file is None) == (self.generator is None):
            raise ValueError("give exactly one of file or generator")
        if self.generator is not None and self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}; expected one of {GENERATORS}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


@dataclass
class MetricsSpec:
    window: int = 16000
    hop: int = 4000


@dataclass
class BaselineSpec:
    enabled: bool = True
    step: float = 0.5
    regularization: float = 0.01


@dataclass
class ScenarioConfig:
    mode: str = "single_talk"
    sample_rate: int = 16000
    seed: int = 0
    order: int = 3
    learning_rate: float = 0.1
    stft: StftConfig = field(default_factory=StftConfig)
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    room: Optional[RoomSpec] = field(default_factory=RoomSpec)
    rir_file: Optional[str] = None
    esr_target: Optional[float] = 60.0
    far_end: SourceSpec = field(default_factory=lambda: SourceSpec(generator="speech"))
    near_end: Optional[SourceSpec] = field(default_factory=lambda: SourceSpec(generator="white_noise"))
    microphone: Optional[SourceSpec] = None
    metrics: MetricsSpec = field(default_factory=MetricsSpec)
    baseline: BaselineSpec = field(default_factory=BaselineSpec)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "real_capture":
            if self.microphone is None or self.far_end.file is None or self.microphone.file is None:
                raise ConfigError("real_capture needs far_end.file and microphone.file")
        else:
            if (self.room is None) == (self.rir_file is None):
                raise ConfigError("give exactly one of room or rir_file")
            if self.microphone is not None:
                raise ConfigError(f"microphone input is only valid in real_capture mode, not {self.mode}")
        if self.order < 1:
            raise ConfigError(f"order must be >= 1, got {self.order}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.esr_target is not None and not math.isfinite(self.esr_target):
            raise ConfigError("esr_target must be finite or none")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration root must be a mapping")
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown}; allowed: {sorted(known)}")
        sections = {
            "stft": StftConfig,
            "nonlinearity": NonlinearitySpec,
            "far_end": SourceSpec,
            "near_end": SourceSpec,
            "microphone": SourceSpec,
            "metrics": MetricsSpec,
            "baseline": BaselineSpec,
        }
        for key, sub in sections.items():
            if key in data and data[key] is not None:
                data[key] = _build(sub, data[key], key)
        if "room" in data:
            data["room"] = None if data["room"] is None else room_from_dict(data["room"])
        if data.get("rir_file") is not None and "room" not in data:
            data["room"] = None
        if data.get("esr_target") == "none":
            data["esr_target"] = None
        try:
            return cls(**data)
        except ConfigurationError as exc:
            raise ConfigError(str(exc)) from exc
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, StftConfig):
                v = {"fft_size": v.fft_size, "hop": v.hop, "window": v.window}
            elif isinstance(v, RoomSpec):
                v = room_to_dict(v)
            elif dataclasses.is_dataclass(v):
                v = dataclasses.asdict(v)
            out[f.name] = v
        return out


def room_from_dict(data: Any) -> RoomSpec:
    room = _build(RoomSpec, data, "room")
    return room


def room_to_dict(room: RoomSpec) -> dict:
    d = {f.name: getattr(room, f.name) for f in dataclasses.fields(room)}
    for k in ("dimensions", "source_pos", "mic_pos"):
        d[k] = list(d[k])
    return d


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    return ScenarioConfig.from_dict(data or {})


def dump_config(config: ScenarioConfig, path) -> None:
    with open(Path(path), "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"


def resolve_config_path(name_or_path) -> Path:
    """A file path, or the name of a shipped preset (e.g. ``single_talk``)."""
    p = Path(name_or_path)
    if p.exists():
        return p
    preset = PRESET_DIR / f"{name_or_path}.yaml"
    if preset.exists():
        return preset
    raise FileNotFoundError(f"no config file or preset named {name_or_path!r}")
