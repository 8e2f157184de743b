"""Flat key=value run configuration.

One text file carries the merged training, scene, and model-variant
settings; it is written next to every checkpoint and dataset manifest so
runs are reproducible. Unknown keys are rejected rather than ignored, so
typos in ablation grids fail loudly.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .blocks import DCGA_WIRINGS, SVC_BRANCHES, NetConfig
from .errors import ConfigurationError
from .synth import SceneConfig
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig
    scene: SceneConfig
    model: NetConfig
    dtype: str = "float32"

    @classmethod
    def default(cls):
        return cls(TrainConfig(), SceneConfig(), NetConfig())


def _fmt(value):
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _parse(raw: str, proto):
    if isinstance(proto, bool):
        if raw not in ("true", "false"):
            raise ConfigurationError(f"expected true/false, got {raw!r}")
        return raw == "true"
    if isinstance(proto, int):
        return int(raw)
    if isinstance(proto, float):
        return float(raw)
    if isinstance(proto, tuple):
        if raw == "":
            return ()
        elem = proto[0] if proto else 1.0
        return tuple(_parse(part, elem) for part in raw.split(","))
    return raw


_SECTIONS = {"train": TrainConfig, "scene": SceneConfig, "model": NetConfig}


def to_text(cfg: RunConfig) -> str:
    lines = []
    for section in _SECTIONS:
        sub = getattr(cfg, section)
        for f in fields(sub):
            lines.append(f"{section}.{f.name}={_fmt(getattr(sub, f.name))}")
    lines.append(f"dtype={cfg.dtype}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> RunConfig:
    values = {section: {} for section in _SECTIONS}
    dtype = "float32"
    known = {
        section: {f.name: f for f in fields(klass)}
        for section, klass in _SECTIONS.items()
    }
    protos = {
        section: {f.name: getattr(klass(), f.name) for f in fields(klass)}
        for section, klass in _SECTIONS.items()
    }
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key == "dtype":
            if raw not in ("float32", "float64"):
                raise ConfigurationError(f"config line {lineno}: dtype must be float32/float64")
            dtype = raw
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or name not in known[section]:
            raise ConfigurationError(f"config line {lineno}: unknown key {key!r}")
        values[section][name] = _parse(raw, protos[section][name])
    if "dcga_wiring" in values["model"] and values["model"]["dcga_wiring"] not in DCGA_WIRINGS:
        raise ConfigurationError(f"unknown dcga_wiring {values['model']['dcga_wiring']!r}")
    if "svc_branches" in values["model"]:
        bad = set(values["model"]["svc_branches"]) - set(SVC_BRANCHES)
        if bad:
            raise ConfigurationError(f"unknown SVC branches {sorted(bad)}")
    return RunConfig(
        train=TrainConfig(**values["train"]),
        scene=SceneConfig(**values["scene"]),
        model=NetConfig(**values["model"]),
        dtype=dtype,
    )


def load(path) -> RunConfig:
    return from_text(Path(path).read_text())


def save(cfg: RunConfig, path):
    Path(path).write_text(to_text(cfg))


def override(cfg: RunConfig, **section_overrides) -> RunConfig:
    """override(cfg, train={'epochs': 10}, model={'use_svc': False})."""
    kw = {}
    for section, changes in section_overrides.items():
        if section == "dtype":
            kw["dtype"] = changes
            continue
        if section not in _SECTIONS:
            raise ConfigurationError(f"unknown config section {section!r}")
        kw[section] = replace(getattr(cfg, section), **changes)
    return replace(cfg, **kw)
