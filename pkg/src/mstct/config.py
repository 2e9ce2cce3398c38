"""Run configuration and the flat ``key=value`` config file format.

One assignment per line; ``#`` starts a comment. Keys are ModelConfig or
RunConfig field names (plus a few short ablation aliases). Values are
parsed according to the field's type; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from .model import ModelConfig
from .numerics import ConfigError

ALIASES = {
    "global": "use_global",
    "local": "use_local",
    "temporal_encoder": "use_temporal_encoder",
    "mixer": "use_mixer",
    "heatmap_branch": "use_heatmap_branch",
    "classification_branch": "use_classification_branch",
    "heads": "H",
    "blocks": "B",
    "kernel": "k",
    "tokens": "T",
    "stages": "N",
    "sigma": "sigma_ratio",
}

_TRUE = {"1", "true", "on", "yes"}
_FALSE = {"0", "false", "off", "no"}


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    lr: float = 1e-4
    lr_factor: float = 0.5
    lr_patience: int = 8
    batch_size: int = 8
    epochs: int = 50
    windows_per_video: int = 4
    seed: int = 0
    val_fraction: float = 0.2
    infer_stride: int = 0  # 0: T // 2
    taus: tuple[int, ...] = (0, 20, 40)
    threshold: float = 0.5

    def __post_init__(self):
        problems = []
        if self.lr <= 0:
            problems.append("lr must be > 0")
        if not 0 < self.lr_factor < 1:
            problems.append("lr_factor must be in (0, 1)")
        if self.lr_patience < 0:
            problems.append("lr_patience must be >= 0")
        for name in ("batch_size", "epochs", "windows_per_video"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if not 0 <= self.val_fraction < 1:
            problems.append("val_fraction must be in [0, 1)")
        if self.infer_stride < 0 or self.infer_stride > self.model.T:
            problems.append(f"infer_stride must be in [0, T={self.model.T}]")
        if any(t < 0 for t in self.taus):
            problems.append("taus must be >= 0")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def stride(self) -> int:
        return self.infer_stride or self.model.T // 2

    def to_text(self) -> str:
        lines = [f"{k} = {_fmt(v)}" for k, v in self.model.to_dict().items()]
        for f in fields(self):
            if f.name != "model":
                lines.append(f"{f.name} = {_fmt(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


_MODEL_FIELDS = {f.name: f for f in fields(ModelConfig)}
_RUN_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "model"}


def _parse_value(key: str, raw: str, typ) -> object:
    raw = raw.strip()
    t = str(typ)
    try:
        if t.startswith("bool"):
            low = raw.lower()
            if "None" in t and low in ("none", "default", "auto"):
                return None
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if t == "int":
            return int(raw)
        if t == "float":
            return float(Fraction(raw))
        if t.startswith("tuple"):
            return tuple(int(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {t})") from None


def parse_assignments(pairs) -> tuple[dict, dict]:
    """Split ``key=value`` strings into (model overrides, run overrides)."""
    model, run = {}, {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = ALIASES.get(key.strip(), key.strip())
        if key in _MODEL_FIELDS:
            model[key] = _parse_value(key, raw, _MODEL_FIELDS[key].type)
        elif key in _RUN_FIELDS:
            run[key] = _parse_value(key, raw, _RUN_FIELDS[key].type)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return model, run


def read_config_lines(path) -> list[str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    out = []
    for line in p.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(line.replace(" = ", "=").replace(" =", "=").replace("= ", "="))
    return out


def build_run_config(path=None, overrides=(), base: RunConfig | None = None) -> RunConfig:
    """Config file (optional) then ``overrides`` applied on top of ``base``."""
    base = base or RunConfig()
    lines = read_config_lines(path) if path else []
    m, r = parse_assignments(list(lines) + list(overrides))
    model = dataclasses.replace(base.model, **m)
    return dataclasses.replace(base, model=model, **r)


def load_run_config(path) -> RunConfig:
    return build_run_config(path)
