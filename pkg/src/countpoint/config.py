"""Run configuration: a flat ``key = value`` text file.

Blank lines and lines starting with ``#`` are ignored. Unknown keys and
invalid values are rejected before any work starts.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .curriculum import SCHEDULE_END_ALT, SCHEDULE_END_DEFAULT, SCHEDULE_START
from .net import CONV_ACTIVATIONS
from .optim import OPTIMIZERS
from .scene import FULL_GEOMETRY, REDUCED_GEOMETRY, GridGeometry

STUDY_ITERATIONS = {1: 2000, 2: 2000, 3: 1050}
SCHEDULE_ENDS = {"default": SCHEDULE_END_DEFAULT, "alt": SCHEDULE_END_ALT}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__("%s: %s" % (key, message))
        self.key = key


def _floats(text: str, n: int) -> tuple[float, ...]:
    vals = tuple(float(v) for v in text.replace(",", " ").split())
    if len(vals) != n:
        raise ValueError("expected %d numbers" % n)
    return vals


@dataclass
class RunConfig:
    seeds: tuple = (0, 1, 2, 3, 4)
    study: int = 3
    geometry: str = "reduced"              # reduced | full | custom
    image_height: Optional[int] = None     # custom geometry overrides
    image_width: Optional[int] = None
    cell_width: Optional[int] = None
    cell_height: Optional[int] = None
    ball_radius: Optional[float] = None
    iterations_gesture: int = 2000
    iterations_recitation: int = 1000
    iterations_study: Optional[int] = None  # default depends on the study
    gesture_pre_lr: float = 0.004
    recitation_number_lr: float = 0.002
    recitation_gesture_lr: float = 0.001
    main_number_lr: float = 0.001
    main_gesture_lr: float = 0.002
    optimizer: str = "adam"
    conv_activation: str = "relu"
    init_scale: float = 0.1
    schedule_start: tuple = SCHEDULE_START
    schedule_end: tuple = SCHEDULE_END_DEFAULT
    post_completion: str = "hold"
    eval_every: int = 50
    eval_batches: int = 50
    checkpoint_every: int = 500

    # -- derived ---------------------------------------------------------

    @property
    def study_iterations(self) -> int:
        return self.iterations_study if self.iterations_study is not None else STUDY_ITERATIONS[self.study]

    def grid(self) -> GridGeometry:
        base = {"reduced": REDUCED_GEOMETRY, "full": FULL_GEOMETRY, "custom": REDUCED_GEOMETRY}[self.geometry]
        over = {k: getattr(self, k) for k in ("image_height", "image_width", "cell_width", "cell_height",
                                               "ball_radius") if getattr(self, k) is not None}
        return dataclasses.replace(base, **over) if over else base

    # -- validation --------------------------------------------------------

    def validate(self) -> "RunConfig":
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds) or any(s < 0 for s in self.seeds):
            raise ConfigError("seeds", "seeds must be distinct non-negative integers")
        if self.study not in STUDY_ITERATIONS:
            raise ConfigError("study", "must be 1, 2 or 3")
        if self.geometry not in ("reduced", "full", "custom"):
            raise ConfigError("geometry", "must be reduced, full or custom")
        try:
            self.grid()
        except ValueError as exc:
            raise ConfigError("geometry", str(exc)) from None
        for key in ("iterations_gesture", "iterations_recitation"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "must be >= 0")
        if self.iterations_study is not None and self.iterations_study < 0:
            raise ConfigError("iterations_study", "must be >= 0")
        for key in ("gesture_pre_lr", "recitation_number_lr", "recitation_gesture_lr",
                    "main_number_lr", "main_gesture_lr"):
            if not getattr(self, key) >= 0:
                raise ConfigError(key, "learning rates must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError("optimizer", "choose from %s" % ", ".join(OPTIMIZERS))
        if self.conv_activation not in CONV_ACTIVATIONS:
            raise ConfigError("conv_activation", "choose from %s" % ", ".join(CONV_ACTIVATIONS))
        if not self.init_scale > 0:
            raise ConfigError("init_scale", "must be > 0")
        for key in ("schedule_start", "schedule_end"):
            p = getattr(self, key)
            if len(p) != 3 or any(v < 0 or v > 1 for v in p) or abs(sum(p) - 1) > 1e-9:
                raise ConfigError(key, "three probabilities in [0,1] summing to 1 are required")
        if self.post_completion not in ("hold", "base"):
            raise ConfigError("post_completion", "must be hold or base")
        for key in ("eval_every", "eval_batches", "checkpoint_every"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be >= 1")
        return self

    # -- text form ---------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append("%s = %s" % (f.name, v))
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes).validate()


_FIELDS = {f.name: f for f in fields(RunConfig)}


def parse_value(key: str, text: str):
    text = text.strip()
    try:
        if key == "seeds":
            return tuple(int(s) for s in text.replace(",", " ").split())
        if key in ("schedule_start", "schedule_end"):
            if text in SCHEDULE_ENDS:
                return SCHEDULE_ENDS[text]
            return _floats(text, 3)
        if key in ("geometry", "optimizer", "conv_activation", "post_completion"):
            return text
        if key == "ball_radius" or key.endswith("_lr") or key == "init_scale":
            return float(text)
        return int(text)
    except ValueError as exc:
        raise ConfigError(key, "cannot parse %r (%s)" % (text, exc)) from None


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(key or "line %d" % lineno, "expected key = value")
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        values[key] = parse_value(key, val)
    cfg = dataclasses.replace(base or RunConfig(), **values)
    return cfg.validate()


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
