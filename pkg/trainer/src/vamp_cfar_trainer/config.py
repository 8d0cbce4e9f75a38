"""Training configuration."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass


class TrainerConfigError(ValueError):
    """Config file missing keys or holding invalid values."""


@dataclass(frozen=True)
class TrainingConfig:
    """Synthetic-data and optimization settings.

    The data fields (m, n, k_targets, snr_db, noise_var) mirror the
    detection toolkit's generation conventions exactly; any divergence
    is a bug caught by the fixture parity tests.
    """

    m: int
    n: int
    k_targets: int
    snr_db: float
    noise_var: float
    k_layers: int
    batch_size: int
    steps: int
    learning_rate: float
    layerwise: bool = False
    seed: int = 0
    val_batch_size: int = 24
    checkpoint_every: int = 10

    def validate(self) -> None:
        if self.m < 1 or self.n < 1 or self.m > self.n:
            raise TrainerConfigError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if not (0 <= self.k_targets <= self.n):
            raise TrainerConfigError(
                f"need 0 <= k_targets <= n, got {self.k_targets}"
            )
        if not (self.noise_var > 0):
            raise TrainerConfigError(f"noise_var must be > 0, got {self.noise_var}")
        if self.k_layers < 1:
            raise TrainerConfigError(f"k_layers must be >= 1, got {self.k_layers}")
        if self.batch_size < 1:
            raise TrainerConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.steps < 1:
            raise TrainerConfigError(f"steps must be >= 1, got {self.steps}")
        if not (self.learning_rate > 0):
            raise TrainerConfigError(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.seed < 0:
            raise TrainerConfigError(f"seed must be >= 0, got {self.seed}")
        if self.val_batch_size < 1:
            raise TrainerConfigError(
                f"val_batch_size must be >= 1, got {self.val_batch_size}"
            )
        if self.checkpoint_every < 1:
            raise TrainerConfigError(
                f"checkpoint_every must be >= 1, got {self.checkpoint_every}"
            )


_FIELDS = {
    "m": int, "n": int, "k_targets": int, "snr_db": (int, float),
    "noise_var": (int, float), "k_layers": int, "batch_size": int,
    "steps": int, "learning_rate": (int, float), "layerwise": bool,
    "seed": int, "val_batch_size": int, "checkpoint_every": int,
}
_REQUIRED = ("m", "n", "k_targets", "snr_db", "noise_var", "k_layers",
             "batch_size", "steps", "learning_rate")


def config_from_dict(raw: dict) -> TrainingConfig:
    if not isinstance(raw, dict):
        raise TrainerConfigError("config root must be a table/object")
    for key in raw:
        if key not in _FIELDS:
            raise TrainerConfigError(f"unknown config key {key!r}")
    for key in _REQUIRED:
        if key not in raw:
            raise TrainerConfigError(f"missing key {key!r}")
    values = {}
    for key, value in raw.items():
        kinds = _FIELDS[key]
        if kinds is not bool and isinstance(value, bool):
            raise TrainerConfigError(f"{key}: expected {kinds}, got {value!r}")
        if not isinstance(value, kinds):
            raise TrainerConfigError(f"{key}: expected {kinds}, got {value!r}")
        values[key] = value
    cfg = TrainingConfig(**values)
    cfg.validate()
    return cfg


def load_config(path) -> TrainingConfig:
    """Parse a TOML or JSON training config."""
    text_path = os.fspath(path)
    try:
        if text_path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(text_path, "rb") as fh:
                raw = tomllib.load(fh)
        elif text_path.endswith(".json"):
            with open(text_path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        else:
            raise TrainerConfigError(f"config must be .toml or .json, got {text_path!r}")
    except TrainerConfigError:
        raise
    except OSError as exc:
        raise TrainerConfigError(f"cannot read config {text_path!r}: {exc}") from exc
    except Exception as exc:
        raise TrainerConfigError(f"cannot parse config {text_path!r}: {exc}") from exc
    return config_from_dict(raw)
