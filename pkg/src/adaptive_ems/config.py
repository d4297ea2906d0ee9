"""Run configuration documents (JSON, strict keys)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .ems import EmsConfig
from .nsga3 import OptimizerConfig

MODES = ("replay", "paced")

_EMS_KEYS = {
    "tick_seconds",
    "initial_soc",
    "soc_weight_threshold",
    "pv_usage_floor_fraction",
    "degradation_ceiling",
    "battery_capacity_kwh",
    "soc_floor",
    "reference_layers",
    "hv_samples",
}
_OPTIMIZER_KEYS = {
    "population_size": "population_size",
    "generations": "generations",
    "crossover_probability": "crossover_probability",
    "crossover_distribution_index": "crossover_distribution_index",
    "mutation_probability": "mutation_probability",
    "mutation_distribution_index": "mutation_distribution_index",
    "seed": "rng_seed",
}
_RUN_KEYS = {"mode", "baseline_hold_ticks"}
KNOWN_KEYS = frozenset(_EMS_KEYS | set(_OPTIMIZER_KEYS) | _RUN_KEYS)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    ems: EmsConfig = field(default_factory=EmsConfig)
    mode: str = "replay"
    baseline_hold_ticks: int = 1

    @property
    def seed(self) -> int:
        return self.ems.optimizer.rng_seed

    def with_seed(self, seed: int) -> "RunConfig":
        doc = self.to_dict()
        doc["seed"] = seed
        return config_from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {k: getattr(self.ems, k) for k in sorted(_EMS_KEYS)}
        doc["reference_layers"] = [list(layer) for layer in self.ems.reference_layers]
        for key, attr in _OPTIMIZER_KEYS.items():
            doc[key] = getattr(self.ems.optimizer, attr)
        doc["mode"] = self.mode
        doc["baseline_hold_ticks"] = self.baseline_hold_ticks
        return doc


def config_from_dict(doc: Mapping[str, Any]) -> RunConfig:
    for key in doc:
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown configuration key: {key!r}")
    mode = doc.get("mode", "replay")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    hold = doc.get("baseline_hold_ticks", 1)
    if not isinstance(hold, int) or hold < 0:
        raise ConfigError("baseline_hold_ticks must be a non-negative integer")
    try:
        opt = OptimizerConfig(**{attr: doc[key] for key, attr in _OPTIMIZER_KEYS.items() if key in doc})
        ems = EmsConfig(optimizer=opt, **{k: doc[k] for k in _EMS_KEYS if k in doc})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(ems=ems, mode=mode, baseline_hold_ticks=hold)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(doc)
