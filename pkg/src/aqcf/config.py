"""Run configuration: a sectioned key = value file (INI grammar).

Every key has a default; unknown sections or keys are rejected.  The
effective configuration is echoed into the output directory in the same
grammar and must re-parse to an equal structure.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from typing import Tuple

from .errors import ConfigError
from .training import TrainSettings


@dataclass
class DataConfig:
    train_path: str = ""
    eval_path: str = ""  # empty: hold out eval_fraction of the training file
    eval_fraction: float = 0.2
    min_count: int = 2


@dataclass
class PlateauConfig:
    n_qubits: Tuple[int, ...] = (2, 4, 6, 8)
    depths: Tuple[int, ...] = (1, 2, 4, 8)
    samples: int = 500


@dataclass
class ModelSection:
    vocab_size: int = 0  # 0: derived from the training vocabulary
    d_model: int = 128
    n_heads: int = 4
    n_layers: int = 2
    n_q: int = 8
    l_max: int = 20
    max_seq_len: int = 64
    m_slots: int = 16
    dropout: float = 0.1
    num_classes: int = 2
    truncate_overlong: bool = True
    memory_gamma: float = 0.1
    lambda_target: float = 0.4


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainSettings = field(default_factory=TrainSettings)
    data: DataConfig = field(default_factory=DataConfig)
    plateau: PlateauConfig = field(default_factory=PlateauConfig)
    output_dir: str = "runs/default"
    threads: int = 0


def _parse_value(raw: str, template):
    if isinstance(template, bool):
        low = raw.strip().lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    if isinstance(template, tuple):
        items = [part.strip() for part in raw.split(",") if part.strip()]
        elem = template[0] if template else 0.0
        return tuple(int(v) if isinstance(elem, int) else float(v) for v in items)
    return raw.strip()


def _section_targets(cfg: RunConfig):
    return {
        "model": cfg.model,
        "training": cfg.training,
        "optimizer": cfg.training.optimizer,
        "loss": cfg.training.weights,
        "data": cfg.data,
        "plateau": cfg.plateau,
    }


_TRAINING_KEYS = ("epochs", "batch_size", "seed", "stage_fractions",
                  "noise_epsilon", "depth_aux_weight")
_OPTIMIZER_KEYS = ("base_lr", "beta1", "beta2", "epsilon", "g_max")


def _allowed_keys(section: str, target) -> Tuple[str, ...]:
    if section == "training":
        return _TRAINING_KEYS
    if section == "optimizer":
        return _OPTIMIZER_KEYS
    return tuple(f.name for f in dataclasses.fields(target))


def parse_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = RunConfig()
    targets = _section_targets(cfg)
    for section in parser.sections():
        if section == "output":
            for key, raw in parser.items(section):
                if key == "dir":
                    cfg.output_dir = raw.strip()
                else:
                    raise ConfigError(f"unknown key [output] {key}")
            continue
        if section == "runtime":
            for key, raw in parser.items(section):
                if key == "threads":
                    cfg.threads = int(raw)
                else:
                    raise ConfigError(f"unknown key [runtime] {key}")
            continue
        if section not in targets:
            raise ConfigError(f"unknown config section [{section}]")
        target = targets[section]
        allowed = _allowed_keys(section, target)
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown key [{section}] {key}")
            try:
                setattr(target, key, _parse_value(raw, getattr(target, key)))
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return cfg


def write_effective_config(cfg: RunConfig, path: str):
    parser = configparser.ConfigParser()
    for section, target in _section_targets(cfg).items():
        parser[section] = {}
        for key in _allowed_keys(section, target):
            value = getattr(target, key)
            if isinstance(value, tuple):
                parser[section][key] = ", ".join(repr(v) for v in value)
            else:
                parser[section][key] = repr(value) if isinstance(value, float) else str(value)
    parser["output"] = {"dir": cfg.output_dir}
    parser["runtime"] = {"threads": str(cfg.threads)}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def model_config_kwargs(section: ModelSection, vocab_size: int) -> dict:
    kwargs = dataclasses.asdict(section)
    if kwargs.pop("vocab_size") == 0:
        kwargs["vocab_size"] = vocab_size
    else:
        kwargs["vocab_size"] = section.vocab_size
    return kwargs
