"""Experiment configuration: one JSON file with flat per-module sections."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .mixers import MIXER_KINDS


@dataclass
class Config:
    """All run settings; every field has an overridable default."""

    env: dict
    mixer: str = "hgcn-mix"
    # model
    hyperedges: int = 32
    embed: int = 32
    agent_hidden: int = 64
    hypernet_hidden: int = 64
    # optimizer
    lr: float = 5e-4
    rms_decay: float = 0.99
    rms_eps: float = 1e-5
    clip_norm: float = 10.0
    # schedule
    eps_start: float = 1.0
    eps_end: float = 0.05
    anneal_steps: int = 50_000
    # training
    gamma: float = 0.99
    episodes: int = 20_000
    eval_interval: int = 200
    eval_episodes: int = 32
    buffer_capacity: int = 5000
    batch_size: int = 32
    train_every: int = 1
    target_interval: int = 200
    stop_on_success: bool = False
    seeds: list[int] = field(default_factory=lambda: [0])
    hyperedge_sweep: list[int] | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def require(cond, path, message):
            if not cond:
                raise ConfigError(f"{path}: {message}")

        require(isinstance(self.env, dict) and "name" in self.env,
                "env", "must be an object with a 'name' field")
        require(self.mixer in MIXER_KINDS, "mixer",
                f"must be one of {list(MIXER_KINDS)}")
        require(self.hyperedges >= 0, "model.hyperedges", "must be >= 0")
        for path, value in (("model.embed", self.embed),
                            ("model.agent_hidden", self.agent_hidden),
                            ("model.hypernet_hidden", self.hypernet_hidden)):
            require(value > 0, path, "must be positive")
        require(self.lr > 0, "optimizer.lr", "must be positive")
        require(0.0 < self.rms_decay < 1.0, "optimizer.decay", "must be in (0, 1)")
        require(self.rms_eps > 0, "optimizer.eps", "must be positive")
        require(self.clip_norm > 0, "optimizer.clip_norm", "must be positive")
        require(0.0 <= self.eps_end <= self.eps_start <= 1.0,
                "schedule", "needs 0 <= eps_end <= eps_start <= 1")
        require(self.anneal_steps >= 1, "schedule.anneal_steps", "must be >= 1")
        require(0.0 <= self.gamma < 1.0, "training.gamma", "must be in [0, 1)")
        for path, value in (("training.episodes", self.episodes),
                            ("training.eval_interval", self.eval_interval),
                            ("training.eval_episodes", self.eval_episodes),
                            ("training.buffer_capacity", self.buffer_capacity),
                            ("training.batch_size", self.batch_size),
                            ("training.train_every", self.train_every),
                            ("training.target_interval", self.target_interval)):
            require(value >= 1, path, "must be >= 1")
        require(self.batch_size <= self.buffer_capacity,
                "training.batch_size", "must not exceed buffer_capacity")
        require(len(self.seeds) > 0, "seeds", "must be non-empty")
        require(all(isinstance(s, int) for s in self.seeds),
                "seeds", "must be integers")
        if self.hyperedge_sweep is not None:
            require(len(self.hyperedge_sweep) > 0 and
                    all(isinstance(m, int) and m >= 0
                        for m in self.hyperedge_sweep),
                    "hyperedge_sweep", "must be non-empty non-negative ints")
        # zero learned hyperedges degenerates to the one-hot mixer
        if self.mixer == "hgcn-mix" and self.hyperedges == 0:
            self.mixer = "hgcn-mix-oh"

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        known_sections = {"env", "mixer", "model", "optimizer", "schedule",
                          "training", "seeds", "hyperedge_sweep"}
        unknown = set(data) - known_sections
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        sections = {
            "model": {"hyperedges": "hyperedges", "embed": "embed",
                      "agent_hidden": "agent_hidden",
                      "hypernet_hidden": "hypernet_hidden"},
            "optimizer": {"lr": "lr", "decay": "rms_decay", "eps": "rms_eps",
                          "clip_norm": "clip_norm"},
            "schedule": {"eps_start": "eps_start", "eps_end": "eps_end",
                         "anneal_steps": "anneal_steps"},
            "training": {"gamma": "gamma", "episodes": "episodes",
                         "eval_interval": "eval_interval",
                         "eval_episodes": "eval_episodes",
                         "buffer_capacity": "buffer_capacity",
                         "batch_size": "batch_size",
                         "train_every": "train_every",
                         "target_interval": "target_interval",
                         "stop_on_success": "stop_on_success"},
        }
        kwargs = {}
        if "env" in data:
            kwargs["env"] = data["env"]
        else:
            raise ConfigError("env: section is required")
        if "mixer" in data:
            kwargs["mixer"] = data["mixer"]
        if "seeds" in data:
            kwargs["seeds"] = data["seeds"]
        if "hyperedge_sweep" in data:
            kwargs["hyperedge_sweep"] = data["hyperedge_sweep"]
        for section, mapping in sections.items():
            body = data.get(section, {})
            if not isinstance(body, dict):
                raise ConfigError(f"{section}: must be an object")
            unknown = set(body) - set(mapping)
            if unknown:
                raise ConfigError(f"{section}: unknown fields {sorted(unknown)}")
            for key, attr in mapping.items():
                if key in body:
                    kwargs[attr] = body[key]
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "env": dict(self.env),
            "mixer": self.mixer,
            "model": {"hyperedges": self.hyperedges, "embed": self.embed,
                      "agent_hidden": self.agent_hidden,
                      "hypernet_hidden": self.hypernet_hidden},
            "optimizer": {"lr": self.lr, "decay": self.rms_decay,
                          "eps": self.rms_eps, "clip_norm": self.clip_norm},
            "schedule": {"eps_start": self.eps_start, "eps_end": self.eps_end,
                         "anneal_steps": self.anneal_steps},
            "training": {"gamma": self.gamma, "episodes": self.episodes,
                         "eval_interval": self.eval_interval,
                         "eval_episodes": self.eval_episodes,
                         "buffer_capacity": self.buffer_capacity,
                         "batch_size": self.batch_size,
                         "train_every": self.train_every,
                         "target_interval": self.target_interval,
                         "stop_on_success": self.stop_on_success},
            "seeds": list(self.seeds),
            **({"hyperedge_sweep": list(self.hyperedge_sweep)}
               if self.hyperedge_sweep is not None else {}),
        }

    def replace(self, **changes) -> "Config":
        """Copy with updated fields (re-validated)."""
        merged = {f: getattr(self, f) for f in self.__dataclass_fields__}
        merged["env"] = dict(merged["env"])
        merged["seeds"] = list(merged["seeds"])
        merged.update(changes)
        return Config(**merged)


def load_config(path) -> Config:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return Config.from_dict(data)
