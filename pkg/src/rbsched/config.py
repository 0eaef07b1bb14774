"""Run configuration and its JSON file format.

The file mirrors :class:`RunConfig` field for field.  Missing keys take the
defaults below; unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .agent import DdpgConfig
from .env import PROFILE_TABLE, ConfigError, EnvConfig, ProfileLabel, UserProfile
from .metrics import RewardWeights
from .schedulers import SchedulerKind


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ddpg: DdpgConfig = field(default_factory=DdpgConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    scheduler: SchedulerKind = SchedulerKind.DDPG
    episodes: int = 10_000
    seed: int = 0
    output_dir: str = "runs"
    ds_prio_weight: float = 0.5

    def __post_init__(self):
        self.scheduler = SchedulerKind(self.scheduler)

    def validate(self) -> None:
        try:
            self.scheduler = SchedulerKind(self.scheduler)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.env.validate()
        try:
            self.ddpg.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if not 0.0 <= self.ds_prio_weight <= 1.0:
            raise ConfigError("ds_prio_weight must lie in [0, 1]")


def _check_keys(section: str, data: dict, cls) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(unknown)}")


def _profile(item) -> UserProfile:
    if isinstance(item, str):
        try:
            return PROFILE_TABLE[ProfileLabel(item)]
        except ValueError:
            raise ConfigError(f"unknown profile label {item!r}") from None
    _check_keys("env.profiles[]", item, UserProfile)
    try:
        return UserProfile(**item)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad profile {item!r}: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    _check_keys("config", data, RunConfig)
    kwargs = dict(data)
    try:
        if "env" in kwargs:
            env = dict(kwargs["env"])
            _check_keys("env", env, EnvConfig)
            if "profiles" in env:
                env["profiles"] = [_profile(p) for p in env["profiles"]]
            kwargs["env"] = EnvConfig(**env)
        if "ddpg" in kwargs:
            _check_keys("ddpg", kwargs["ddpg"], DdpgConfig)
            kwargs["ddpg"] = DdpgConfig(**kwargs["ddpg"])
        if "weights" in kwargs:
            _check_keys("weights", kwargs["weights"], RewardWeights)
            kwargs["weights"] = RewardWeights(**kwargs["weights"])
        if "scheduler" in kwargs:
            kwargs["scheduler"] = SchedulerKind(kwargs["scheduler"])
        cfg = RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def to_dict(cfg: RunConfig) -> dict:
    env = dataclasses.asdict(cfg.env)
    env["profiles"] = [
        {"label": p.label.value, "delay_init": p.delay_init, "max_job_size": p.max_job_size}
        for p in cfg.env.profiles
    ]
    env["capacity_mode"] = cfg.env.capacity_mode.value
    env["log_base"] = cfg.env.log_base.value
    return {
        "env": env,
        "ddpg": dataclasses.asdict(cfg.ddpg),
        "weights": dataclasses.asdict(cfg.weights),
        "scheduler": cfg.scheduler.value,
        "episodes": cfg.episodes,
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "ds_prio_weight": cfg.ds_prio_weight,
    }


def dumps(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    return from_dict(data)


def config_hash(cfg: RunConfig) -> str:
    """Short digest of everything that affects results (not the output path)."""
    data = to_dict(cfg)
    del data["output_dir"]
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]
