"""Resource-block scheduling: radio environment, baseline schedulers and a DDPG learner."""

from .allocation import Allocation, postprocess
from .config import RunConfig
from .env import EnvConfig, reset_episode
from .metrics import RewardWeights
from .schedulers import SchedulerKind

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "EnvConfig",
    "RewardWeights",
    "RunConfig",
    "SchedulerKind",
    "postprocess",
    "reset_episode",
]
