"""Per-step sub-metrics and the weighted sum-utility reward."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import CapacityMode, Job, LogBase, Observation, UserProfile, UserState, packet_rates


@dataclass(frozen=True)
class RewardWeights:
    w_capacity: float = 0.25
    w_timeouts: float = 1.0
    w_ev_timeouts: float = 1.0
    w_packet_rate: float = 0.25

    def __post_init__(self):
        for name in ("w_capacity", "w_timeouts", "w_ev_timeouts", "w_packet_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class StepMetrics:
    sum_capacity: float
    sum_timeouts: int
    ev_timeouts: int
    sum_packet_rate: float
    reward: float


def sum_capacity(
    obs: Observation,
    blocks,
    snr_db: float,
    mode: CapacityMode = CapacityMode.PER_BLOCK,
    base: LogBase = LogBase.LOG2,
) -> float:
    snr = obs.power_fading * 10.0 ** (snr_db / 10.0)
    per_user = np.log2(1.0 + snr) if LogBase(base) is LogBase.LOG2 else np.log(1.0 + snr)
    blocks = np.asarray(blocks)
    mode = CapacityMode(mode)
    if mode is CapacityMode.LITERAL:
        return float(per_user.sum())
    if mode is CapacityMode.PER_SERVED_USER:
        return float(per_user[blocks > 0].sum())
    return float((blocks * per_user).sum())


def sum_timeouts(failed: list[Job], profiles: list[UserProfile]) -> tuple[int, int]:
    total = sum(j.remaining for j in failed)
    ev = sum(j.remaining for j in failed if profiles[j.user].is_ev)
    return total, ev


def sum_packet_rate(users: list[UserState]) -> float:
    return float(packet_rates(users).sum())


def reward(
    capacity: float, timeouts: float, ev_timeouts: float, packet_rate: float, weights: RewardWeights
) -> float:
    return (
        weights.w_capacity * capacity
        - weights.w_timeouts * timeouts
        - weights.w_ev_timeouts * ev_timeouts
        + weights.w_packet_rate * packet_rate
    )


def step_metrics(
    capacity: float, failed: list[Job], users: list[UserState], weights: RewardWeights
) -> StepMetrics:
    total, ev = sum_timeouts(failed, [us.profile for us in users])
    rate = sum_packet_rate(users)
    return StepMetrics(
        sum_capacity=capacity,
        sum_timeouts=total,
        ev_timeouts=ev,
        sum_packet_rate=rate,
        reward=reward(capacity, total, ev, rate, weights),
    )
