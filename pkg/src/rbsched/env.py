"""Discrete-time multi-user radio environment.

Users move on a unit grid around a base station at the origin, see a
block-fading Rayleigh channel with ``min(1, 1/d)`` path loss and spawn jobs
(resource-block requests with a deadline).  Each step the scheduler hands out
an integer number of blocks per user; blocks are consumed by that user's
jobs earliest-deadline first.

The functions below mutate an :class:`EnvState` in place.  The order used by
the harness for one step is::

    generate_jobs -> step_mobility -> update_channel -> observe
    -> (scheduler) -> apply_allocation -> advance_time
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import seeding


class ConfigError(ValueError):
    """Invalid configuration."""


class AllocationError(ValueError):
    """An allocation broke the block budget or a per-user demand cap."""


class ProfileLabel(str, enum.Enum):
    NORMAL = "Normal"
    HIGH_PACKET_RATE = "HighPacketRate"
    LOW_LATENCY = "LowLatency"
    EMERGENCY_VEHICLE = "EmergencyVehicle"


class CapacityMode(str, enum.Enum):
    PER_BLOCK = "PerBlock"
    PER_SERVED_USER = "PerServedUser"
    LITERAL = "Literal"


class LogBase(str, enum.Enum):
    LOG2 = "Log2"
    LN = "Ln"


@dataclass(frozen=True)
class UserProfile:
    label: ProfileLabel
    delay_init: int
    max_job_size: int

    def __post_init__(self):
        object.__setattr__(self, "label", ProfileLabel(self.label))
        if self.delay_init < 1 or self.max_job_size < 1:
            raise ConfigError(f"profile {self.label.value}: delay_init and max_job_size must be >= 1")

    @property
    def is_ev(self) -> bool:
        return self.label is ProfileLabel.EMERGENCY_VEHICLE


# (delay in steps, max job size in blocks)
PROFILE_TABLE = {
    ProfileLabel.NORMAL: UserProfile(ProfileLabel.NORMAL, 20, 30),
    ProfileLabel.HIGH_PACKET_RATE: UserProfile(ProfileLabel.HIGH_PACKET_RATE, 20, 40),
    ProfileLabel.LOW_LATENCY: UserProfile(ProfileLabel.LOW_LATENCY, 2, 8),
    ProfileLabel.EMERGENCY_VEHICLE: UserProfile(ProfileLabel.EMERGENCY_VEHICLE, 1, 16),
}


def default_profiles() -> list[UserProfile]:
    """Five normal users, two high-packet-rate, two low-latency, one EV (last)."""
    counts = [
        (ProfileLabel.NORMAL, 5),
        (ProfileLabel.HIGH_PACKET_RATE, 2),
        (ProfileLabel.LOW_LATENCY, 2),
        (ProfileLabel.EMERGENCY_VEHICLE, 1),
    ]
    return [PROFILE_TABLE[label] for label, n in counts for _ in range(n)]


@dataclass
class EnvConfig:
    num_resources: int = 16
    num_users: int = 10
    profiles: list[UserProfile] = field(default_factory=default_profiles)
    p_job: float = 0.2
    snr_db: float = 13.0
    rayleigh_scale: float = 1.0
    placement_halfwidth: float = 10.0
    steps_per_episode: int = 50
    persist_direction_prob: float = 0.98
    capacity_mode: CapacityMode = CapacityMode.PER_BLOCK
    log_base: LogBase = LogBase.LOG2

    def __post_init__(self):
        self.capacity_mode = CapacityMode(self.capacity_mode)
        self.log_base = LogBase(self.log_base)

    def validate(self) -> None:
        if self.num_resources < 1:
            raise ConfigError("num_resources must be >= 1")
        if self.num_users < 1:
            raise ConfigError("num_users must be >= 1")
        if len(self.profiles) != self.num_users:
            raise ConfigError(
                f"got {len(self.profiles)} profiles for {self.num_users} users"
            )
        if not 0.0 <= self.p_job <= 1.0:
            raise ConfigError("p_job must lie in [0, 1]")
        if not 0.0 <= self.persist_direction_prob <= 1.0:
            raise ConfigError("persist_direction_prob must lie in [0, 1]")
        if self.rayleigh_scale <= 0:
            raise ConfigError("rayleigh_scale must be positive")
        if self.placement_halfwidth < 0:
            raise ConfigError("placement_halfwidth must be non-negative")
        if self.steps_per_episode < 0:
            raise ConfigError("steps_per_episode must be non-negative")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)


class Heading(enum.IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3


_STEP = {Heading.N: (0, 1), Heading.E: (1, 0), Heading.S: (0, -1), Heading.W: (-1, 0)}

# mobility decision codes
PERSIST, TURN_LEFT, TURN_RIGHT, STOP = 0, 1, 2, 3


@dataclass
class Job:
    id: int
    user: int
    remaining: int
    ttl: int
    initial_size: int


@dataclass
class UserState:
    profile: UserProfile
    position: tuple[int, int]
    heading: Heading
    moving: bool = True
    fading_amp: float = 0.0
    path_loss: float = 1.0
    power_fading: float = 0.0
    lifetime_scheduled: int = 0
    lifetime_requested: int = 0
    lifetime_timeout_blocks: int = 0


@dataclass
class EnvState:
    config: EnvConfig
    time: int
    users: list[UserState]
    queue: list[Job]
    rngs: dict[str, np.random.Generator]
    next_job_id: int = 0

    def jobs_of(self, user: int) -> list[Job]:
        """Jobs of one user in fill order (ascending ttl, then id)."""
        jobs = [j for j in self.queue if j.user == user]
        jobs.sort(key=lambda j: (j.ttl, j.id))
        return jobs

    def demands(self) -> np.ndarray:
        out = np.zeros(len(self.users), dtype=np.int64)
        for j in self.queue:
            out[j.user] += j.remaining
        return out


@dataclass(frozen=True)
class Observation:
    """Per-user features seen by a scheduler at one step.

    ``jobs[u]`` holds ``(job_id, remaining, ttl)`` tuples in fill order.
    ``min_ttl`` is 0 for users without jobs, as is ``inv_min_ttl``.
    """

    power_fading: np.ndarray
    demand: np.ndarray
    min_ttl: np.ndarray
    inv_min_ttl: np.ndarray
    packet_rate: np.ndarray
    timeout_blocks: np.ndarray
    is_ev: np.ndarray
    num_resources: int
    jobs: tuple[tuple[tuple[int, int, int], ...], ...]

    @property
    def num_users(self) -> int:
        return len(self.power_fading)

    def state_vector(self) -> np.ndarray:
        """Flat ``3U`` vector: (power fading, demand, inverse min ttl) per user."""
        return np.column_stack(
            [self.power_fading, self.demand.astype(np.float64), self.inv_min_ttl]
        ).ravel()


# ---------------------------------------------------------------------------


def path_loss(distance: float) -> float:
    if distance <= 1.0:
        return 1.0
    return 1.0 / distance


def packet_rates(users: list[UserState]) -> np.ndarray:
    """Lifetime scheduled / requested blocks per user; 0 before any request."""
    out = np.zeros(len(users))
    for u, us in enumerate(users):
        if us.lifetime_requested > 0:
            out[u] = us.lifetime_scheduled / us.lifetime_requested
    return out


def reset_episode(config: EnvConfig, seed: int) -> EnvState:
    config.validate()
    rngs = {name: seeding.stream(seed, name) for name in seeding.ENV_STREAMS}
    mob = rngs["env-mobility"]
    hw = int(np.floor(config.placement_halfwidth))
    xy = mob.integers(-hw, hw + 1, size=(config.num_users, 2))
    headings = mob.integers(0, 4, size=config.num_users)
    users = [
        UserState(
            profile=config.profiles[u],
            position=(int(xy[u, 0]), int(xy[u, 1])),
            heading=Heading(int(headings[u])),
        )
        for u in range(config.num_users)
    ]
    state = EnvState(config=config, time=0, users=users, queue=[], rngs=rngs)
    update_channel(state)
    return state


def draw_moves(rng: np.random.Generator, n: int, persist_prob: float) -> np.ndarray:
    """Mobility decision codes for ``n`` users (PERSIST/TURN_LEFT/TURN_RIGHT/STOP)."""
    keep = rng.random(n) < persist_prob
    alt = rng.integers(1, 4, size=n)
    return np.where(keep, PERSIST, alt)


def step_mobility(state: EnvState) -> np.ndarray:
    """Move every user one Manhattan step; returns the decision codes used."""
    codes = draw_moves(
        state.rngs["env-mobility"], len(state.users), state.config.persist_direction_prob
    )
    for us, code in zip(state.users, codes):
        if code == TURN_LEFT:
            us.heading = Heading((us.heading - 1) % 4)
            us.moving = True
        elif code == TURN_RIGHT:
            us.heading = Heading((us.heading + 1) % 4)
            us.moving = True
        elif code == STOP:
            us.moving = False
        if us.moving:
            dx, dy = _STEP[us.heading]
            us.position = (us.position[0] + dx, us.position[1] + dy)
    return codes


def update_channel(state: EnvState) -> None:
    amps = state.rngs["env-channel"].rayleigh(state.config.rayleigh_scale, size=len(state.users))
    for us, amp in zip(state.users, amps):
        us.fading_amp = float(amp)
        us.path_loss = path_loss(float(np.hypot(*us.position)))
        us.power_fading = us.fading_amp * us.path_loss


def generate_jobs(state: EnvState) -> list[Job]:
    rng = state.rngs["env-jobs"]
    n = len(state.users)
    spawn = rng.random(n) < state.config.p_job
    highs = np.array([us.profile.max_job_size for us in state.users])
    sizes = rng.integers(1, highs + 1)
    new = []
    for u in np.flatnonzero(spawn):
        us = state.users[u]
        size = int(sizes[u])
        job = Job(
            id=state.next_job_id,
            user=int(u),
            remaining=size,
            ttl=us.profile.delay_init,
            initial_size=size,
        )
        state.next_job_id += 1
        us.lifetime_requested += size
        state.queue.append(job)
        new.append(job)
    return new


def apply_allocation(state: EnvState, blocks, skip_jobs=frozenset()) -> np.ndarray:
    """Consume granted blocks per user, earliest deadline first.

    Jobs whose id is in ``skip_jobs`` receive nothing.  Returns the blocks
    consumed per user (equal to ``blocks`` for a valid allocation).
    """
    blocks = np.asarray(blocks, dtype=np.int64)
    n = len(state.users)
    if blocks.shape != (n,):
        raise AllocationError(f"allocation has shape {blocks.shape}, expected ({n},)")
    if (blocks < 0).any():
        raise AllocationError("negative block grant")
    if blocks.sum() > state.config.num_resources:
        raise AllocationError(
            f"allocated {blocks.sum()} blocks, only {state.config.num_resources} available"
        )
    per_user = [
        [j for j in state.jobs_of(u) if j.id not in skip_jobs] for u in range(n)
    ]
    for u, jobs in enumerate(per_user):
        demand = sum(j.remaining for j in jobs)
        if blocks[u] > demand:
            raise AllocationError(f"user {u} granted {blocks[u]} blocks, demand is {demand}")

    consumed = np.zeros(n, dtype=np.int64)
    for u, jobs in enumerate(per_user):
        left = int(blocks[u])
        for job in jobs:
            if left == 0:
                break
            take = min(left, job.remaining)
            job.remaining -= take
            left -= take
            consumed[u] += take
        state.users[u].lifetime_scheduled += int(consumed[u])
    return consumed


def advance_time(state: EnvState) -> list[Job]:
    """Drop finished jobs, tick deadlines, and return jobs that timed out."""
    live, failed = [], []
    for job in state.queue:
        if job.remaining == 0:
            continue
        job.ttl -= 1
        if job.ttl <= 0:
            failed.append(job)
            state.users[job.user].lifetime_timeout_blocks += job.remaining
        else:
            live.append(job)
    state.queue = live
    state.time += 1
    return failed


def observe(state: EnvState) -> Observation:
    n = len(state.users)
    demand = np.zeros(n, dtype=np.int64)
    min_ttl = np.zeros(n, dtype=np.int64)
    jobs = []
    for u in range(n):
        uj = state.jobs_of(u)
        jobs.append(tuple((j.id, j.remaining, j.ttl) for j in uj))
        if uj:
            demand[u] = sum(j.remaining for j in uj)
            min_ttl[u] = uj[0].ttl
    inv = np.zeros(n)
    has = min_ttl > 0
    inv[has] = 1.0 / min_ttl[has]
    return Observation(
        power_fading=np.array([us.power_fading for us in state.users]),
        demand=demand,
        min_ttl=min_ttl,
        inv_min_ttl=inv,
        packet_rate=packet_rates(state.users),
        timeout_blocks=np.array([us.lifetime_timeout_blocks for us in state.users], dtype=np.int64),
        is_ev=np.array([us.profile.is_ev for us in state.users]),
        num_resources=state.config.num_resources,
        jobs=tuple(jobs),
    )
