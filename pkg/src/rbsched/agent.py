"""DDPG-style learning scheduler.

The critic regresses the immediate reward of a ``(state, action)`` pair (no
successor state, no target networks) and the actor follows the critic's
action gradient.  Both losses are batch sums.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn, seeding
from .allocation import Allocation, postprocess
from .env import Observation
from .replay import ReplayBuffer

DEFAULT_HIDDEN = [300, 300, 300, 300, 400, 300]


@dataclass
class DdpgConfig:
    actor_hidden: list[int] = field(default_factory=lambda: list(DEFAULT_HIDDEN))
    critic_hidden: list[int] = field(default_factory=lambda: list(DEFAULT_HIDDEN))
    actor_lr: float = 1e-5
    critic_lr: float = 1e-4
    batch_size: int = 128
    buffer_capacity: int = 100_000
    warmup_experiences: int = 100
    sigma_e_init: float = 1.5
    sigma_decay_fraction: float = 0.5
    alpha: float = 0.6
    priority_floor: float = 1e-6
    # None: follow the run's episode count
    total_episodes: int | None = None

    def validate(self) -> None:
        if self.batch_size < 1 or self.buffer_capacity < 1 or self.warmup_experiences < 1:
            raise ValueError("batch_size, buffer_capacity and warmup_experiences must be positive")
        if not 0.0 < self.sigma_decay_fraction <= 1.0:
            raise ValueError("sigma_decay_fraction must lie in (0, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    def actor_dims(self, num_users: int) -> list[int]:
        return [3 * num_users, *self.actor_hidden, num_users]

    def critic_dims(self, num_users: int) -> list[int]:
        return [4 * num_users, *self.critic_hidden, 1]


def sigma_schedule(episode: int, sigma_init: float, decay_fraction: float, total_episodes: int) -> float:
    """Linear decay from ``sigma_init`` to 0 at ``decay_fraction`` of training."""
    horizon = decay_fraction * total_episodes
    if horizon <= 0:
        return 0.0
    return sigma_init * max(0.0, 1.0 - episode / horizon)


def actor_act(actor: nn.Mlp, state) -> np.ndarray:
    out, _ = nn.forward(actor, state)
    return out


def explore(action, sigma_e: float, rng: np.random.Generator) -> np.ndarray:
    """Add ``sigma_e * U(-0.5, 0.5)`` noise, clip to [0, 1], renormalise."""
    action = np.asarray(action, dtype=np.float64)
    noise = rng.uniform(-0.5, 0.5, size=action.shape)
    if sigma_e == 0:
        return action.copy()
    x = np.clip(action + sigma_e * noise, 0.0, 1.0)
    total = x.sum()
    if total == 0:
        return np.full_like(action, 1.0 / action.size)
    return x / total


def critic_loss_grads(critic: nn.Mlp, states, actions, rewards):
    """``sum (r - Q(s, a))**2`` and its parameter gradients; also returns Q."""
    q, cache = nn.forward(critic, np.hstack([states, actions]))
    q = q[:, 0]
    err = rewards - q
    grads, _ = nn.backward(critic, cache, (-2.0 * err)[:, None])
    return float(err @ err), grads, q


def actor_loss_grads(actor: nn.Mlp, critic: nn.Mlp, states):
    """``-sum Q(s, mu(s))`` and its gradients w.r.t. the actor only."""
    mu, a_cache = nn.forward(actor, states)
    q, c_cache = nn.forward(critic, np.hstack([states, mu]))
    _, d_in = nn.backward(critic, c_cache, -np.ones_like(q))
    d_mu = d_in[:, states.shape[1]:]
    grads, _ = nn.backward(actor, a_cache, d_mu)
    return -float(q.sum()), grads


class DdpgAgent:
    def __init__(self, num_users: int, cfg: DdpgConfig, seed: int, total_episodes: int = 1):
        cfg.validate()
        self.num_users = num_users
        self.cfg = cfg
        self.seed = seed
        self.total_episodes = cfg.total_episodes or total_episodes
        init_rng = seeding.stream(seed, "agent-init")
        self.actor = nn.init_mlp(cfg.actor_dims(num_users), nn.SOFTMAX, init_rng)
        self.critic = nn.init_mlp(cfg.critic_dims(num_users), nn.IDENTITY, init_rng)
        self.actor_opt = nn.AdamState.zeros_like(self.actor.params(), cfg.actor_lr)
        self.critic_opt = nn.AdamState.zeros_like(self.critic.params(), cfg.critic_lr)
        self.explore_rng = seeding.stream(seed, "agent-explore")
        self.sample_rng = seeding.stream(seed, "agent-sample")
        self.buffer = ReplayBuffer(
            cfg.buffer_capacity, 3 * num_users, num_users, cfg.alpha, cfg.priority_floor
        )
        self.train_steps = 0

    def sigma(self, episode: int) -> float:
        return sigma_schedule(
            episode, self.cfg.sigma_e_init, self.cfg.sigma_decay_fraction, self.total_episodes
        )

    def schedule(self, obs: Observation, episode: int, training: bool):
        """One scheduling decision.

        Returns ``(allocation, stored_action)``; ``stored_action`` is the
        noisy share vector to push once the reward is known, or ``None``
        in evaluation mode.
        """
        state = obs.state_vector()
        action = actor_act(self.actor, state)
        if not training:
            return postprocess(action, obs.demand, obs.num_resources, eval_mode=True), None
        noisy = explore(action, self.sigma(episode), self.explore_rng)
        return postprocess(noisy, obs.demand, obs.num_resources, eval_mode=False), noisy

    def record(self, state, action, reward: float):
        """Store an experience and run one learning step once warm.

        Returns ``(critic_loss, actor_loss)`` when a learning step ran.
        """
        self.buffer.push(state, action, reward)
        if len(self.buffer) < self.cfg.warmup_experiences:
            return None
        idx, s, a, r = self.buffer.sample(
            self.cfg.batch_size, self.sample_rng, min_size=self.cfg.warmup_experiences
        )
        return self.train_step(idx, s, a, r)

    def train_step(self, idx, states, actions, rewards):
        c_loss, c_grads, q = critic_loss_grads(self.critic, states, actions, rewards)
        params, self.critic_opt = nn.adam_step(self.critic.params(), c_grads, self.critic_opt)
        self.critic.set_params(params)

        a_loss, a_grads = actor_loss_grads(self.actor, self.critic, states)
        params, self.actor_opt = nn.adam_step(self.actor.params(), a_grads, self.actor_opt)
        self.actor.set_params(params)

        self.buffer.update_priorities(idx, rewards - q)
        self.train_steps += 1
        return c_loss, a_loss

    # -- persistence -------------------------------------------------------

    def to_dict(self, metadata: dict | None = None) -> dict:
        return {
            "format": "rbsched-model/1",
            "metadata": {"seed": self.seed, **(metadata or {})},
            "num_users": self.num_users,
            "ddpg": asdict(self.cfg),
            "actor": nn.to_dict(self.actor),
            "critic": nn.to_dict(self.critic),
        }

    def save(self, path, metadata: dict | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(metadata), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DdpgAgent":
        with open(path) as fh:
            data = json.load(fh)
        if data.get("format") != "rbsched-model/1":
            raise ValueError(f"{path}: not an rbsched model file")
        cfg = DdpgConfig(**data["ddpg"])
        agent = cls(int(data["num_users"]), cfg, int(data["metadata"]["seed"]))
        agent.actor = nn.from_dict(data["actor"])
        agent.critic = nn.from_dict(data["critic"])
        return agent


__all__ = [
    "Allocation",
    "DdpgAgent",
    "DdpgConfig",
    "actor_act",
    "actor_loss_grads",
    "critic_loss_grads",
    "explore",
    "postprocess",
    "sigma_schedule",
]
