"""Proportional prioritised experience replay over a fixed-size ring."""

from __future__ import annotations

import numpy as np

from . import _kernels


class BufferNotReady(RuntimeError):
    """Raised when sampling from a buffer that holds too few experiences."""


class ReplayBuffer:
    """Ring buffer of ``(state, action, reward)`` with sum-tree sampling.

    New entries get the largest priority currently stored (1 when empty).
    Entry ``i`` is drawn with probability ``p_i**alpha / sum(p**alpha)``,
    with replacement.  No importance-sampling weights are produced.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 alpha: float = 0.6, priority_floor: float = 1e-6):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.alpha = float(alpha)
        self.priority_floor = float(priority_floor)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.priorities = np.zeros(capacity)
        tree_cap = 1
        while tree_cap < capacity:
            tree_cap *= 2
        self._tree = np.zeros(2 * tree_cap)
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def _set_priority(self, idx: np.ndarray, prio: np.ndarray) -> None:
        self.priorities[idx] = prio
        _kernels.tree_update(self._tree, idx.astype(np.int64), prio**self.alpha)

    def push(self, state, action, reward: float) -> int:
        prio = self.priorities[: self.size].max() if self.size else 1.0
        i = self._pos
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self._set_priority(np.array([i]), np.array([prio]))
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def probabilities(self) -> np.ndarray:
        w = self.priorities[: self.size] ** self.alpha
        return w / w.sum()

    def sample(self, batch_size: int, rng: np.random.Generator, min_size: int | None = None):
        """Draw ``batch_size`` indices; returns ``(indices, states, actions, rewards)``.

        The buffer must hold at least ``min_size`` entries (default
        ``batch_size``).
        """
        need = batch_size if min_size is None else min_size
        if self.size == 0 or self.size < need:
            raise BufferNotReady(f"buffer holds {self.size} experiences, need {need}")
        targets = rng.random(batch_size) * self._tree[1]
        idx = _kernels.tree_sample(self._tree, targets, self.size)
        return idx, self.states[idx], self.actions[idx], self.rewards[idx]

    def update_priorities(self, idx, errors) -> None:
        prio = np.abs(np.asarray(errors, dtype=np.float64)) + self.priority_floor
        self._set_priority(np.asarray(idx, dtype=np.int64), prio)
