from __future__ import annotations

from typing import NamedTuple

import numpy as np


class BufferNotReady(RuntimeError):
    """Raised when a sample is requested before ``batch_size`` experiences exist."""


class Experience(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray

    def __len__(self):
        return len(self.actions)


class ReplayBuffer:
    """Fixed-capacity FIFO ring of ``(S, a, r, S')`` tuples."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self._head = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, state, action, reward, next_state):
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def ready(self, batch_size: int) -> bool:
        return self._size >= batch_size

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if not self.ready(batch_size):
            raise BufferNotReady(f"buffer holds {self._size} < batch_size={batch_size}")
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])

    def contents(self) -> list[Experience]:
        """Stored experiences, oldest first."""
        start = self._head if self._size == self.capacity else 0
        order = [(start + k) % self.capacity for k in range(self._size)]
        return [Experience(self.states[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                           self.next_states[i].copy()) for i in order]
