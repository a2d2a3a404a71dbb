"""Shared training plumbing: transitions, the replay ring buffer, exploration
rules, and TD targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ReplayError(RuntimeError):
    pass


@dataclass
class Transition:
    obs: np.ndarray  # (n_agents, obs_dim)
    actions: np.ndarray  # (n_agents,) int
    rewards: np.ndarray  # (n_agents,) per-robot totals
    team_reward: float
    next_obs: np.ndarray  # (n_agents, obs_dim)
    done: bool

    @property
    def state(self) -> np.ndarray:
        """Joint state: concatenation of all learner observations."""
        return self.obs.reshape(-1)

    @property
    def next_state(self) -> np.ndarray:
        return self.next_obs.reshape(-1)


class ReplayBuffer:
    """FIFO ring with uniform with-replacement sampling."""

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ReplayError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._next] = tr
            self._next = (self._next + 1) % self.capacity

    def contents(self) -> list[Transition]:
        """Current contents oldest-first."""
        return self._items[self._next :] + self._items[: self._next]

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if not self._items:
            raise ReplayError("cannot sample from an empty buffer")
        if n < 1:
            raise ReplayError("sample size must be >= 1")
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[i] for i in idx]


def collate(batch: list[Transition]) -> dict[str, np.ndarray]:
    """Stack a list of transitions into batched arrays."""
    obs = np.stack([tr.obs for tr in batch])
    next_obs = np.stack([tr.next_obs for tr in batch])
    return {
        "obs": obs,  # (B, n, d)
        "next_obs": next_obs,
        "actions": np.stack([tr.actions for tr in batch]),  # (B, n)
        "rewards": np.stack([tr.rewards for tr in batch]),  # (B, n)
        "team": np.array([tr.team_reward for tr in batch]),  # (B,)
        "done": np.array([float(tr.done) for tr in batch]),  # (B,)
        "state": obs.reshape(len(batch), -1),
        "next_state": next_obs.reshape(len(batch), -1),
    }


def select_action_eps_greedy(q: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Uniform random action with probability eps, otherwise the argmax with
    lowest-index tie-breaking."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    if eps > 0.0 and float(rng.random()) < eps:
        return int(rng.integers(0, len(q)))
    return int(np.argmax(q))


def categorical_sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    u = float(rng.random())
    return int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, len(probs) - 1))


def td_target(r: float | np.ndarray, gamma: float, next_q_max: float | np.ndarray):
    """r + gamma * next_q_max; callers pass 0 for terminal transitions."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    return r + gamma * next_q_max


@dataclass
class Hyperparams:
    episodes: int = 30_000
    batch: int = 1024
    lr: float = 0.01
    gamma: float = 0.95
    hidden: int = 32
    tau: float = 0.01
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.6  # fraction of episodes over which eps anneals
    alpha_ent: float = 0.01  # entropy weight (attention critic variant)
    buffer_capacity: int = 100_000

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        for e in (self.eps_start, self.eps_end):
            if not 0.0 <= e <= 1.0:
                raise ValueError("eps must be in [0, 1]")
        if self.episodes < 1 or self.batch < 1 or self.hidden < 1:
            raise ValueError("episodes, batch, hidden must be >= 1")
        if self.lr <= 0 or self.buffer_capacity < 1:
            raise ValueError("lr must be > 0 and buffer_capacity >= 1")

    def epsilon(self, episode: int) -> float:
        horizon = max(1.0, self.eps_decay_frac * self.episodes)
        frac = min(1.0, episode / horizon)
        return self.eps_start + (self.eps_end - self.eps_start) * frac
