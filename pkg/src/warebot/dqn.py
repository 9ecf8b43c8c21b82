"""Deep Q-learning for maze navigation: replay memory, targets and the training loop."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .env import N_ACTIONS, NavEnv, Position, Reason, StepOutcome, encode_nav_observation
from .metrics import TrainReport
from .neural import Mlp, Optimizer, backward, forward, mlp_init, predict
from .tabular import epsilon_greedy_action, greedy_action


class Experience(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity FIFO memory; once full, each push evicts the oldest entry."""

    def __init__(self, capacity: int = 1000, obs_dim: int | None = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._obs_dim = obs_dim
        self._size = 0
        self._head = 0  # physical slot of the oldest entry
        if obs_dim is not None:
            self._alloc(obs_dim)

    def _alloc(self, obs_dim: int) -> None:
        self._obs_dim = obs_dim
        self._states = np.zeros((self.capacity, obs_dim))
        self._next = np.zeros((self.capacity, obs_dim))
        self._actions = np.zeros(self.capacity, dtype=np.int64)
        self._rewards = np.zeros(self.capacity)
        self._terminal = np.zeros(self.capacity, dtype=bool)

    def __len__(self) -> int:
        return self._size

    def push(self, e: Experience) -> None:
        state = np.asarray(e.state, dtype=np.float64).ravel()
        if self._obs_dim is None:
            self._alloc(state.size)
        if state.size != self._obs_dim:
            raise ValueError(f"observation length {state.size} != {self._obs_dim}")
        if self._size < self.capacity:
            slot = (self._head + self._size) % self.capacity
            self._size += 1
        else:
            slot = self._head
            self._head = (self._head + 1) % self.capacity
        self._states[slot] = state
        self._next[slot] = np.asarray(e.next_state, dtype=np.float64).ravel()
        self._actions[slot] = int(e.action)
        self._rewards[slot] = float(e.reward)
        self._terminal[slot] = bool(e.terminal)

    def _slots(self, logical) -> np.ndarray:
        return (self._head + np.asarray(logical)) % self.capacity

    def _get(self, slot: int) -> Experience:
        return Experience(self._states[slot].copy(), int(self._actions[slot]), float(self._rewards[slot]),
                          self._next[slot].copy(), bool(self._terminal[slot]))

    def contents(self) -> list[Experience]:
        """All stored experiences, oldest first."""
        return [self._get(s) for s in self._slots(np.arange(self._size))]

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if batch > self._size:
            raise ValueError(f"cannot sample {batch} from a buffer of {self._size}")
        return self._slots(rng.choice(self._size, size=batch, replace=False))

    def sample(self, batch: int, rng: np.random.Generator) -> list[Experience]:
        """``batch`` distinct experiences drawn uniformly without replacement."""
        return [self._get(s) for s in self.sample_indices(batch, rng)]

    def sample_arrays(self, batch: int, rng: np.random.Generator):
        idx = self.sample_indices(batch, rng)
        return (self._states[idx], self._actions[idx], self._rewards[idx],
                self._next[idx], self._terminal[idx])


def replay_push(buffer: ReplayBuffer, e: Experience) -> None:
    buffer.push(e)


def replay_sample(buffer: ReplayBuffer, batch: int, rng: np.random.Generator) -> list[Experience]:
    return buffer.sample(batch, rng)


def compute_target(e: Experience, net: Mlp, gamma: float) -> float:
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if e.terminal:
        return float(e.reward)
    return float(e.reward) + gamma * float(np.max(predict(net, e.next_state)))


def batch_targets(net: Mlp, rewards, next_states, terminal, gamma: float) -> np.ndarray:
    """Vectorised :func:`compute_target` over a minibatch."""
    best_next = predict(net, next_states).max(axis=1)
    return np.where(terminal, rewards, rewards + gamma * best_next)


def epsilon_schedule(episode: int, init: float = 1.0, final: float = 0.1, decay: float = 0.99) -> float:
    if episode < 0:
        raise ValueError("episode must be >= 0")
    return max(final, init * decay ** episode)


@dataclass(frozen=True)
class DqnConfig:
    episodes: int = 500
    gamma: float = 0.90
    epsilon_init: float = 1.0
    epsilon_final: float = 0.1
    epsilon_decay: float = 0.99
    batch_size: int = 32
    learning_rate: float = 0.0025
    replay_capacity: int = 1000
    hidden: tuple[int, ...] | None = None  # None: two layers as wide as the input
    early_stop: bool = True
    early_stop_window: int = 10

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon_final <= self.epsilon_init <= 1.0:
            raise ValueError("need 0 <= epsilon_final <= epsilon_init <= 1")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay_capacity must be at least batch_size")
        if self.early_stop_window < 1:
            raise ValueError("early_stop_window must be >= 1")

    def epsilon(self, episode: int) -> float:
        return epsilon_schedule(episode, self.epsilon_init, self.epsilon_final, self.epsilon_decay)

    def dims(self, obs_dim: int) -> list[int]:
        hidden = (obs_dim, obs_dim) if self.hidden is None else tuple(self.hidden)
        return [obs_dim, *hidden, N_ACTIONS]


def greedy_nav_rollout(net: Mlp, env: NavEnv, cap: int | None = None) -> tuple[list[Position], StepOutcome]:
    """Follow argmax Q from the start until the episode ends or ``cap`` steps pass."""
    cap = env.step_cap if cap is None else cap
    env.reset()
    path = [env.agent]
    outcome = None
    for _ in range(cap):
        outcome = env.step(greedy_action(predict(net, encode_nav_observation(env))))
        if outcome.next_state != path[-1]:
            path.append(outcome.next_state)
        if outcome.terminal:
            break
    return path, outcome


def train_nav_dqn(env: NavEnv, config: DqnConfig = DqnConfig(),
                  rng: np.random.Generator | None = None) -> tuple[Mlp, TrainReport]:
    """Train a Q-network on the maze with one Adam update per environment step.

    Updates start once the memory holds a full minibatch. With
    ``early_stop`` the run ends after ``early_stop_window`` straight wins
    provided a greedy rollout from the start also reaches the goal; the
    stopping episode is stored on the report.
    """
    if rng is None:
        rng = np.random.default_rng()
    obs_dim = env.map.n_cells
    net = mlp_init(config.dims(obs_dim), rng)
    opt = Optimizer(net, config.learning_rate)
    memory = ReplayBuffer(config.replay_capacity, obs_dim)
    report = TrainReport()
    probe = NavEnv(env.map, env.step_cap)
    streak = 0
    for episode in range(config.episodes):
        epsilon = config.epsilon(episode)
        env.reset()
        obs = encode_nav_observation(env)
        total, steps, losses = 0.0, 0, []
        while True:
            a = epsilon_greedy_action(predict(net, obs), epsilon, rng)
            outcome = env.step(a)
            next_obs = encode_nav_observation(env)
            memory.push(Experience(obs, a, outcome.reward, next_obs, outcome.absorbing))
            if len(memory) >= config.batch_size:
                s, acts, rews, s_next, term = memory.sample_arrays(config.batch_size, rng)
                y = batch_targets(net, rews, s_next, term, config.gamma)
                q, cache = forward(net, s)
                losses.append(float(np.mean((y - q[np.arange(len(acts)), acts]) ** 2)))
                opt.step(backward(net, cache, acts, y))
            total += outcome.reward
            steps += 1
            obs = next_obs
            if outcome.terminal:
                break
        win = int(outcome.reason is Reason.GOAL)
        report.add(episode=episode + 1, reward=total, steps=steps, win=win,
                   loss_mean=float(np.mean(losses)) if losses else None, epsilon=epsilon)
        streak = streak + 1 if win else 0
        if config.early_stop and streak >= config.early_stop_window:
            _, final = greedy_nav_rollout(net, probe)
            if final.reason is Reason.GOAL:
                report.early_stop_episode = episode + 1
                break
    return net, report
