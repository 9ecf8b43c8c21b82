"""Tabular Q-learning for the storage task.

State is the agent's cell index ``row * width + col``; remaining capacities
are not part of the state.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import N_ACTIONS, MaxSpaceEnv, NavEnv, Position, Reason, StepOutcome
from .metrics import TrainReport


class QTable:
    def __init__(self, n_states: int, n_actions: int = N_ACTIONS, values: np.ndarray | None = None):
        if values is None:
            values = np.zeros((n_states, n_actions), dtype=np.float64)
        values = np.array(values, dtype=np.float64)
        if values.shape != (n_states, n_actions):
            raise ValueError(f"values shape {values.shape} != ({n_states}, {n_actions})")
        if not np.all(np.isfinite(values)):
            raise ValueError("Q-table entries must be finite")
        self._values = values

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_states(self) -> int:
        return self._values.shape[0]

    @property
    def n_actions(self) -> int:
        return self._values.shape[1]

    def __getitem__(self, key):
        return self._values[key]

    def __setitem__(self, key, value):
        self._values[key] = value

    def copy(self) -> QTable:
        return QTable(self.n_states, self.n_actions, self._values.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        return self._values.shape == other._values.shape and bool(np.array_equal(self._values, other._values))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["state", "up", "down", "left", "right"])
        for s, row in enumerate(self._values):
            writer.writerow([s, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_csv().encode("utf-8"))

    @classmethod
    def from_csv(cls, text: str) -> QTable:
        rows = list(csv.reader(io.StringIO(text)))
        body = [r for r in rows[1:] if r]
        for expect, r in enumerate(body):
            if int(r[0]) != expect:
                raise ValueError(f"row {expect} carries state index {r[0]}")
        values = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64)
        return cls(values.shape[0], values.shape[1], values)

    @classmethod
    def load(cls, path: str | Path) -> QTable:
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Schedules:
    epsilon_init: float = 1.0
    epsilon_floor: float = 0.05
    epsilon_decay: float = 0.995
    alpha_init: float = 0.03
    alpha_slope: float = 0.002
    alpha_floor: float = 0.001
    gamma: float = 0.90

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon_floor <= self.epsilon_init <= 1.0:
            raise ValueError("need 0 <= epsilon_floor <= epsilon_init <= 1")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must lie in (0, 1]")
        if not 0.0 <= self.alpha_floor <= self.alpha_init <= 1.0:
            raise ValueError("need 0 <= alpha_floor <= alpha_init <= 1")
        if self.alpha_slope < 0:
            raise ValueError("alpha_slope must be non-negative")

    def epsilon(self, episode: int) -> float:
        return max(self.epsilon_floor, self.epsilon_init * self.epsilon_decay ** episode)

    def alpha(self, episode: int) -> float:
        return alpha_schedule(episode, self.alpha_init, self.alpha_slope, self.alpha_floor)


# The storage task uses a larger, slower-decaying update factor than the
# multi-agent default; with 0.03 the -1 step costs swamp the learning signal.
MAXSPACE_SCHEDULES = Schedules(alpha_init=0.5, alpha_slope=0.0005, alpha_floor=0.01)


def alpha_schedule(episode: int, alpha_init: float = 0.03, alpha_slope: float = 0.002,
                   alpha_floor: float = 0.001) -> float:
    """Update factor for ``episode`` (0-based): linear decay clipped at the floor."""
    if episode < 0:
        raise ValueError("episode must be >= 0")
    return max(alpha_floor, alpha_init - alpha_slope * episode)


def greedy_action(q_values) -> int:
    # np.argmax returns the first maximum, i.e. the lowest action index on ties
    return int(np.argmax(q_values))


def epsilon_greedy_action(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform random action when a uniform draw falls below ``epsilon``, else greedy."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    rho = rng.random()
    if epsilon > rho:
        return int(rng.integers(len(q_values)))
    return greedy_action(q_values)


def q_update(table: QTable, s: int, a: int, r: float, s_next: int, terminal: bool,
             gamma: float, alpha: float) -> float:
    """One temporal-difference step toward ``r + gamma * max Q(s_next)``; returns the new entry."""
    if not (math.isfinite(r) and math.isfinite(gamma) and math.isfinite(alpha)):
        raise ValueError("q_update inputs must be finite")
    target = r if terminal else r + gamma * float(np.max(table[s_next]))
    predict = table[s, a]
    table[s, a] = predict + alpha * (target - predict)
    return float(table[s, a])


def run_tabular(env, schedules: Schedules, episodes: int, rng: np.random.Generator,
                table: QTable | None = None, is_win=None) -> tuple[QTable, TrainReport]:
    """Shared single-agent Q-learning loop.

    Works with any environment offering ``reset``, ``step``, ``state_index``
    and ``n_states``. ``epsilon`` and ``alpha`` follow the episode-indexed
    schedules. Step-limit cuts bootstrap like ordinary steps because the
    cell they stop in is not an end state.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if table is None:
        table = QTable(env.n_states)
    if is_win is None:
        def is_win(outcome: StepOutcome) -> bool:
            return outcome.reason is Reason.GOAL
    report = TrainReport()
    for episode in range(episodes):
        epsilon = schedules.epsilon(episode)
        alpha = schedules.alpha(episode)
        env.reset()
        s = env.state_index()
        total = 0.0
        steps = 0
        while True:
            a = epsilon_greedy_action(table[s], epsilon, rng)
            outcome = env.step(a)
            s_next = env.state_index()
            q_update(table, s, a, outcome.reward, s_next, outcome.absorbing, schedules.gamma, alpha)
            total += outcome.reward
            steps += 1
            s = s_next
            if outcome.terminal:
                break
        report.add(episode=episode + 1, reward=total, steps=steps, win=int(is_win(outcome)),
                   epsilon=epsilon, alpha=alpha)
    return table, report


def train_maxspace(env: MaxSpaceEnv, schedules: Schedules = MAXSPACE_SCHEDULES, episodes: int = 1000,
                   rng: np.random.Generator | None = None) -> tuple[QTable, TrainReport]:
    """Q-learning on the storage map; a win is an episode ending at the largest storage cell."""
    if rng is None:
        rng = np.random.default_rng()
    return run_tabular(env, schedules, episodes, rng, is_win=env.is_win)


def train_nav_tabular(env: NavEnv, schedules: Schedules, episodes: int,
                      rng: np.random.Generator) -> tuple[QTable, TrainReport]:
    return run_tabular(env, schedules, episodes, rng)


def greedy_rollout(table: QTable, env, cap: int | None = None) -> tuple[list[Position], StepOutcome]:
    """Follow the greedy policy from ``reset`` for at most ``cap`` steps.

    Returns the visited cells (start included) and the last outcome.
    """
    cap = env.step_cap if cap is None else cap
    if cap < 1:
        raise ValueError("cap must be >= 1")
    env.reset()
    path = [env.agent]
    outcome = None
    for _ in range(cap):
        outcome = env.step(greedy_action(table[env.state_index()]))
        if outcome.next_state != path[-1]:
            path.append(outcome.next_state)
        if outcome.terminal:
            break
    return path, outcome


def explore_q(env, steps: int, alpha: float, gamma: float, rng: np.random.Generator,
              table: QTable | None = None) -> QTable:
    """Q-learning under a uniformly random behaviour policy for a fixed number of steps.

    Episodes restart from ``reset`` whenever one ends; ``alpha`` stays constant.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if table is None:
        table = QTable(env.n_states)
    env.reset()
    s = env.state_index()
    for _ in range(steps):
        a = int(rng.integers(N_ACTIONS))
        outcome = env.step(a)
        s_next = env.state_index()
        q_update(table, s, a, outcome.reward, s_next, outcome.absorbing, gamma, alpha)
        if outcome.terminal:
            env.reset()
            s_next = env.state_index()
        s = s_next
    return table
