"""Ground truth for tests: BFS path lengths and value iteration.

Nothing in here is used by the trainers. The MDP handed to value iteration is
tabulated by driving the environment's own ``step`` from every cell, so the
oracle cannot drift from the dynamics it checks.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .env import (
    N_ACTIONS,
    GridMap,
    MapKind,
    MaxSpaceEnv,
    NavEnv,
    Position,
    Reason,
)


def bfs_shortest_path(grid: GridMap, start: Position, goal: Position) -> int | None:
    """Fewest 4-adjacent moves from ``start`` to ``goal``, or ``None`` if unreachable.

    Intermediate cells must be passable; ``goal`` itself only needs to be a
    non-wall cell (storage cells end an episode but can be entered).
    """
    start, goal = Position(*start), Position(*goal)
    if not grid.passable(start):
        raise ValueError(f"start {tuple(start)} is not an open cell")
    if not (grid.passable(goal) or goal in grid.capacity_cells()):
        raise ValueError(f"goal {tuple(goal)} is not an open cell")
    dist = {start: 0}
    queue = deque([start])
    while queue:
        pos = queue.popleft()
        if pos == goal:
            return dist[pos]
        for a in range(N_ACTIONS):
            nxt = pos.moved(a)
            if nxt in dist:
                continue
            if nxt == goal or grid.passable(nxt):
                dist[nxt] = dist[pos] + 1
                queue.append(nxt)
    return None


@dataclass
class MdpModel:
    """Deterministic tabular MDP over cell indices.

    ``next_state[s, a]`` and ``reward[s, a]`` describe one step; ``absorbing``
    marks transitions that end the episode. ``active`` masks the states an
    agent can act from; inactive rows stay zero in every table.
    """

    next_state: np.ndarray
    reward: np.ndarray
    absorbing: np.ndarray
    active: np.ndarray
    gamma: float
    start: int

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]


def model_from_env(env: NavEnv | MaxSpaceEnv, gamma: float = 0.9) -> MdpModel:
    """Tabulate a single-agent environment by stepping it from every cell."""
    grid = env.map
    n = grid.n_cells
    next_state = np.tile(np.arange(n)[:, None], (1, N_ACTIONS))
    reward = np.zeros((n, N_ACTIONS))
    absorbing = np.ones((n, N_ACTIONS), dtype=bool)
    active = np.zeros(n, dtype=bool)
    probe = type(env)(grid, step_cap=n * n + 1)
    for s in range(n):
        pos = grid.position(s)
        if not grid.passable(pos) or (grid.kind is MapKind.NAV and pos == grid.destination):
            continue
        active[s] = True
        for a in range(N_ACTIONS):
            probe.reset()
            probe.agent = pos
            out = probe.step(a)
            next_state[s, a] = grid.index(out.next_state)
            reward[s, a] = out.reward
            absorbing[s, a] = out.reason in (Reason.GOAL, Reason.COLLISION)
    return MdpModel(next_state, reward, absorbing, active, float(gamma), grid.index(grid.start))


def value_iteration(model: MdpModel, tol: float = 1e-10, max_iter: int = 100_000):
    """Iterate the Bellman optimality backup to a fixed point.

    Returns ``(q_star, policy)``; the policy is the argmax of ``q_star`` with
    ties going to the lowest action index.
    """
    if not 0.0 <= model.gamma < 1.0:
        raise ValueError(f"value iteration needs gamma in [0, 1), got {model.gamma}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = np.zeros_like(model.reward, dtype=np.float64)
    cont = (~model.absorbing) & model.active[:, None]
    for _ in range(max_iter):
        new = model.reward + model.gamma * np.where(cont, q.max(axis=1)[model.next_state], 0.0)
        new[~model.active] = 0.0
        delta = np.max(np.abs(new - q))
        q = new
        if delta < tol:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    return q, np.argmax(q, axis=1)


def bellman_residual(model: MdpModel, q: np.ndarray) -> float:
    backup = model.reward + model.gamma * np.where(model.absorbing, 0.0, q.max(axis=1)[model.next_state])
    return float(np.max(np.abs(backup - q)[model.active]))


def policy_rollout(model: MdpModel, policy: np.ndarray, cap: int | None = None) -> tuple[list[int], bool]:
    """Follow ``policy`` from the start state; returns (visited states, ended absorbing)."""
    cap = model.n_states if cap is None else cap
    s = model.start
    path = [s]
    for _ in range(cap):
        a = int(policy[s])
        nxt = int(model.next_state[s, a])
        if nxt != s:
            path.append(nxt)
        if model.absorbing[s, a]:
            return path, True
        s = nxt
    return path, False
