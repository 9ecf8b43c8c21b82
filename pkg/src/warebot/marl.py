"""Independent Q-tables for agents sharing a warehouse floor with moving humans."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import MultiAgentEnv, Reason
from .metrics import TrainReport
from .tabular import QTable, Schedules, epsilon_greedy_action, greedy_action, q_update

MULTI_SCHEDULES = Schedules(epsilon_init=1.0, epsilon_floor=0.05, epsilon_decay=0.97)


@dataclass
class AgentLearner:
    id: int
    table: QTable
    epsilon: float = 1.0
    alpha: float = 0.03


def train_multi(env: MultiAgentEnv, schedules: Schedules = MULTI_SCHEDULES, episodes: int = 100,
                rng: np.random.Generator | None = None) -> tuple[list[AgentLearner], TrainReport]:
    """Each agent learns from its own transitions only; the joint move is resolved by the env.

    The report holds one row per agent per episode (``agent_id`` 1-based);
    ``steps`` is the episode length, shared by both agents' rows.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    learners = [AgentLearner(i, QTable(env.n_states)) for i in range(env.n_agents)]
    report = TrainReport()
    for episode in range(episodes):
        for ag in learners:
            ag.epsilon = schedules.epsilon(episode)
            ag.alpha = schedules.alpha(episode)
        env.reset()
        totals = [0.0] * env.n_agents
        while not env.done:
            states = env.state_indices()
            active = [slot.active for slot in env.agents]
            actions = [
                epsilon_greedy_action(ag.table[s], ag.epsilon, rng) if on else None
                for ag, s, on in zip(learners, states, active)
            ]
            outcomes = env.step(actions, rng)
            next_states = env.state_indices()
            for ag, s, a, on, out, s_next in zip(learners, states, actions, active, outcomes, next_states):
                if not on:
                    continue
                q_update(ag.table, s, a, out.reward, s_next, out.absorbing, schedules.gamma, ag.alpha)
                totals[ag.id] += out.reward
        for ag in learners:
            report.add(episode=episode + 1, reward=totals[ag.id], steps=env.steps_taken,
                       win=int(env.agents[ag.id].reason is Reason.GOAL),
                       epsilon=ag.epsilon, alpha=ag.alpha, agent_id=ag.id + 1)
    return learners, report


@dataclass
class MultiEvalSummary:
    trials: int
    success: list[float] = field(default_factory=list)
    collision: list[float] = field(default_factory=list)
    mean_agent_steps: list[float] = field(default_factory=list)
    mean_combined_steps: float | None = None
    mean_episode_steps: float | None = None


def evaluate_multi(learners: list[AgentLearner], env: MultiAgentEnv, trials: int = 1,
                   freeze_humans: bool = False, rng: np.random.Generator | None = None) -> MultiEvalSummary:
    """Greedy joint rollouts.

    ``mean_agent_steps[i]`` counts the moves agent ``i`` made before it
    stopped; the combined figure sums those over agents.
    """
    if trials <= 0:
        return MultiEvalSummary(trials=0)
    if rng is None:
        rng = np.random.default_rng()
    n = env.n_agents
    success = np.zeros(n)
    collision = np.zeros(n)
    agent_steps = np.zeros(n)
    episode_steps = 0.0
    moving = env.humans_move
    env.humans_move = not freeze_humans
    try:
        for _ in range(trials):
            env.reset()
            stopped_at = [0] * n
            while not env.done:
                actions = [
                    greedy_action(ag.table[s]) if slot.active else None
                    for ag, s, slot in zip(learners, env.state_indices(), env.agents)
                ]
                was_active = [slot.active for slot in env.agents]
                env.step(actions, rng)
                for i, slot in enumerate(env.agents):
                    if was_active[i]:
                        stopped_at[i] = env.steps_taken
            for i, slot in enumerate(env.agents):
                success[i] += slot.reason is Reason.GOAL
                collision[i] += slot.reason is Reason.COLLISION
            agent_steps += stopped_at
            episode_steps += env.steps_taken
    finally:
        env.humans_move = moving
    return MultiEvalSummary(
        trials=trials,
        success=(success / trials).tolist(),
        collision=(collision / trials).tolist(),
        mean_agent_steps=(agent_steps / trials).tolist(),
        mean_combined_steps=float(agent_steps.sum() / trials),
        mean_episode_steps=episode_steps / trials,
    )


def save_tables(learners: list[AgentLearner], directory: str | Path) -> list[Path]:
    """Write ``qtable_agent<i>.csv`` (1-based) for every learner."""
    directory = Path(directory)
    paths = []
    for ag in learners:
        path = directory / f"qtable_agent{ag.id + 1}.csv"
        ag.table.save(path)
        paths.append(path)
    return paths


def load_tables(directory: str | Path, n_agents: int = 2) -> list[AgentLearner]:
    directory = Path(directory)
    return [AgentLearner(i, QTable.load(directory / f"qtable_agent{i + 1}.csv")) for i in range(n_agents)]
