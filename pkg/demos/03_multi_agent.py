"""
Two robots and two wandering people
===================================

Each robot keeps its own Q-table and learns only from its own moves.
People step at random; bumping into anything costs a robot -1 and
takes it out of the episode.
"""

import numpy as np

from warebot.env import MultiAgentEnv, default_map, serialize_world
from warebot.marl import evaluate_multi, train_multi
from warebot.metrics import moving_average
from warebot.oracle import bfs_shortest_path

grid = default_map("multi")
print(serialize_world(grid))

env = MultiAgentEnv(grid)
learners, report = train_multi(env, episodes=100, rng=np.random.default_rng(11))

steps = moving_average(report.series("steps", 1), 20)
print(f"mean episode length: first 20 episodes {steps[0]:.1f}, last 20 {steps[-1]:.1f}")
for agent in (1, 2):
    wins = report.series("win", agent)
    print(f"robot {agent} reached its destination in {sum(wins)} of {len(wins)} episodes")

# with people standing still the learned routes should be shortest paths
summary = evaluate_multi(learners, env, freeze_humans=True, rng=np.random.default_rng(0))
optima = [bfs_shortest_path(grid, s, d) for s, d in zip(grid.agent_starts, grid.destinations)]
print("frozen people: success", summary.success, "moves", summary.mean_agent_steps, "optimal", optima)

# and how often they still make it while people move
summary = evaluate_multi(learners, env, trials=200, rng=np.random.default_rng(1))
print("moving people: success", summary.success, "collisions", summary.collision)
