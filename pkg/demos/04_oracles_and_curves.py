"""
Checking learners against exact answers
=======================================

Breadth-first search gives shortest paths, value iteration gives the
exact action values. A learner that explores at random long enough
should land on the same numbers.
"""

import sys
from pathlib import Path

import numpy as np

from warebot.env import NavEnv, parse_world
from warebot.metrics import moving_average, render_line_plot, win_rate_series
from warebot.oracle import bfs_shortest_path, model_from_env, policy_rollout, value_iteration
from warebot.tabular import explore_q

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-out/oracles")
out.mkdir(parents=True, exist_ok=True)

env = NavEnv(parse_world("S...\n....\n....\n...D", "nav"))
model = model_from_env(env, gamma=0.9)
q_star, policy = value_iteration(model)
path, _ = policy_rollout(model, policy)
print("BFS length", bfs_shortest_path(env.map, env.start, env.destination),
      "| value-iteration rollout length", len(path) - 1)

# learn the same table from random moves and watch the gap shrink
rng = np.random.default_rng(0)
table, gaps = None, []
for _ in range(50):
    table = explore_q(env, 1000, alpha=0.1, gamma=0.9, rng=rng, table=table)
    gaps.append(float(np.abs(table.values[model.active] - q_star[model.active]).max()))
print(f"max |Q - Q*| after 50,000 random steps: {gaps[-1]:.2e}")
render_line_plot([("max |Q - Q*|", gaps)], out / "gap.svg", xlabel="thousand steps",
                 ylabel="gap", window=5)

# the two curve definitions used in every plot
print("moving average of [1, 2, 3, 4] with n=2:", moving_average([1, 2, 3, 4], 2))
print("running win rate of [1, 0, 1, 1]:", win_rate_series([1, 0, 1, 1]))
