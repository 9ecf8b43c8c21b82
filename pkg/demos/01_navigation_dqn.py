"""
Maze navigation with a deep Q-network
=====================================

A small network learns to walk from the upper-left corner of an 8x8
maze to the lower-right corner. Hitting an obstacle ends the episode
with -1; reaching the goal pays +1.
"""

import sys
from pathlib import Path

import numpy as np

from warebot.dqn import DqnConfig, greedy_nav_rollout, train_nav_dqn
from warebot.env import NavEnv, default_map, serialize_world
from warebot.metrics import render_line_plot, trailing_win_rate, win_rate_series
from warebot.oracle import bfs_shortest_path

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-out/navigation")
out.mkdir(parents=True, exist_ok=True)

# the shipped maze: '#' is an obstacle, S the start, D the destination
grid = default_map("nav")
print(serialize_world(grid))
best = bfs_shortest_path(grid, grid.start, grid.destination)
print("shortest path:", best, "moves")

# the network sees the maze as 64 numbers: 1 open, 0 obstacle, 0.5 for the agent
env = NavEnv(grid)
net, report = train_nav_dqn(env, DqnConfig(episodes=500), np.random.default_rng(2))

wins = report.series("win")
print(f"episodes run: {len(wins)}  early stop: {report.early_stop_episode}")
if len(wins) >= 50:
    print(f"best trailing-50 win rate: {max(trailing_win_rate(wins, 50)):.2f}")

# follow the learned policy without exploration
path, outcome = greedy_nav_rollout(net, NavEnv(grid))
print("greedy outcome:", outcome.reason.value, "in", len(path) - 1, "moves")

losses = [v for v in report.series("loss_mean") if v is not None]
render_line_plot([("loss", losses)], out / "loss.svg", title="Loss vs. episode", ylabel="loss")
render_line_plot([("win rate", win_rate_series(wins))], out / "win_rate.svg",
                 title="Win rate vs. episode", ylabel="win rate", overlay=False)
print("plots written to", out)
