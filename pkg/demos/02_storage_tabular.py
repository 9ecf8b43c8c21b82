"""
Finding the emptiest storage cell
=================================

Each cell of the storage map holds its own reward: walls cost -100,
open floor -1, and the two storage cells pay their free capacity (100
and 10). Tabular Q-learning finds the roomier cell, and storing an
object there leaves 99 places for the next one.
"""

import numpy as np

from warebot.env import MaxSpaceEnv, default_map, serialize_world
from warebot.metrics import trailing_win_rate
from warebot.oracle import bfs_shortest_path
from warebot.tabular import MAXSPACE_SCHEDULES, greedy_rollout, train_maxspace

grid = default_map("max-space")
print(serialize_world(grid))

env = MaxSpaceEnv(grid)
table, report = train_maxspace(env, MAXSPACE_SCHEDULES, episodes=1000, rng=np.random.default_rng(7))
print(f"trailing-100 win rate at the end: {trailing_win_rate(report.series('win'), 100)[-1]:.2f}")

path, outcome = greedy_rollout(table, env)
target = grid.max_capacity_cell()
print("greedy path ends at", tuple(path[-1]), "after", len(path) - 1, "moves;",
      "shortest possible:", bfs_shortest_path(grid, grid.start, target))

# now keep what was stored: two deliveries in a row
stock = MaxSpaceEnv(grid, persist_capacity=True)
for trip in (1, 2):
    _, outcome = greedy_rollout(table, stock)
    updated = stock.commit_storage()
    print(f"trip {trip}: reward {outcome.reward:g}, places left {int(updated.cells[target])}")
