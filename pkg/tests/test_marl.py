import numpy as np
import pytest

from warebot.env import MultiAgentEnv, NavEnv, default_map, parse_world, serialize_world
from warebot.marl import (
    MULTI_SCHEDULES,
    QTable,
    evaluate_multi,
    load_tables,
    save_tables,
    train_multi,
)
from warebot.metrics import moving_average, win_rate_series
from warebot.oracle import bfs_shortest_path
from warebot.tabular import run_tabular


def scene_env(**kw):
    return MultiAgentEnv(default_map("multi"), **kw)


def test_schedule_defaults():
    s = MULTI_SCHEDULES
    assert (s.epsilon(0), s.epsilon(1), s.epsilon(99)) == (1.0, pytest.approx(0.97), 0.05)
    assert (s.alpha(0), s.alpha(5), s.alpha(100), s.gamma) == (0.03, pytest.approx(0.02), 0.001, 0.9)


def test_report_shape_and_bounds():
    learners, report = train_multi(scene_env(), episodes=15, rng=np.random.default_rng(2))
    assert len(learners) == 2 and len(report.rows) == 30
    report.validate()
    for agent in (1, 2):
        rates = win_rate_series(report.series("win", agent))
        assert all(0.0 <= r <= 1.0 for r in rates)
    assert all(0.0 <= r <= 1.0 for r in report.total_win_rate())
    assert report.series("steps", 1) == report.series("steps", 2)


def test_training_is_seeded():
    _, a = train_multi(scene_env(), episodes=20, rng=np.random.default_rng(11))
    _, b = train_multi(scene_env(), episodes=20, rng=np.random.default_rng(11))
    assert a.rows == b.rows


def test_steps_decrease_over_training():
    _, report = train_multi(scene_env(), episodes=100, rng=np.random.default_rng(11))
    steps = report.series("steps", 1)
    assert moving_average(steps, 20)[-1] < moving_average(steps, 20)[0]


def test_tables_only_learn_from_own_moves():
    # agent 2 never moves before agent 1 collides; its table must stay untouched
    scene = "1#A.\n..B2\nh..h"
    env = MultiAgentEnv(parse_world(scene, "multi"), step_cap=1)
    learners, _ = train_multi(env, episodes=1, rng=np.random.default_rng(0))
    touched = [np.flatnonzero(np.any(l.table.values != 0, axis=1)).tolist() for l in learners]
    start1 = env.map.index(env.map.agent_starts[0])
    start2 = env.map.index(env.map.agent_starts[1])
    assert set(touched[0]) <= {start1}
    assert set(touched[1]) <= {start2}


def test_reduction_to_single_agent_tabular():
    scene = default_map("multi")
    nav_text = (serialize_world(scene).replace("1", "S").replace("A", "D")
                .replace("2", ".").replace("B", ".").replace("h", "."))
    nav = NavEnv(parse_world(nav_text, "nav"), step_cap=200)
    multi = MultiAgentEnv(scene, step_cap=200, agent_starts=scene.agent_starts[:1],
                          destinations=scene.destinations[:1], human_starts=())
    learners, report = train_multi(multi, episodes=40, rng=np.random.default_rng(5))
    table, single = run_tabular(nav, MULTI_SCHEDULES, 40, np.random.default_rng(5))
    assert learners[0].table == table
    assert [(r.reward, r.steps, r.win) for r in report.rows] == [(r.reward, r.steps, r.win) for r in single.rows]


def test_frozen_greedy_evaluation_is_optimal():
    env = scene_env()
    learners, _ = train_multi(env, episodes=100, rng=np.random.default_rng(11))
    summary = evaluate_multi(learners, env, trials=1, freeze_humans=True, rng=np.random.default_rng(0))
    g = env.map
    optima = [bfs_shortest_path(g, s, d) for s, d in zip(g.agent_starts, g.destinations)]
    assert summary.success == [1.0, 1.0]
    assert summary.collision == [0.0, 0.0]
    assert summary.mean_combined_steps == sum(optima)
    assert env.humans_move


def test_zero_trials_gives_empty_summary():
    env = scene_env()
    summary = evaluate_multi([], env, trials=0)
    assert summary.trials == 0 and summary.success == []


def test_moving_human_evaluation_bounds():
    env = scene_env()
    learners, _ = train_multi(env, episodes=30, rng=np.random.default_rng(3))
    summary = evaluate_multi(learners, env, trials=100, rng=np.random.default_rng(1))
    assert all(0.0 <= f <= 1.0 for f in summary.success + summary.collision)


def test_untrained_tables_collide():
    env = scene_env()
    learners, _ = train_multi(env, episodes=1, rng=np.random.default_rng(0))
    for ag in learners:
        ag.table = QTable(env.n_states)
    summary = evaluate_multi(learners, env, trials=1, freeze_humans=True, rng=np.random.default_rng(0))
    assert summary.success != [1.0, 1.0]


def test_table_files_round_trip(tmp_path):
    learners, _ = train_multi(scene_env(), episodes=5, rng=np.random.default_rng(0))
    paths = save_tables(learners, tmp_path)
    assert [p.name for p in paths] == ["qtable_agent1.csv", "qtable_agent2.csv"]
    back = load_tables(tmp_path)
    assert [b.table for b in back] == [ag.table for ag in learners]
