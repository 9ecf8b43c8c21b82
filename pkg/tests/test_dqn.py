import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warebot.dqn import (
    DqnConfig,
    Experience,
    ReplayBuffer,
    batch_targets,
    compute_target,
    epsilon_schedule,
    greedy_nav_rollout,
    replay_push,
    replay_sample,
    train_nav_dqn,
)
from warebot.env import NavEnv, Reason, parse_world
from warebot.neural import Mlp, mlp_init


def exp(k, dim=2, terminal=False):
    return Experience(np.full(dim, float(k)), k % 4, float(k), np.full(dim, k + 0.5), terminal)


def ids(buffer):
    return [int(e.reward) for e in buffer.contents()]


def constant_net(value, dim=2):
    # linear net whose every output equals ``value``
    return Mlp([np.zeros((dim, 4))], [np.full(4, float(value))])


# ---- replay memory ---------------------------------------------------------

def test_fifo_eviction():
    buf = ReplayBuffer(3)
    for k in (1, 2, 3, 4):
        replay_push(buf, exp(k))
    assert ids(buf) == [2, 3, 4]


def test_push_to_empty():
    buf = ReplayBuffer(5)
    replay_push(buf, exp(1))
    assert len(buf) == 1


def test_full_capacity():
    buf = ReplayBuffer(1000)
    for k in range(1000):
        replay_push(buf, exp(k))
    assert len(buf) == 1000


def test_sample_whole_buffer():
    buf = ReplayBuffer(40)
    for k in range(32):
        buf.push(exp(k))
    got = sorted(int(e.reward) for e in replay_sample(buf, 32, np.random.default_rng(0)))
    assert got == list(range(32))


def test_sample_too_many():
    buf = ReplayBuffer(40)
    for k in range(31):
        buf.push(exp(k))
    with pytest.raises(ValueError):
        replay_sample(buf, 32, np.random.default_rng(0))


def test_sampling_is_uniform():
    buf = ReplayBuffer(10)
    for k in range(14):
        buf.push(exp(k))
    rng = np.random.default_rng(17)
    counts = np.zeros(14)
    draws = 10_000
    for _ in range(draws):
        for e in replay_sample(buf, 1, rng):
            counts[int(e.reward)] += 1
    assert not counts[:4].any()
    assert np.all(np.abs(counts[4:] / draws - 0.1) <= 0.02)


def test_sample_has_no_repeats():
    buf = ReplayBuffer(50)
    for k in range(50):
        buf.push(exp(k))
    got = [int(e.reward) for e in buf.sample(32, np.random.default_rng(1))]
    assert len(set(got)) == 32


def test_rejects_wrong_observation_width():
    buf = ReplayBuffer(4)
    buf.push(exp(1, dim=2))
    with pytest.raises(ValueError):
        buf.push(exp(2, dim=3))


@settings(max_examples=200)
@given(st.integers(1, 20), st.lists(st.integers(0, 10**6), max_size=80))
def test_contents_match_list_oracle(capacity, pushes):
    buf, oracle = ReplayBuffer(capacity), []
    for k in pushes:
        buf.push(exp(k))
        oracle.append(k)
        oracle = oracle[-capacity:]
        assert len(buf) == len(oracle) <= capacity
    assert ids(buf) == oracle


# ---- targets and schedule --------------------------------------------------

def test_terminal_target_is_reward():
    assert compute_target(Experience(np.zeros(2), 0, 1.0, np.zeros(2), True), constant_net(7.0), 0.9) == 1.0


def test_bootstrapped_target():
    e = Experience(np.zeros(2), 0, 0.0, np.ones(2), False)
    assert compute_target(e, constant_net(0.5), 0.9) == pytest.approx(0.45, abs=1e-15)
    e = Experience(np.zeros(2), 0, -1.0, np.ones(2), False)
    assert compute_target(e, constant_net(0.0), 0.9) == -1.0


def test_target_rejects_bad_gamma():
    with pytest.raises(ValueError):
        compute_target(exp(1), constant_net(0.0), 1.0)


@given(st.floats(-10, 10), st.integers(0, 2**16))
def test_zero_gamma_target_is_reward(r, seed):
    net = mlp_init([2, 5, 4], seed)
    e = Experience(np.zeros(2), 0, r, np.ones(2), False)
    assert compute_target(e, net, 0.0) == r


def test_batch_targets_agree_with_scalar():
    net = mlp_init([3, 6, 4], seed=4)
    rng = np.random.default_rng(2)
    es = [Experience(rng.normal(size=3), 0, float(rng.normal()), rng.normal(size=3), bool(i % 2))
          for i in range(8)]
    y = batch_targets(net, np.array([e.reward for e in es]), np.array([e.next_state for e in es]),
                      np.array([e.terminal for e in es]), 0.9)
    assert np.allclose(y, [compute_target(e, net, 0.9) for e in es], rtol=0, atol=1e-13)


@pytest.mark.parametrize("e, expected", [(0, 1.0), (1, 0.99), (500, 0.1)])
def test_epsilon_schedule_values(e, expected):
    assert epsilon_schedule(e) == pytest.approx(expected, abs=1e-15)


@given(st.integers(0, 5000))
def test_epsilon_schedule_monotone_with_exact_floor(e):
    assert epsilon_schedule(e + 1) <= epsilon_schedule(e)
    assert epsilon_schedule(e) >= 0.1
    assert epsilon_schedule(e + 2000) == 0.1


# ---- configuration and training --------------------------------------------

def test_default_config():
    c = DqnConfig()
    assert (c.gamma, c.batch_size, c.learning_rate, c.replay_capacity) == (0.9, 32, 0.0025, 1000)
    assert (c.epsilon_init, c.epsilon_final, c.episodes) == (1.0, 0.1, 500)
    assert c.dims(64) == [64, 64, 64, 4]


@pytest.mark.parametrize("kwargs", [dict(gamma=1.0), dict(batch_size=0), dict(learning_rate=0.0),
                                    dict(replay_capacity=10), dict(episodes=0),
                                    dict(epsilon_final=0.5, epsilon_init=0.2)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        DqnConfig(**kwargs)


TINY = "S.\n.D"


def test_one_episode_run():
    net, report = train_nav_dqn(NavEnv(parse_world(TINY, "nav")), DqnConfig(episodes=1),
                                np.random.default_rng(0))
    assert len(report.rows) == 1 and report.early_stop_episode is None
    assert net.dims == [4, 4, 4, 4]


def test_training_is_bitwise_deterministic():
    grid = parse_world("S..\n.#.\n..D", "nav")
    cfg = DqnConfig(episodes=30)
    a, ra = train_nav_dqn(NavEnv(grid), cfg, np.random.default_rng(3))
    b, rb = train_nav_dqn(NavEnv(grid), cfg, np.random.default_rng(3))
    assert ra.rows == rb.rows
    assert all(np.array_equal(x, y) for x, y in zip(a.params, b.params))


def test_episode_rewards_follow_outcomes():
    grid = parse_world("S..\n.#.\n..D", "nav")
    _, report = train_nav_dqn(NavEnv(grid), DqnConfig(episodes=60, early_stop=False),
                              np.random.default_rng(1))
    for row in report.rows:
        # a win pays +1, a collision -1, a step-limit cut 0; free moves pay nothing
        assert (row.reward == 1.0) == bool(row.win)
        assert row.reward in (-1.0, 0.0, 1.0)
    assert report.rows[0].loss_mean is None


def test_early_stop_on_tiny_maze():
    grid = parse_world(TINY, "nav")
    net, report = train_nav_dqn(NavEnv(grid), DqnConfig(episodes=400), np.random.default_rng(0))
    assert report.early_stop_episode == len(report.rows)
    assert all(r.win for r in report.rows[-10:])
    path, outcome = greedy_nav_rollout(net, NavEnv(grid))
    assert outcome.reason is Reason.GOAL and len(path) - 1 == 2
