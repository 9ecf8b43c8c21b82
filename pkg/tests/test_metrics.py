import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from warebot.metrics import (
    COLUMNS,
    TrainReport,
    moving_average,
    read_metrics_csv,
    render_line_plot,
    report_to_csv,
    trailing_win_rate,
    win_rate_series,
    write_metrics_csv,
)

reals = st.floats(-1e6, 1e6, allow_nan=False)


def test_moving_average_example():
    assert moving_average([1, 2, 3, 4], 2) == [1.5, 2.5, 3.5]


def test_moving_average_constant_and_full_window():
    assert moving_average([7.0] * 5, 3) == [7.0, 7.0, 7.0]
    assert moving_average([1, 2, 3, 6], 4) == [3.0]


@pytest.mark.parametrize("n", [0, 5])
def test_moving_average_bad_window(n):
    with pytest.raises(ValueError):
        moving_average([1, 2, 3, 4], n)


def test_win_rate_example():
    assert win_rate_series([1, 0, 1, 1]) == [1.0, 0.5, 2 / 3, 0.75]
    assert win_rate_series([0, 0, 0]) == [0.0, 0.0, 0.0]
    assert win_rate_series([1, 1]) == [1.0, 1.0]


def test_win_rate_rejects_empty():
    with pytest.raises(ValueError):
        win_rate_series([])


def test_trailing_win_rate_is_windowed():
    assert trailing_win_rate([0, 1, 1, 1], 2) == [0.5, 1.0, 1.0]


@given(st.lists(reals, min_size=1, max_size=40), st.data(), st.sampled_from([-3.0, -0.5, 0.0, 2.0, 10.0]))
def test_moving_average_scales(series, data, c):
    n = data.draw(st.integers(1, len(series)))
    scaled = moving_average([c * v for v in series], n)
    assert scaled == pytest.approx([c * v for v in moving_average(series, n)], rel=1e-12, abs=1e-6)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=40), st.data())
def test_moving_average_non_negative(series, data):
    n = data.draw(st.integers(1, len(series)))
    assert min(moving_average(series, n)) >= 0.0


@given(st.lists(st.integers(0, 1), min_size=1, max_size=60), st.integers(1, 30))
def test_win_rate_bounds_and_winning_suffix(prefix, tail):
    rates = win_rate_series(prefix + [1] * tail)
    assert all(0.0 <= r <= 1.0 for r in rates)
    suffix = rates[len(prefix) - 1:]
    assert all(b >= a for a, b in zip(suffix, suffix[1:]))


def sample_report():
    r = TrainReport()
    r.add(episode=1, reward=-1.0, steps=3, win=0, loss_mean=0.25, epsilon=1.0)
    r.add(episode=2, reward=1.0, steps=14, win=1, loss_mean=None, epsilon=0.99)
    return r


def test_csv_layout(tmp_path):
    path = tmp_path / "m.csv"
    one = TrainReport()
    one.add(episode=1, reward=0.0, steps=1, win=0)
    write_metrics_csv(one, path)
    data = path.read_bytes()
    assert b"\r" not in data
    assert data.decode("utf-8").splitlines() == [",".join(COLUMNS), "1,0.0,1,0,,0.0,,"]
    assert "loss_mean" in COLUMNS


def test_csv_is_byte_stable(tmp_path):
    write_metrics_csv(sample_report(), tmp_path / "a.csv")
    write_metrics_csv(sample_report(), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


record = st.builds(
    dict,
    reward=reals,
    steps=st.integers(0, 10_000),
    win=st.integers(0, 1),
    loss_mean=st.none() | st.floats(0, 1e6),
    epsilon=st.floats(0, 1),
    alpha=st.none() | st.floats(0, 1),
)


@given(rows=st.lists(record, max_size=20), agent=st.sampled_from([None, 1]))
def test_csv_round_trip(rows, agent, tmp_path_factory):
    report = TrainReport()
    for i, row in enumerate(rows):
        report.add(episode=i + 1, agent_id=agent, **row)
    path = tmp_path_factory.mktemp("csv") / "m.csv"
    write_metrics_csv(report, path)
    assert read_metrics_csv(path).rows == report.rows


def test_report_validation():
    r = sample_report()
    r.validate()
    r.add(episode=4, reward=0.0, steps=1, win=0)
    with pytest.raises(ValueError):
        r.validate()


def test_total_win_rate_is_agent_mean():
    r = TrainReport()
    for e, (w1, w2) in enumerate([(1, 0), (0, 0), (1, 1)], start=1):
        r.add(episode=e, reward=0.0, steps=1, win=w1, agent_id=1)
        r.add(episode=e, reward=0.0, steps=1, win=w2, agent_id=2)
    a1, a2 = win_rate_series([1, 0, 1]), win_rate_series([0, 0, 1])
    assert r.total_win_rate() == pytest.approx([(x + y) / 2 for x, y in zip(a1, a2)], abs=1e-15)


def polylines(svg):
    return re.findall(r"<polyline[^>]*>", svg)


def test_plot_single_series(tmp_path):
    path = tmp_path / "p.svg"
    render_line_plot([("loss", list(range(10)))], path, title="Loss", ylabel="loss", window=3)
    svg = path.read_text()
    lines = polylines(svg)
    assert len(lines) == 2
    assert sum('class="raw"' in line for line in lines) == 1
    assert sum('class="smoothed"' in line for line in lines) == 1
    assert "Loss" in svg and ">loss<" in svg


def test_plot_three_series_without_overlay(tmp_path):
    path = tmp_path / "w.svg"
    series = [("agent 1", [0.1, 0.2]), ("agent 2", [0.0, 0.5]), ("total", [0.05, 0.35])]
    render_line_plot(series, path, overlay=False)
    assert len(polylines(path.read_text())) == 3


def test_plot_is_deterministic(tmp_path):
    for name in ("a.svg", "b.svg"):
        render_line_plot([("r", [3, 1, 4, 1, 5])], tmp_path / name, window=2)
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_plot_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        render_line_plot([], tmp_path / "x.svg")
    with pytest.raises(ValueError):
        render_line_plot([("empty", [])], tmp_path / "x.svg")


def test_csv_text_matches_file(tmp_path):
    r = sample_report()
    write_metrics_csv(r, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text(encoding="utf-8") == report_to_csv(r)
