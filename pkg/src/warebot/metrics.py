"""Training-curve series, per-episode reports, CSV export and SVG line plots."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np

DEFAULT_WINDOW = 20


def moving_average(series: Sequence[float], n: int) -> list[float]:
    """Mean of every length-``n`` window; output has ``len(series) - n + 1`` entries."""
    values = np.asarray(series, dtype=np.float64)
    if n < 1:
        raise ValueError("window must be >= 1")
    if n > len(values):
        raise ValueError(f"window {n} longer than series of length {len(values)}")
    # fsum keeps each window exact; cumulative-sum tricks drift by a few ulps
    return [math.fsum(values[k:k + n]) / n for k in range(len(values) - n + 1)]


def win_rate_series(wins: Sequence[int]) -> list[float]:
    """Running fraction of wins: entry ``k`` is wins in episodes 1..k divided by k."""
    if len(wins) == 0:
        raise ValueError("win series is empty")
    w = np.asarray(wins, dtype=np.float64)
    return (np.cumsum(w) / np.arange(1, len(w) + 1)).tolist()


def trailing_win_rate(wins: Sequence[int], n: int) -> list[float]:
    """Win fraction over the last ``n`` episodes, defined from episode ``n`` on."""
    return moving_average(wins, n)


@dataclass
class EpisodeRecord:
    episode: int
    reward: float
    steps: int
    win: int
    loss_mean: float | None = None
    epsilon: float = 0.0
    alpha: float | None = None
    agent_id: int | None = None


COLUMNS = tuple(f.name for f in fields(EpisodeRecord))


@dataclass
class TrainReport:
    rows: list[EpisodeRecord] = field(default_factory=list)
    early_stop_episode: int | None = None

    def add(self, **kwargs) -> EpisodeRecord:
        row = EpisodeRecord(**kwargs)
        self.rows.append(row)
        return row

    def __len__(self) -> int:
        return len(self.rows)

    def agent_ids(self) -> list[int | None]:
        return sorted({r.agent_id for r in self.rows}, key=lambda a: -1 if a is None else a)

    def select(self, agent_id: int | None = None) -> list[EpisodeRecord]:
        return [r for r in self.rows if r.agent_id == agent_id]

    def series(self, name: str, agent_id: int | None = None) -> list:
        return [getattr(r, name) for r in self.select(agent_id)]

    def validate(self) -> None:
        for agent in self.agent_ids():
            episodes = self.series("episode", agent)
            if episodes != list(range(1, len(episodes) + 1)):
                raise ValueError(f"episodes for agent {agent} are not contiguous from 1")
        if any(r.win not in (0, 1) for r in self.rows):
            raise ValueError("win flags must be 0 or 1")

    def total_win_rate(self) -> list[float]:
        """Mean over agents of each agent's running win rate."""
        agents = self.agent_ids()
        rates = np.array([win_rate_series(self.series("win", a)) for a in agents])
        return rates.mean(axis=0).tolist()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv(report: TrainReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in report.rows:
        writer.writerow([_fmt(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def write_metrics_csv(report: TrainReport, path: str | Path) -> None:
    Path(path).write_bytes(report_to_csv(report).encode("utf-8"))


def _parse_cell(name: str, text: str):
    if text == "":
        return None
    if name in ("episode", "steps", "win", "agent_id"):
        return int(text)
    return float(text)


def read_metrics_csv(path: str | Path) -> TrainReport:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        report = TrainReport()
        for raw in reader:
            values = {c: _parse_cell(c, raw[c]) for c in COLUMNS}
            if values["epsilon"] is None:
                values["epsilon"] = 0.0
            report.add(**values)
    return report


# Light stroke for raw values, dark stroke for the smoothed overlay.
_PALETTE = (
    ("#9ecae1", "#08519c"),
    ("#a1d99b", "#006d2c"),
    ("#fdae6b", "#a63603"),
    ("#fcbba1", "#a50f15"),
)


def render_line_plot(
    series: Sequence[tuple[str, Sequence[float]]],
    path: str | Path,
    *,
    title: str = "",
    xlabel: str = "episode",
    ylabel: str = "",
    window: int = DEFAULT_WINDOW,
    overlay: bool = True,
    width: int = 640,
    height: int = 400,
) -> None:
    """Write an SVG with one raw polyline per series plus a moving-average overlay.

    ``overlay=False`` draws each series once in its dark stroke; this suits
    series that are already smooth, like running win rates.
    """
    if not series:
        raise ValueError("nothing to plot")
    for label, values in series:
        if len(values) == 0:
            raise ValueError(f"series {label!r} is empty")
    pad_l, pad_r, pad_t, pad_b = 60, 20, 36, 48
    all_vals = np.concatenate([np.asarray(v, dtype=np.float64) for _, v in series])
    lo, hi = float(all_vals.min()), float(all_vals.max())
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    n_max = max(len(v) for _, v in series)
    plot_w, plot_h = width - pad_l - pad_r, height - pad_t - pad_b

    def xy(i: float, v: float) -> str:
        x = pad_l + (plot_w * (i / (n_max - 1)) if n_max > 1 else plot_w / 2)
        y = pad_t + plot_h * (1.0 - (v - lo) / (hi - lo))
        return f"{x:.2f},{y:.2f}"

    def polyline(points: Iterable[str], color: str, stroke_width: float, cls: str) -> str:
        return (f'<polyline class="{cls}" fill="none" stroke="{color}" '
                f'stroke-width="{stroke_width}" points="{" ".join(points)}"/>')

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{pad_l}" y1="{pad_t + plot_h}" x2="{pad_l + plot_w}" y2="{pad_t + plot_h}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + plot_h}" stroke="black"/>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = pad_t + plot_h * (1 - k / 4)
        out.append(f'<text x="{pad_l - 6}" y="{y + 4:.2f}" font-size="10" text-anchor="end" '
                   f'font-family="sans-serif">{v:.3g}</text>')
    out.append(f'<text x="{pad_l + plot_w / 2}" y="{height - 10}" font-size="12" text-anchor="middle" '
               f'font-family="sans-serif">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{pad_t + plot_h / 2}" font-size="12" text-anchor="middle" '
               f'font-family="sans-serif" transform="rotate(-90 14 {pad_t + plot_h / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{width / 2}" y="22" font-size="14" text-anchor="middle" '
                   f'font-family="sans-serif">{escape(title)}</text>')

    for idx, (label, values) in enumerate(series):
        light, dark = _PALETTE[idx % len(_PALETTE)]
        vals = [float(v) for v in values]
        if overlay:
            out.append(polyline((xy(i, v) for i, v in enumerate(vals)), light, 1, "raw"))
            n = min(window, len(vals))
            smooth = moving_average(vals, n)
            # window mean is drawn at the window's last episode
            out.append(polyline((xy(i + n - 1, v) for i, v in enumerate(smooth)), dark, 2, "smoothed"))
        else:
            out.append(polyline((xy(i, v) for i, v in enumerate(vals)), dark, 2, "raw"))
        ly = pad_t + 14 * (idx + 1)
        out.append(f'<rect x="{pad_l + plot_w - 130}" y="{ly - 9}" width="10" height="10" fill="{dark}"/>')
        out.append(f'<text x="{pad_l + plot_w - 115}" y="{ly}" font-size="11" '
                   f'font-family="sans-serif">{escape(label)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
