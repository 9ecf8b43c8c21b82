"""Run configuration, orchestration and the ``warebot`` command line.

Config files are flat ``key = value`` lines; ``#`` starts a comment. Values
given as flags override the file, and the file overrides the mode defaults.

Seeding: a run with seed ``s`` drives everything from ``default_rng(s)``;
``--seeds a,b,c`` repeats the run once per seed, each in ``<out>/seed_<n>``.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import dqn, marl, tabular
from .env import (
    DEFAULT_MAPS,
    MapKind,
    MaxSpaceEnv,
    MultiAgentEnv,
    NavEnv,
    parse_world,
    read_map_text,
    serialize_world,
)
from .metrics import (
    DEFAULT_WINDOW,
    TrainReport,
    read_metrics_csv,
    render_line_plot,
    trailing_win_rate,
    win_rate_series,
    write_metrics_csv,
)
from .neural import load_params, save_params
from .oracle import bfs_shortest_path, model_from_env, policy_rollout, value_iteration

MODES = ("nav-dqn", "max-space", "multi")
MODE_KIND = {"nav-dqn": MapKind.NAV, "max-space": MapKind.MAX_SPACE, "multi": MapKind.MULTI_SCENE}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mode: str = "nav-dqn"
    map: str = ""
    episodes: int = 500
    seed: int = 0
    out: str = "runs/nav-dqn"
    gamma: float = 0.90
    epsilon_init: float = 1.0
    epsilon_final: float = 0.1
    epsilon_decay: float = 0.99
    batch_size: int = 32
    learning_rate: float = 0.0025
    replay_capacity: int = 1000
    alpha_init: float = 0.03
    alpha_slope: float = 0.002
    alpha_floor: float = 0.001
    step_cap: int = 0  # 0: environment default
    early_stop: bool = True
    window: int = DEFAULT_WINDOW

    def schedules(self) -> tabular.Schedules:
        return tabular.Schedules(
            epsilon_init=self.epsilon_init, epsilon_floor=self.epsilon_final,
            epsilon_decay=self.epsilon_decay, alpha_init=self.alpha_init,
            alpha_slope=self.alpha_slope, alpha_floor=self.alpha_floor, gamma=self.gamma,
        )

    def dqn_config(self) -> dqn.DqnConfig:
        return dqn.DqnConfig(
            episodes=self.episodes, gamma=self.gamma, epsilon_init=self.epsilon_init,
            epsilon_final=self.epsilon_final, epsilon_decay=self.epsilon_decay,
            batch_size=self.batch_size, learning_rate=self.learning_rate,
            replay_capacity=self.replay_capacity, early_stop=self.early_stop,
        )

    def echo(self) -> str:
        return "".join(f"{f.name} = {_show(getattr(self, f.name))}\n" for f in fields(self))


MODE_DEFAULTS = {
    "nav-dqn": dict(map=DEFAULT_MAPS[MapKind.NAV], episodes=500, epsilon_final=0.1, epsilon_decay=0.99),
    "max-space": dict(map=DEFAULT_MAPS[MapKind.MAX_SPACE], episodes=1000, epsilon_final=0.05,
                      epsilon_decay=0.995, alpha_init=0.5, alpha_slope=0.0005, alpha_floor=0.01),
    "multi": dict(map=DEFAULT_MAPS[MapKind.MULTI_SCENE], episodes=100, epsilon_final=0.05,
                  epsilon_decay=0.97, alpha_init=0.03, alpha_slope=0.002, alpha_floor=0.001),
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _show(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _coerce(key: str, raw) -> object:
    kind = _FIELD_TYPES[key]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from None
    return text


def parse_kv(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def parse_config(text: str = "", overrides: dict | None = None, mode: str | None = None) -> RunConfig:
    """Defaults for the mode, then the file, then ``overrides``; validated."""
    file_values = parse_kv(text)
    overrides = {k.replace("-", "_"): v for k, v in (overrides or {}).items() if v is not None}
    for key in (*file_values, *overrides):
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
    mode = overrides.get("mode", mode or file_values.get("mode", "nav-dqn"))
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    merged: dict[str, object] = {"out": f"runs/{mode}", **MODE_DEFAULTS[mode]}
    merged.update(file_values)
    merged.update(overrides)
    merged["mode"] = mode
    config = RunConfig(**{k: _coerce(k, v) for k, v in merged.items()})
    validate(config)
    return config


def validate(c: RunConfig) -> None:
    checks = [
        (0.0 <= c.gamma < 1.0, f"gamma must lie in [0, 1), got {c.gamma}"),
        (c.episodes >= 1, "episodes must be >= 1"),
        (c.batch_size >= 1, "batch_size must be >= 1"),
        (c.learning_rate > 0, "learning_rate must be positive"),
        (c.replay_capacity >= c.batch_size, "replay_capacity must be >= batch_size"),
        (0.0 <= c.epsilon_final <= c.epsilon_init <= 1.0, "need 0 <= epsilon_final <= epsilon_init <= 1"),
        (0.0 < c.epsilon_decay <= 1.0, "epsilon_decay must lie in (0, 1]"),
        (0.0 <= c.alpha_floor <= c.alpha_init <= 1.0, "need 0 <= alpha_floor <= alpha_init <= 1"),
        (c.alpha_slope >= 0.0, "alpha_slope must be >= 0"),
        (c.step_cap >= 0, "step_cap must be >= 0"),
        (c.window >= 1, "window must be >= 1"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    try:
        read_map_text(c.map)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None


def load_grid(config: RunConfig):
    return parse_world(read_map_text(config.map), MODE_KIND[config.mode])


def _cap(config: RunConfig) -> int | None:
    return config.step_cap or None


def make_env(config: RunConfig, grid=None):
    grid = load_grid(config) if grid is None else grid
    if config.mode == "nav-dqn":
        return NavEnv(grid, _cap(config))
    if config.mode == "max-space":
        return MaxSpaceEnv(grid, _cap(config))
    return MultiAgentEnv(grid, _cap(config))


def write_plots(report: TrainReport, out: Path, window: int = DEFAULT_WINDOW) -> list[Path]:
    """Training curves for whichever series the report carries."""
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    agents = report.agent_ids()
    if agents != [None]:
        series = [(f"agent {a}", win_rate_series(report.series("win", a))) for a in agents]
        series.append(("total", report.total_win_rate()))
        path = out / "win_rate.svg"
        render_line_plot(series, path, title="Win rate vs. episode", ylabel="win rate", overlay=False)
        paths.append(path)
        path = out / "steps.svg"
        render_line_plot([("steps", report.series("steps", agents[0]))], path,
                         title="Steps vs. episode", ylabel="steps", window=window)
        paths.append(path)
        return paths
    path = out / "win_rate.svg"
    render_line_plot([("win rate", win_rate_series(report.series("win")))], path,
                     title="Win rate vs. episode", ylabel="win rate", overlay=False)
    paths.append(path)
    losses = [v for v in report.series("loss_mean") if v is not None]
    if losses:
        path = out / "loss.svg"
        render_line_plot([("loss", losses)], path, title="Loss vs. episode", ylabel="loss", window=window)
        paths.append(path)
    path = out / "reward.svg"
    render_line_plot([("reward", report.series("reward"))], path, title="Reward vs. episode",
                     ylabel="reward", window=window)
    paths.append(path)
    return paths


def run(config: RunConfig, stream=None) -> int:
    """Train one configuration and write its artefacts into ``config.out``."""
    stream = sys.stdout if stream is None else stream
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config.echo(), encoding="utf-8", newline="\n")
    grid = load_grid(config)
    (out / ("map.csv" if config.mode == "max-space" else "map.txt")).write_text(
        serialize_world(grid), encoding="utf-8", newline="\n")
    env = make_env(config, grid)
    rng = np.random.default_rng(config.seed)
    extra = ""
    if config.mode == "nav-dqn":
        net, report = dqn.train_nav_dqn(env, config.dqn_config(), rng)
        save_params(net, out / "params.csv")
        extra = f" early_stop={report.early_stop_episode or '-'}"
    elif config.mode == "max-space":
        table, report = tabular.train_maxspace(env, config.schedules(), config.episodes, rng)
        table.save(out / "qtable.csv")
    else:
        learners, report = marl.train_multi(env, config.schedules(), config.episodes, rng)
        marl.save_tables(learners, out)
    write_metrics_csv(report, out / "metrics.csv")
    write_plots(report, out, config.window)
    stream.write(_summary(config, report) + extra + "\n")
    return 0


def _summary(config: RunConfig, report: TrainReport) -> str:
    agents = report.agent_ids()
    if agents == [None]:
        wins = report.series("win")
        steps = report.series("steps")
        rate = win_rate_series(wins)[-1]
        n = min(len(wins), 50)
        trailing = trailing_win_rate(wins, n)[-1]
        return (f"{config.mode}: episodes={len(wins)} win_rate={rate:.3f} trailing{n}={trailing:.3f} "
                f"last_steps={steps[-1]}")
    total = report.total_win_rate()[-1]
    steps = report.series("steps", agents[0])
    n = min(len(steps), 20)
    return (f"{config.mode}: episodes={len(steps)} total_win_rate={total:.3f} "
            f"mean_steps_last{n}={np.mean(steps[-n:]):.1f}")


def evaluate(config: RunConfig, persist: bool = False, trials: int = 1, freeze_humans: bool = False,
             stream=None) -> int:
    """Greedy evaluation of the snapshot saved in ``config.out``."""
    stream = sys.stdout if stream is None else stream
    out = Path(config.out)
    if config.mode == "nav-dqn":
        net = load_params(out / "params.csv")
        env = make_env(config)
        path, outcome = dqn.greedy_nav_rollout(net, env)
        best = bfs_shortest_path(env.map, env.start, env.destination)
        stream.write(f"nav-dqn: outcome={outcome.reason.value} path_length={len(path) - 1} bfs_optimum={best}\n")
        return 0
    if config.mode == "max-space":
        table = tabular.QTable.load(out / "qtable.csv")
        state_file = out / "storage_state.csv"
        grid = (parse_world(state_file.read_text(encoding="utf-8"), MapKind.MAX_SPACE)
                if persist and state_file.exists() else load_grid(config))
        env = MaxSpaceEnv(grid, _cap(config), persist_capacity=persist)
        path, outcome = tabular.greedy_rollout(table, env)
        line = (f"max-space: outcome={outcome.reason.value} cell={_cell(outcome.next_state)} "
                f"reward={outcome.reward:g} path_length={len(path) - 1}")
        if persist and outcome.reason.value == "goal":
            updated = env.commit_storage()
            state_file.write_text(serialize_world(updated), encoding="utf-8", newline="\n")
            line += f" remaining={int(updated.cells[outcome.next_state])}"
        stream.write(line + "\n")
        return 0
    learners = marl.load_tables(out)
    env = make_env(config)
    summary = marl.evaluate_multi(learners, env, trials, freeze_humans, np.random.default_rng(config.seed))
    stream.write(f"multi: trials={summary.trials} success={summary.success} collision={summary.collision} "
                 f"mean_agent_steps={summary.mean_agent_steps} combined={summary.mean_combined_steps}\n")
    return 0


def _cell(p) -> str:
    return f"({p[0]},{p[1]})"


def guess_kind(path: str, text: str) -> MapKind:
    if path.endswith(".csv") or "," in text:
        return MapKind.MAX_SPACE
    if any(ch in text for ch in "12AB"):
        return MapKind.MULTI_SCENE
    return MapKind.NAV


def oracle_report(map_path: str, kind: MapKind | None = None, gamma: float = 0.9) -> str:
    """BFS optima next to the value-iteration greedy rollout for a map."""
    text = read_map_text(map_path)
    kind = guess_kind(map_path, text) if kind is None else kind
    grid = parse_world(text, kind)
    if kind is MapKind.MULTI_SCENE:
        parts = [f"agent{i + 1}_bfs={bfs_shortest_path(grid, s, d)}"
                 for i, (s, d) in enumerate(zip(grid.agent_starts, grid.destinations))]
        return "multi: " + " ".join(parts)
    if kind is MapKind.NAV:
        env, goal = NavEnv(grid), grid.destination
    else:
        env, goal = MaxSpaceEnv(grid), grid.max_capacity_cell()
    model = model_from_env(env, gamma)
    q_star, policy = value_iteration(model)
    path, _ = policy_rollout(model, policy)
    end = grid.position(path[-1])
    best = bfs_shortest_path(grid, grid.start, goal)
    return (f"{kind.value}: bfs_length={best} vi_rollout_length={len(path) - 1} vi_end={_cell(end)} "
            f"goal={_cell(goal)} q_star_start_max={q_star[model.start].max():.6f}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_HYPER_FLAGS = ("gamma", "epsilon_init", "epsilon_final", "epsilon_decay", "batch_size", "learning_rate",
                "replay_capacity", "alpha_init", "alpha_slope", "alpha_floor", "step_cap", "window")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="warebot", description="Warehouse grid-world Q-learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("mode", choices=MODES)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--map")
        p.add_argument("--episodes", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        for name in _HYPER_FLAGS:
            p.add_argument("--" + name.replace("_", "-"), dest=name)

    train = sub.add_parser("train", help="train one mode and write metrics, plots and snapshots")
    common(train)
    train.add_argument("--no-early-stop", dest="early_stop", action="store_const", const="false")
    train.add_argument("--seeds", help="comma-separated seeds, one sub-directory each")

    ev = sub.add_parser("eval", help="greedy evaluation of a trained snapshot in --out")
    common(ev)
    ev.add_argument("--persist", action="store_true", help="max-space: store the object and keep the new capacity")
    ev.add_argument("--trials", type=int, default=1)
    ev.add_argument("--freeze-humans", action="store_true")

    orc = sub.add_parser("oracle", help="BFS and value-iteration summary of a map")
    orc.add_argument("--map", required=True)
    orc.add_argument("--kind", choices=[k.value for k in MapKind])
    orc.add_argument("--gamma", type=float, default=0.9)

    plot = sub.add_parser("plot", help="render SVG curves from a metrics CSV")
    plot.add_argument("metrics")
    plot.add_argument("--out", required=True)
    plot.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    return parser


def _config_from_args(args) -> RunConfig:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    overrides = {k: getattr(args, k, None) for k in ("map", "episodes", "seed", "out", "early_stop", *_HYPER_FLAGS)}
    return parse_config(text, overrides, mode=args.mode)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            config = _config_from_args(args)
            if args.seeds:
                seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
                for seed in seeds:
                    run(dataclasses.replace(config, seed=seed, out=str(Path(config.out) / f"seed_{seed}")))
                return 0
            return run(config)
        if args.command == "eval":
            return evaluate(_config_from_args(args), args.persist, args.trials, args.freeze_humans)
        if args.command == "oracle":
            kind = MapKind(args.kind) if args.kind else None
            print(oracle_report(args.map, kind, args.gamma))
            return 0
        report = read_metrics_csv(args.metrics)
        for path in write_plots(report, Path(args.out), args.window):
            print(path)
        return 0
    except (ConfigError, ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"warebot: error: {exc}", file=sys.stderr)
        return 1
