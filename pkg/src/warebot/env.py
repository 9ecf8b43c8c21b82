"""Warehouse grid worlds: navigation maze, storage map and multi-agent scene.

Three map encodings share one :class:`GridMap` container:

* ``NAV`` -- binary maze, ``1`` open and ``0`` obstacle, with a start and a
  destination cell.
* ``MAX_SPACE`` -- storage map whose cell values double as rewards:
  ``-100`` wall, ``-1`` open path, ``1`` the object to be stored and any
  integer ``>= 2`` a storage cell holding that much free capacity.
* ``MULTI_SCENE`` -- binary floor plan plus two agent starts, their
  destinations and the starting cells of moving humans.

Off-grid moves are collisions in every environment.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


N_ACTIONS = len(Action)

# (d_row, d_col) per action, indexed by action value
DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1))


class Position(NamedTuple):
    row: int
    col: int

    def moved(self, action: int) -> Position:
        dr, dc = DELTAS[action]
        return Position(self.row + dr, self.col + dc)


class MapKind(enum.Enum):
    NAV = "nav"
    MAX_SPACE = "max-space"
    MULTI_SCENE = "multi"


class Reason(enum.Enum):
    ONGOING = "ongoing"
    GOAL = "goal"
    COLLISION = "collision"
    STEP_LIMIT = "step_limit"


class MapError(ValueError):
    """Raised for malformed or unsolvable map text."""


class EnvError(RuntimeError):
    """Raised when an environment is driven outside its contract."""


# MaxSpace cell values
WALL = -100
OPEN_PATH = -1
OBJECT = 1


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    next_state: Position
    terminal: bool
    reason: Reason

    @property
    def absorbing(self) -> bool:
        """True for genuine terminal states; a step-limit cut is a truncation."""
        return self.reason in (Reason.GOAL, Reason.COLLISION)


@dataclass(frozen=True, eq=False)
class GridMap:
    kind: MapKind
    cells: np.ndarray
    start: Position | None = None
    destination: Position | None = None
    agent_starts: tuple[Position, ...] = ()
    destinations: tuple[Position, ...] = ()
    human_starts: tuple[Position, ...] = ()

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    @property
    def n_cells(self) -> int:
        return self.height * self.width

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.cells.shape == other.cells.shape
            and bool(np.array_equal(self.cells, other.cells))
            and self.start == other.start
            and self.destination == other.destination
            and self.agent_starts == other.agent_starts
            and self.destinations == other.destinations
            and self.human_starts == other.human_starts
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.cells.tobytes(), self.cells.shape, self.start,
                     self.destination, self.agent_starts, self.destinations, self.human_starts))

    def in_bounds(self, pos: Position) -> bool:
        return 0 <= pos.row < self.height and 0 <= pos.col < self.width

    def index(self, pos: Position) -> int:
        return pos.row * self.width + pos.col

    def position(self, index: int) -> Position:
        return Position(*divmod(int(index), self.width))

    def passable(self, pos: Position) -> bool:
        """Whether an agent may stand on ``pos`` without ending its episode."""
        if not self.in_bounds(pos):
            return False
        value = int(self.cells[pos])
        if self.kind is MapKind.MAX_SPACE:
            return value in (OPEN_PATH, OBJECT)
        return value == 1

    def capacity_cells(self) -> list[Position]:
        if self.kind is not MapKind.MAX_SPACE:
            return []
        rows, cols = np.nonzero(self.cells >= 2)
        return [Position(int(r), int(c)) for r, c in zip(rows, cols)]

    def max_capacity_cell(self) -> Position:
        """Storage cell with the most free space (first in row-major order on ties)."""
        cells = self.capacity_cells()
        if not cells:
            raise MapError("map has no storage cell")
        return max(cells, key=lambda p: (int(self.cells[p]), -self.index(p)))

    def with_cells(self, cells: np.ndarray) -> GridMap:
        return GridMap(self.kind, cells, self.start, self.destination,
                       self.agent_starts, self.destinations, self.human_starts)


def _reachable(grid: GridMap, start: Position, goal: Position) -> bool:
    # Local flood fill; the oracle module owns the public BFS.
    seen = {start}
    queue = deque([start])
    while queue:
        pos = queue.popleft()
        if pos == goal:
            return True
        for a in range(N_ACTIONS):
            nxt = pos.moved(a)
            if nxt in seen or not grid.in_bounds(nxt):
                continue
            if nxt == goal or grid.passable(nxt):
                seen.add(nxt)
                queue.append(nxt)
    return False


def _rows(text: str) -> list[str]:
    lines = [line.rstrip("\r") for line in text.strip("\n").split("\n")]
    lines = [line for line in lines if line.strip() and not line.lstrip().startswith(";")]
    if not lines:
        raise MapError("empty map text")
    return lines


def _parse_nav(text: str) -> GridMap:
    rows = [line.strip() for line in _rows(text)]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MapError("ragged rows")
    cells = np.zeros((len(rows), width), dtype=np.int64)
    start = dest = None
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == "#":
                continue
            if ch not in ".SD":
                raise MapError(f"unknown symbol {ch!r} at ({r}, {c})")
            cells[r, c] = 1
            if ch == "S":
                if start is not None:
                    raise MapError("duplicate start")
                start = Position(r, c)
            elif ch == "D":
                if dest is not None:
                    raise MapError("duplicate destination")
                dest = Position(r, c)
    if start is None:
        raise MapError("missing start 'S'")
    if dest is None:
        raise MapError("missing destination 'D'")
    grid = GridMap(MapKind.NAV, cells, start=start, destination=dest)
    if not _reachable(grid, start, dest):
        raise MapError("destination unreachable from start")
    return grid


def _parse_max_space(text: str) -> GridMap:
    rows = []
    for line in _rows(text):
        try:
            rows.append([int(tok.strip().replace("−", "-")) for tok in line.split(",")])
        except ValueError as exc:
            raise MapError(f"non-integer cell in {line!r}") from exc
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MapError("ragged rows")
    cells = np.array(rows, dtype=np.int64)
    bad = ~np.isin(cells, (WALL, OPEN_PATH, OBJECT)) & (cells < 2)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MapError(f"unknown cell value {cells[r, c]} at ({r}, {c})")
    objects = np.argwhere(cells == OBJECT)
    if len(objects) != 1:
        raise MapError(f"expected exactly one object cell, found {len(objects)}")
    start = Position(int(objects[0][0]), int(objects[0][1]))
    grid = GridMap(MapKind.MAX_SPACE, cells, start=start)
    if not grid.capacity_cells():
        raise MapError("map has no storage cell")
    if not _reachable(grid, start, grid.max_capacity_cell()):
        raise MapError("largest storage cell unreachable from object")
    return grid


def _parse_multi(text: str) -> GridMap:
    rows = [line.strip() for line in _rows(text)]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MapError("ragged rows")
    cells = np.zeros((len(rows), width), dtype=np.int64)
    agents: dict[str, Position] = {}
    dests: dict[str, Position] = {}
    humans: list[Position] = []
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == "#":
                continue
            pos = Position(r, c)
            cells[pos] = 1
            if ch in "12":
                if ch in agents:
                    raise MapError(f"duplicate agent {ch}")
                agents[ch] = pos
            elif ch in "AB":
                if ch in dests:
                    raise MapError(f"duplicate destination {ch}")
                dests[ch] = pos
            elif ch == "h":
                humans.append(pos)
            elif ch != ".":
                raise MapError(f"unknown symbol {ch!r} at ({r}, {c})")
    for key in "12":
        if key not in agents:
            raise MapError(f"missing agent {key}")
    for key in "AB":
        if key not in dests:
            raise MapError(f"missing destination {key}")
    if len(humans) != 2:
        raise MapError(f"expected 2 humans, found {len(humans)}")
    grid = GridMap(
        MapKind.MULTI_SCENE,
        cells,
        agent_starts=(agents["1"], agents["2"]),
        destinations=(dests["A"], dests["B"]),
        human_starts=tuple(humans),
    )
    for i, (s, d) in enumerate(zip(grid.agent_starts, grid.destinations), start=1):
        if not _reachable(grid, s, d):
            raise MapError(f"agent {i} cannot reach its destination")
    return grid


_PARSERS = {
    MapKind.NAV: _parse_nav,
    MapKind.MAX_SPACE: _parse_max_space,
    MapKind.MULTI_SCENE: _parse_multi,
}


def parse_world(text: str, kind: MapKind | str) -> GridMap:
    """Parse map text of the given kind, validating every map invariant."""
    kind = MapKind(kind)
    if not text or not text.strip():
        raise MapError("empty map text")
    return _PARSERS[kind](text)


def serialize_world(grid: GridMap) -> str:
    """Inverse of :func:`parse_world`; always ends with a newline."""
    if grid.kind is MapKind.MAX_SPACE:
        return "".join(",".join(str(int(v)) for v in row) + "\n" for row in grid.cells)
    chars = np.where(grid.cells == 1, ".", "#").astype(object)
    if grid.kind is MapKind.NAV:
        chars[grid.start] = "S"
        chars[grid.destination] = "D"
    else:
        for pos in grid.human_starts:
            chars[pos] = "h"
        for sym, pos in zip("AB", grid.destinations):
            chars[pos] = sym
        for sym, pos in zip("12", grid.agent_starts):
            chars[pos] = sym
    return "".join("".join(row) + "\n" for row in chars)


DEFAULT_MAPS = {
    MapKind.NAV: "default-nav.map",
    MapKind.MAX_SPACE: "default-maxspace.csv",
    MapKind.MULTI_SCENE: "default-multi.map",
}


def read_map_text(name_or_path: str | Path) -> str:
    """Read a map from disk, falling back to the bundled map of that file name."""
    path = Path(name_or_path)
    if path.is_file():
        return path.read_text(encoding="utf-8")
    bundled = resources.files("warebot").joinpath("maps", path.name)
    if bundled.is_file():
        return bundled.read_text(encoding="utf-8")
    raise FileNotFoundError(f"no map file {name_or_path}")


def load_map(name_or_path: str | Path, kind: MapKind | str) -> GridMap:
    return parse_world(read_map_text(name_or_path), kind)


def default_map(kind: MapKind | str) -> GridMap:
    kind = MapKind(kind)
    return load_map(DEFAULT_MAPS[kind], kind)


def default_step_cap(grid: GridMap) -> int:
    if grid.kind is MapKind.MULTI_SCENE:
        return 200
    return 2 * grid.n_cells


class NavEnv:
    """Single agent in a binary maze; rewards are -1 / 0 / +1."""

    def __init__(self, grid: GridMap, step_cap: int | None = None):
        if grid.kind is not MapKind.NAV:
            raise EnvError(f"NavEnv needs a nav map, got {grid.kind.value}")
        self.map = grid
        self.start = grid.start
        self.destination = grid.destination
        self.step_cap = default_step_cap(grid) if step_cap is None else int(step_cap)
        self.agent = self.start
        self.steps_taken = 0
        self.done = False

    @property
    def n_states(self) -> int:
        return self.map.n_cells

    def state_index(self) -> int:
        return self.map.index(self.agent)

    def reset(self) -> Position:
        self.agent = self.start
        self.steps_taken = 0
        self.done = False
        return self.agent

    def step(self, action: int) -> StepOutcome:
        if self.done:
            raise EnvError("step() on a terminated episode; call reset()")
        self.steps_taken += 1
        target = self.agent.moved(action)
        if not self.map.passable(target):
            outcome = StepOutcome(-1.0, self.agent, True, Reason.COLLISION)
        else:
            self.agent = target
            if target == self.destination:
                outcome = StepOutcome(1.0, target, True, Reason.GOAL)
            elif self.steps_taken >= self.step_cap:
                outcome = StepOutcome(0.0, target, True, Reason.STEP_LIMIT)
            else:
                outcome = StepOutcome(0.0, target, False, Reason.ONGOING)
        self.done = outcome.terminal
        return outcome

    def observation(self) -> np.ndarray:
        return encode_nav_observation(self)


def nav_step(env: NavEnv, action: int) -> StepOutcome:
    return env.step(action)


def encode_nav_observation(env: NavEnv) -> np.ndarray:
    """Row-major floor plan (open 1.0, obstacle 0.0) with the agent cell set to 0.5."""
    obs = (env.map.cells == 1).astype(np.float64).ravel()
    obs[env.map.index(env.agent)] = 0.5
    return obs


class MaxSpaceEnv:
    """Carry the object to a storage cell; the entered cell's value is the reward.

    Any storage cell ends the episode. ``win`` in training reports means the
    episode ended on the storage cell with the most free space.
    """

    def __init__(self, grid: GridMap, step_cap: int | None = None, persist_capacity: bool = False):
        if grid.kind is not MapKind.MAX_SPACE:
            raise EnvError(f"MaxSpaceEnv needs a max-space map, got {grid.kind.value}")
        self.map = grid
        self.start = grid.start
        self.step_cap = default_step_cap(grid) if step_cap is None else int(step_cap)
        self.persist_capacity = persist_capacity
        self.agent = self.start
        self.steps_taken = 0
        self.done = False
        self.last_reason = Reason.ONGOING

    @property
    def n_states(self) -> int:
        return self.map.n_cells

    @property
    def target(self) -> Position:
        return self.map.max_capacity_cell()

    def state_index(self) -> int:
        return self.map.index(self.agent)

    def reset(self) -> Position:
        self.agent = self.start
        self.steps_taken = 0
        self.done = False
        self.last_reason = Reason.ONGOING
        return self.agent

    def step(self, action: int) -> StepOutcome:
        if self.done:
            raise EnvError("step() on a terminated episode; call reset()")
        self.steps_taken += 1
        target = self.agent.moved(action)
        value = int(self.map.cells[target]) if self.map.in_bounds(target) else WALL
        if value == WALL:
            outcome = StepOutcome(float(WALL), self.agent, True, Reason.COLLISION)
        elif value >= 2:
            self.agent = target
            outcome = StepOutcome(float(value), target, True, Reason.GOAL)
        else:
            # the object's own cell is plain floor once the agent has left it
            self.agent = target
            reason = Reason.STEP_LIMIT if self.steps_taken >= self.step_cap else Reason.ONGOING
            outcome = StepOutcome(float(OPEN_PATH), target, reason is Reason.STEP_LIMIT, reason)
        self.done = outcome.terminal
        self.last_reason = outcome.reason
        return outcome

    def is_win(self, outcome: StepOutcome) -> bool:
        return outcome.reason is Reason.GOAL and outcome.next_state == self.target

    def commit_storage(self) -> GridMap:
        """Store one unit at the cell the last episode ended on."""
        if not self.persist_capacity:
            raise EnvError("commit_storage requires persist_capacity=True")
        if self.last_reason is not Reason.GOAL:
            raise EnvError("last episode did not end at a storage cell")
        cells = self.map.cells.copy()
        cells[self.agent] -= 1
        self.map = self.map.with_cells(cells)
        self.last_reason = Reason.ONGOING
        return self.map


def maxspace_step(env: MaxSpaceEnv, action: int) -> StepOutcome:
    return env.step(action)


def commit_storage(env: MaxSpaceEnv) -> GridMap:
    return env.commit_storage()


@dataclass
class AgentSlot:
    position: Position
    destination: Position
    active: bool = True
    reason: Reason = Reason.ONGOING


@dataclass
class MultiAgentEnv:
    """Agents and moving humans sharing one floor plan.

    Agents resolve in index order. An agent collides (reward -1, inactive)
    when it moves into a wall, off the grid, onto a human, onto the cell an
    earlier agent just moved into, or swaps cells with an earlier agent.
    Reaching its own destination pays +1 and deactivates it. Inactive agents
    no longer block anyone. Humans move after the agents.
    """

    map: GridMap
    step_cap: int | None = None
    agent_starts: tuple[Position, ...] | None = None
    destinations: tuple[Position, ...] | None = None
    human_starts: tuple[Position, ...] | None = None
    humans_move: bool = True
    agents: list[AgentSlot] = field(init=False)
    humans: list[Position] = field(init=False)
    steps_taken: int = field(init=False, default=0)

    def __post_init__(self):
        if self.map.kind is not MapKind.MULTI_SCENE:
            raise EnvError(f"MultiAgentEnv needs a multi scene, got {self.map.kind.value}")
        if self.step_cap is None:
            self.step_cap = default_step_cap(self.map)
        # overrides allow reduced scenes (one agent, no humans) on the same floor
        if self.agent_starts is None:
            self.agent_starts = self.map.agent_starts
        if self.destinations is None:
            self.destinations = self.map.destinations
        if self.human_starts is None:
            self.human_starts = self.map.human_starts
        if len(self.agent_starts) != len(self.destinations):
            raise EnvError("one destination per agent required")
        self.reset()

    @property
    def n_agents(self) -> int:
        return len(self.agent_starts)

    @property
    def n_states(self) -> int:
        return self.map.n_cells

    @property
    def done(self) -> bool:
        return not any(a.active for a in self.agents)

    def reset(self) -> list[Position]:
        self.agents = [AgentSlot(s, d) for s, d in zip(self.agent_starts, self.destinations)]
        self.humans = list(self.human_starts)
        self.steps_taken = 0
        return [a.position for a in self.agents]

    def state_indices(self) -> list[int]:
        return [self.map.index(a.position) for a in self.agents]

    def step(self, actions: Sequence[int | None], rng: np.random.Generator) -> list[StepOutcome]:
        if len(actions) != self.n_agents:
            raise EnvError(f"expected {self.n_agents} actions, got {len(actions)}")
        if self.done:
            raise EnvError("step() on a terminated episode; call reset()")
        self.steps_taken += 1
        old = [a.position for a in self.agents]
        humans = set(self.humans)
        outcomes: list[StepOutcome | None] = [None] * self.n_agents
        claimed: dict[Position, int] = {}
        for i, (slot, action) in enumerate(zip(self.agents, actions)):
            if not slot.active:
                outcomes[i] = StepOutcome(0.0, slot.position, True, slot.reason)
                continue
            if action is None:
                raise EnvError(f"active agent {i} needs an action")
            target = slot.position.moved(int(action))
            partners = [
                j for j in range(i)
                if outcomes[j].reason is not Reason.COLLISION
                and old[j] == target and self.agents[j].position == slot.position
            ]
            if not self.map.passable(target) or target in humans or target in claimed or partners:
                slot.active = False
                slot.reason = Reason.COLLISION
                outcomes[i] = StepOutcome(-1.0, slot.position, True, Reason.COLLISION)
                for j in partners:
                    self._collide_after_move(j, old[j], outcomes, claimed)
                continue
            slot.position = target
            if target == slot.destination:
                slot.active = False
                slot.reason = Reason.GOAL
                outcomes[i] = StepOutcome(1.0, target, True, Reason.GOAL)
            else:
                claimed[target] = i
                outcomes[i] = StepOutcome(0.0, target, False, Reason.ONGOING)

        if self.humans and self.humans_move:
            self.humans = advance_humans(self, rng)

        if self.steps_taken >= self.step_cap:
            for i, slot in enumerate(self.agents):
                if slot.active:
                    slot.active = False
                    slot.reason = Reason.STEP_LIMIT
                    outcomes[i] = StepOutcome(outcomes[i].reward, slot.position, True, Reason.STEP_LIMIT)
        return outcomes  # type: ignore[return-value]

    def _collide_after_move(self, j: int, back_to: Position, outcomes: list, claimed: dict) -> None:
        # a swap partner that already moved is put back and marked as collided
        slot = self.agents[j]
        claimed.pop(slot.position, None)
        slot.position = back_to
        slot.active = False
        slot.reason = Reason.COLLISION
        outcomes[j] = StepOutcome(-1.0, back_to, True, Reason.COLLISION)


def multi_step(env: MultiAgentEnv, actions: Sequence[int | None], rng: np.random.Generator) -> list[StepOutcome]:
    return env.step(actions, rng)


def human_moves(env: MultiAgentEnv, index: int, humans: Sequence[Position]) -> list[Position]:
    """Cells human ``index`` may occupy next: stay, or an adjacent free floor cell."""
    here = humans[index]
    blocked = {a.position for a in env.agents} | set(humans) | set(env.destinations)
    options = [here]
    for a in range(N_ACTIONS):
        nxt = here.moved(a)
        if env.map.passable(nxt) and nxt not in blocked:
            options.append(nxt)
    return options


def advance_humans(env: MultiAgentEnv, rng: np.random.Generator) -> list[Position]:
    """Move each human, in index order, uniformly among its legal options."""
    humans = list(env.humans)
    for k in range(len(humans)):
        options = human_moves(env, k, humans)
        if len(options) > 1:
            humans[k] = options[int(rng.integers(len(options)))]
    return humans
