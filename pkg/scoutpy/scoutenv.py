"""The environment module of scoutpy: deterministic grid MDPs (open and
    4-room labyrinths, the multi-step key maze), their binary-plane
    observations and reachability analysis.

    Layouts are text grids, one character per cell: '#' wall, '.' free,
    'K' key, 'D' door, 'R' reward, 'S' start. The bundled key maze is a
    reconstruction: only its room structure (key and start east, door
    and reward west) is fixed by design."""

import collections
import numpy as np
from abc import ABCMeta, abstractmethod
from . import log_util
from .errors import LayoutError, EnvironmentStepError
try:
    import pathlib
except ImportError:
    import pathlib2 as pathlib

logger = log_util.get_logger(__name__)

_layout_dir = pathlib.Path(__file__).parent / 'layouts'
_layout_chars = set('#.KDRS')

## up, down, left, right
ACTIONS = ((-1, 0), (1, 0), (0, -1), (0, 1))
ACTION_NAMES = ('up', 'down', 'left', 'right')

StepOutcome = collections.namedtuple(
    'StepOutcome', ['observation', 'r_extr', 'gamma', 'terminal', 'state'])


class Layout:
    """A parsed layout: wall grid plus the special cells."""

    def __init__(self, walls, start, key = None, doors = (), reward = None):
        self.walls = np.asarray(walls, dtype=bool)
        self.start = start
        self.key = key
        self.doors = tuple(doors)
        self.reward = reward

    @property
    def height(self):
        return self.walls.shape[0]

    @property
    def width(self):
        return self.walls.shape[1]

    @classmethod
    def parse(cls, text):
        """Parses a layout grid. Errors name the offending row and column."""
        rows = [line.rstrip('\r') for line in text.split('\n')]
        while rows and not rows[-1].strip():
            rows.pop()
        if not rows:
            raise LayoutError(0, 0, 'empty layout')
        width = len(rows[0])
        walls = np.zeros((len(rows), width), dtype=bool)
        found = {'S': [], 'K': [], 'D': [], 'R': []}
        for r, line in enumerate(rows):
            if len(line) != width:
                raise LayoutError(r, min(len(line), width),
                                  'row has %d cells, expected %d' % (len(line), width))
            for c, char in enumerate(line):
                if char not in _layout_chars:
                    raise LayoutError(r, c, 'unknown cell character %r' % char)
                border = r in (0, len(rows) - 1) or c in (0, width - 1)
                if border and char != '#':
                    raise LayoutError(r, c, 'border cells must be walls')
                walls[r, c] = (char == '#')
                if char in found:
                    found[char].append((r, c))
        if len(found['S']) != 1:
            raise LayoutError(0, 0, 'expected exactly one start cell, found %d' % len(found['S']))
        for char in ('K', 'R'):
            if len(found[char]) > 1:
                r, c = found[char][1]
                raise LayoutError(r, c, 'more than one %r cell' % char)
        return cls(walls, found['S'][0],
                   key=found['K'][0] if found['K'] else None,
                   doors=found['D'],
                   reward=found['R'][0] if found['R'] else None)

    @classmethod
    def load(cls, name):
        """Loads a bundled layout by name (e.g. 'four_room')."""
        path = _layout_dir / (name + '.txt')
        if not path.exists():
            raise ValueError('No bundled layout named %r' % name)
        return cls.parse(path.read_text())


class ScoutEnv(metaclass=ABCMeta):
    """An abstract deterministic grid MDP with four cardinal actions."""

    n_actions = len(ACTIONS)

    @abstractmethod
    def __init__(self, layout, discount = 0.8):
        """Initializes the environment from a Layout"""
        self._layout = layout
        self._discount = discount
        self._state = None
        self._terminated = False
        self._step_count = 0

    # properties
    @property
    def layout(self):
        """Gets the parsed layout"""
        return self._layout

    @property
    def height(self):
        return self._layout.height

    @property
    def width(self):
        return self._layout.width

    @property
    def discount(self):
        """Gets the discount returned for non-terminal steps"""
        return self._discount

    @property
    def state(self):
        """Gets the current state as a hashable tuple"""
        return self._state

    @property
    def terminated(self):
        return self._terminated

    @property
    def step_count(self):
        return self._step_count

    @property
    def obs_size(self):
        """Gets the flattened observation length"""
        return self.n_planes * self.height * self.width

    @property
    @abstractmethod
    def n_planes(self):
        """Number of stacked binary planes in an observation"""

    @property
    @abstractmethod
    def start_state(self):
        """The fixed initial state"""

    @abstractmethod
    def _successor(self, state, action):
        """Returns (next_state, r_extr, terminal) without mutating self."""

    @abstractmethod
    def observation_for(self, state):
        """Returns the flattened observation of an arbitrary state."""

    @staticmethod
    def position(state):
        """Gets the (row, col) part of a state"""
        return (state[0], state[1])

    def _passable(self, row, col, state):
        return not self._layout.walls[row, col]

    def _move(self, state, action):
        if action not in range(len(ACTIONS)):
            raise EnvironmentStepError('Unknown action id %r' % (action,))
        dr, dc = ACTIONS[action]
        row, col = state[0] + dr, state[1] + dc
        if self._passable(row, col, state):
            return row, col
        return state[0], state[1]

    # episode functions
    def reset(self, rng = None):
        """Puts the agent back at the start; returns the observation. The
            start is fixed, so rng is accepted only for interface symmetry."""
        self._state = self.start_state
        self._terminated = False
        self._step_count = 0
        return self.observation_for(self._state)

    def step(self, action):
        """Moves one cell; blocked moves leave the position unchanged."""
        if self._state is None:
            raise RuntimeError('Environment not reset; call reset() first')
        if self._terminated:
            raise RuntimeError('Episode has terminated; call reset()')
        next_state, r_extr, terminal = self._successor(self._state, int(action))
        row, col = self.position(next_state)
        if self._layout.walls[row, col]:
            raise RuntimeError('Agent entered wall cell %s' % ((row, col),))
        self._state = next_state
        self._step_count += 1
        self._terminated = terminal
        gamma = 0.0 if terminal else self._discount
        return StepOutcome(self.observation_for(next_state), r_extr, gamma,
                           terminal, next_state)

    def peek(self, action):
        """Returns the state that action would lead to, without stepping."""
        return self._successor(self._state, int(action))[0]

    def reachable_states(self):
        """Flood-fills from the start over legal moves. Terminal states are
            included but not expanded."""
        start = self.start_state
        seen = {start}
        frontier = collections.deque([start])
        while frontier:
            state = frontier.popleft()
            for action in range(len(ACTIONS)):
                next_state, _, terminal = self._successor(state, action)
                if next_state in seen:
                    continue
                seen.add(next_state)
                if not terminal:
                    frontier.append(next_state)
        return seen

    def _plane(self, cells):
        plane = np.zeros((self.height, self.width))
        for row, col in cells:
            plane[row, col] = 1.0
        return plane


class GridWorld(ScoutEnv):
    """A labyrinth: walls and the agent, no rewards, never terminates.
        States are (row, col)."""

    def __init__(self, layout, discount = 0.8):
        super().__init__(layout, discount)

    @property
    def n_planes(self):
        return 2

    @property
    def start_state(self):
        return tuple(self._layout.start)

    def _successor(self, state, action):
        return self._move(state, action), 0.0, False

    def observation_for(self, state):
        planes = [self._layout.walls.astype(np.float64),
                  self._plane([self.position(state)])]
        return np.stack(planes).reshape(-1)


class KeyMaze(ScoutEnv):
    """The multi-step maze: the door blocks the west room until the key is
        collected (+1); the reward cell (+10) ends the episode, as does
        reaching max_steps. States are (row, col, has_key)."""

    def __init__(self, layout, discount = 0.8, max_steps = 4000, key_reward = 1.0,
                 goal_reward = 10.0):
        if layout.key is None or layout.reward is None or not layout.doors:
            raise ValueError('Key maze layout needs a key, a door and a reward cell')
        super().__init__(layout, discount)
        self.max_steps = max_steps
        self.key_reward = key_reward
        self.goal_reward = goal_reward

    @property
    def n_planes(self):
        return 5

    @property
    def start_state(self):
        return (self._layout.start[0], self._layout.start[1], False)

    @property
    def has_key(self):
        return bool(self._state[2])

    def _passable(self, row, col, state):
        if self._layout.walls[row, col]:
            return False
        if (row, col) in self._layout.doors:
            return bool(state[2])
        return True

    def _successor(self, state, action):
        row, col = self._move(state, action)
        has_key = bool(state[2])
        r_extr = 0.0
        if (row, col) == self._layout.key and not has_key:
            has_key = True
            r_extr = self.key_reward
        terminal = False
        if (row, col) == self._layout.reward:
            r_extr = self.goal_reward
            terminal = True
        return (row, col, has_key), r_extr, terminal

    def step(self, action):
        outcome = super().step(action)
        if not outcome.terminal and self._step_count >= self.max_steps:
            self._terminated = True
            logger.info('Key maze episode truncated at %d steps', self._step_count)
            outcome = outcome._replace(gamma=0.0, terminal=True)
        return outcome

    def observation_for(self, state):
        has_key = bool(state[2])
        planes = [self._layout.walls.astype(np.float64),
                  self._plane([self.position(state)]),
                  self._plane([] if has_key else [self._layout.key]),
                  self._plane([] if has_key else self._layout.doors),
                  self._plane([self._layout.reward])]
        return np.stack(planes).reshape(-1)


ENV_IDS = ('open_labyrinth', 'four_room', 'key_maze')


def make_env(env_id, discount = 0.8, max_steps = 4000, layout = None):
    """Builds a bundled environment by id. layout (a Layout) overrides the
        bundled grid, so variants can be tested."""
    if env_id not in ENV_IDS:
        raise ValueError('Unknown environment %r; expected one of %s' % (env_id, ENV_IDS))
    layout = layout if layout is not None else Layout.load(env_id)
    if env_id == 'key_maze':
        return KeyMaze(layout, discount=discount, max_steps=max_steps)
    return GridWorld(layout, discount=discount)
