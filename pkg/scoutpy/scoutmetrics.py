"""The metrics module of scoutpy: state coverage, visit-count heatmaps,
    representation dumps and multi-seed aggregates, all as pandas data
    frames.

    Column orders are fixed; README.md lists them."""

import collections
import numpy as np
import pandas as pd
from . import log_util
from .scoutnets import encode_numpy
from .utils import recast_df
try:
    import pathlib
except ImportError:
    import pathlib2 as pathlib

logger = log_util.get_logger(__name__)

COVERAGE_COLUMNS = ['step', 'unique_visited', 'coverage_fraction', 'visited_once_fraction',
                    'mean_r_intr']
LOSS_COLUMNS = ['L_Q', 'L_R', 'L_G', 'L_tau', 'L_d1', 'L_csc']
METRICS_COLUMNS = COVERAGE_COLUMNS + LOSS_COLUMNS + ['iters_used']
HEATMAP_COLUMNS = ['step', 'row', 'col', 'count']
TRANSITION_COLUMNS = ['from_id', 'action', 'to_id']

CoverageMetrics = collections.namedtuple('CoverageMetrics', COVERAGE_COLUMNS)


def _as_state(state):
    """States come back from JSON as lists; make them hashable again."""
    return tuple(state)


class CoverageTracker:
    """Counts visits per state. The start state counts as visited once."""

    def __init__(self, n_reachable, start_state = None):
        if n_reachable < 1:
            raise ValueError('n_reachable must be positive')
        self.n_reachable = n_reachable
        self.counts = collections.Counter()
        if start_state is not None:
            self.counts[_as_state(start_state)] += 1

    @property
    def unique_visited(self):
        return len(self.counts)

    def visit(self, state):
        self.counts[_as_state(state)] += 1

    def metrics(self, step, mean_r_intr = 0.0):
        """Gets the CoverageMetrics after step environment steps"""
        unique = len(self.counts)
        once = sum(1 for count in self.counts.values() if count == 1)
        return CoverageMetrics(
            step, unique, unique / float(self.n_reachable),
            once / float(unique) if unique else 0.0, float(mean_r_intr))


def compute_coverage(steps, env):
    """Replays the logged next states of a run and returns the coverage
        time series as a data frame (one row per step)."""
    tracker = CoverageTracker(len(env.reachable_states()), env.start_state)
    rows = []
    for record in steps:
        tracker.visit(record['next_state'])
        rows.append(tracker.metrics(record['t'], record.get('mean_r_intr', 0.0)))
    return recast_df(pd.DataFrame(rows, columns=COVERAGE_COLUMNS))


def metrics_frame(steps):
    """The metrics.csv frame from logged step records. Loss columns are
        empty at steps without a training phase."""
    rows = []
    for record in steps:
        row = {'step': record['t']}
        for column in METRICS_COLUMNS[1:]:
            value = record.get(column)
            row[column] = np.nan if value is None and column in LOSS_COLUMNS else value
        rows.append(row)
    return recast_df(pd.DataFrame(rows, columns=METRICS_COLUMNS))


def coverage_at(frame, step):
    """Coverage fraction after step steps, or None if the run was shorter."""
    reached = frame[frame['step'] <= step]
    if reached.empty or int(frame['step'].max()) < step:
        return None
    return float(reached['coverage_fraction'].iloc[-1])


def visit_counts(steps, env, upto = None):
    """Grid of visit counts of the next states of the first upto steps (all
        by default). Its sum equals the number of steps counted."""
    grid = np.zeros((env.height, env.width), dtype=np.int64)
    for record in steps:
        if upto is not None and record['t'] > upto:
            break
        row, col = env.position(record['next_state'])
        grid[row, col] += 1
    return grid


def heatmap_frame(steps, env, at = None):
    """Long-format heatmaps (step, row, col, count) at each checkpoint in
        at; defaults to the final step. Walls are omitted."""
    last = steps[-1]['t'] if steps else 0
    checkpoints = sorted(set(at)) if at else [last]
    rows = []
    for checkpoint in checkpoints:
        grid = visit_counts(steps, env, upto=checkpoint)
        for row in range(env.height):
            for col in range(env.width):
                if not env.layout.walls[row, col]:
                    rows.append((min(checkpoint, last), row, col, int(grid[row, col])))
    return recast_df(pd.DataFrame(rows, columns=HEATMAP_COLUMNS))


def side_of(env_id, row, col, height, width):
    """Which half (open labyrinth) or room (4-room) a cell lies in."""
    horizontal = 'west' if col < width // 2 else 'east'
    if env_id == 'four_room':
        return ('north' if row < height // 2 else 'south') + horizontal
    return horizontal


def export_representation(buffer, model, path, env_id = 'open_labyrinth', env_shape = None):
    """Writes the encoded buffered states and their transitions.

        path is a directory; two files are written into it:
        representation_states.csv (state_id, row, col, then has_key for the
        key maze or side otherwise, then x0..x{n_X-1}) and
        representation_transitions.csv (from_id, action, to_id). State ids
        follow first appearance in the buffer. Returns both frames."""
    path = pathlib.Path(path)
    if not path.exists():
        path.mkdir(parents=True)
    ids = collections.OrderedDict()
    observations = []
    for record in buffer:
        for state, obs in ((record.state, record.obs), (record.next_state, record.next_obs)):
            state = _as_state(state)
            if state not in ids:
                ids[state] = len(ids)
                observations.append(obs)
    n_x = model.n_x
    encoded = encode_numpy(model, np.stack(observations)) if observations \
        else np.zeros((0, n_x))
    height, width = env_shape if env_shape is not None else (0, 0)
    rows = []
    for (state, state_id), x in zip(ids.items(), encoded):
        row = {'state_id': state_id, 'row': state[0], 'col': state[1]}
        if env_id == 'key_maze':
            row['has_key'] = int(bool(state[2]))
        else:
            row['side'] = side_of(env_id, state[0], state[1], height, width)
        for i in range(n_x):
            row['x%d' % i] = x[i]
        rows.append(row)
    flag = 'has_key' if env_id == 'key_maze' else 'side'
    columns = ['state_id', 'row', 'col', flag] + ['x%d' % i for i in range(n_x)]
    states = recast_df(pd.DataFrame(rows, columns=columns))
    transitions = recast_df(pd.DataFrame(
        [(ids[_as_state(r.state)], r.action, ids[_as_state(r.next_state)]) for r in buffer],
        columns=TRANSITION_COLUMNS))
    states.to_csv(str(path / 'representation_states.csv'), index=False)
    transitions.to_csv(str(path / 'representation_transitions.csv'), index=False)
    logger.info('Wrote representation of %d states to %s', len(states), path)
    return states, transitions


def aggregate(summaries, metrics = None):
    """Mean and standard error (sample std / sqrt(n)) of each numeric
        summary metric over seeds. Metrics missing from a summary (e.g.
        steps_to_goal when the goal was never reached) are left out of
        that metric's n. One seed gives a standard error of 0."""
    frame = pd.DataFrame(summaries)
    if metrics is None:
        metrics = [c for c in frame.columns
                   if c != 'seed' and pd.api.types.is_numeric_dtype(frame[c])
                   and not pd.api.types.is_bool_dtype(frame[c])]
    rows = []
    for metric in metrics:
        values = pd.to_numeric(frame[metric], errors='coerce').dropna() \
            if metric in frame.columns else pd.Series([], dtype=float)
        n = len(values)
        mean = float(values.mean()) if n else np.nan
        stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else (0.0 if n else np.nan)
        rows.append({'metric': metric, 'mean': mean, 'stderr': stderr, 'n': n})
    return recast_df(pd.DataFrame(rows, columns=['metric', 'mean', 'stderr', 'n']))
