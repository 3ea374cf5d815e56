"""Test cases for scoutpy.scoutmetrics"""

import numpy as np
import pandas as pd
import pytest
from scoutpy.scoutenv import GridWorld, Layout, make_env
from scoutpy.scoutmetrics import (HEATMAP_COLUMNS, METRICS_COLUMNS, CoverageTracker, aggregate,
                                  compute_coverage, coverage_at, export_representation,
                                  heatmap_frame, metrics_frame, side_of, visit_counts)
from scoutpy.scoutnovelty import HistoryBuffer, TransitionRecord
from testutil import util as shared

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3


class util(shared):
    """Contains helpers shared by the test classes"""

    def play(env, actions):
        """Steps env through actions, returning logged step records and the
            matching history buffer"""
        obs = env.reset()
        steps = []
        buffer = HistoryBuffer(capacity=len(actions))
        for t, action in enumerate(actions, start=1):
            state = env.state
            outcome = env.step(action)
            buffer.append(TransitionRecord(state, obs, action, outcome.r_extr, 0.0,
                                           outcome.gamma, outcome.state, outcome.observation))
            steps.append({'t': t, 'state': list(state), 'action': action,
                          'next_state': list(outcome.state), 'mean_r_intr': 0.0})
            obs = outcome.observation
        return steps, buffer

    def sweep(env):
        """Boustrophedon walk over an open rectangle from its top-left cell"""
        actions = []
        inner = env.width - 2
        for row in range(env.height - 2):
            actions += [RIGHT if row % 2 == 0 else LEFT] * (inner - 1)
            if row < env.height - 3:
                actions.append(DOWN)
        return actions


class TestCoverage:
    """Test the coverage metrics"""

    box = Layout.parse('######\n#S...#\n#....#\n#....#\n######')

    def test_single_step(self):
        """Test case: one move reaches two states, one of them visited once"""
        tracker = CoverageTracker(361, (10, 10))
        tracker.visit((10, 11))
        metrics = tracker.metrics(1)
        assert metrics.unique_visited == 2
        assert abs(metrics.coverage_fraction - 2 / 361.0) < 1e-15
        assert metrics.visited_once_fraction == 1.0

    def test_oscillation(self):
        """Test case: bouncing between two cells leaves no state visited exactly once"""
        steps, _ = util.play(make_env('open_labyrinth'), [RIGHT, LEFT] * 5)
        frame = compute_coverage(steps, make_env('open_labyrinth'))
        last = frame.iloc[-1]
        assert last['unique_visited'] == 2
        assert last['visited_once_fraction'] == 0.0
        assert list(frame['step']) == list(range(1, 11))

    def test_full_sweep(self):
        """Test case: visiting every reachable cell gives coverage 1"""
        env = GridWorld(self.box)
        actions = util.sweep(env)
        steps, _ = util.play(env, actions)
        frame = compute_coverage(steps, env)
        assert frame['coverage_fraction'].iloc[-1] == 1.0
        assert frame['unique_visited'].iloc[-1] == 12
        assert frame['visited_once_fraction'].iloc[-1] == 1.0
        assert frame['coverage_fraction'].is_monotonic_increasing

    def test_coverage_at(self):
        """Test case: the checkpoint value is None when the run was shorter"""
        steps, _ = util.play(make_env('open_labyrinth'), [RIGHT] * 5)
        frame = compute_coverage(steps, make_env('open_labyrinth'))
        assert abs(coverage_at(frame, 3) - 4 / 361.0) < 1e-15
        assert coverage_at(frame, 500) is None


class TestMetricsFrame:
    """Test the per-step metrics table"""

    def test_columns_and_gaps(self):
        """Test case: columns are in order and untrained steps leave loss cells empty"""
        steps = [
            {'t': 1, 'unique_visited': 2, 'coverage_fraction': 0.5,
             'visited_once_fraction': 1.0, 'mean_r_intr': 0.0, 'iters_used': None},
            {'t': 2, 'unique_visited': 3, 'coverage_fraction': 0.75,
             'visited_once_fraction': 1.0, 'mean_r_intr': 0.2, 'iters_used': 4,
             'L_Q': 0.1, 'L_R': 0.2, 'L_G': 0.3, 'L_tau': 0.4, 'L_d1': 0.5, 'L_csc': 0.6},
            ]
        frame = metrics_frame(steps)
        assert list(frame.columns) == METRICS_COLUMNS
        assert pd.isna(frame['L_tau'].iloc[0]) and frame['L_tau'].iloc[1] == 0.4
        assert pd.isna(frame['iters_used'].iloc[0]) and frame['iters_used'].iloc[1] == 4


class TestHeatmap:
    """Test the visit-count heatmaps"""

    def test_sums_match_steps(self):
        """Test case: each checkpoint's counts sum to the steps taken so far"""
        env = make_env('four_room')
        actions = list(np.random.default_rng(0).integers(0, 4, 60))
        steps, _ = util.play(env, actions)
        frame = heatmap_frame(steps, env, at=[20, 60])
        assert list(frame.columns) == HEATMAP_COLUMNS
        totals = frame.groupby('step')['count'].sum()
        assert totals[20] == 20 and totals[60] == 60
        assert visit_counts(steps, env).sum() == 60

    def test_walls_omitted(self):
        """Test case: one row per free cell"""
        env = make_env('open_labyrinth')
        steps, _ = util.play(env, [UP])
        frame = heatmap_frame(steps, env)
        assert len(frame) == 361
        assert frame['step'].unique().tolist() == [1]
        assert frame.loc[(frame['row'] == 9) & (frame['col'] == 10), 'count'].item() == 1


class TestRepresentation:
    """Test the encoded-state dumps"""

    def test_sides(self):
        """Test case: open labyrinth halves and 4-room quadrants"""
        assert side_of('open_labyrinth', 5, 3, 21, 21) == 'west'
        assert side_of('open_labyrinth', 5, 15, 21, 21) == 'east'
        assert side_of('four_room', 15, 3, 21, 21) == 'southwest'

    def test_key_maze_export(self, tmp_path):
        """Test case: key maze states carry a has_key flag and three coordinates"""
        env = make_env('key_maze')
        steps, buffer = util.play(env, [UP] * 10 + [RIGHT] * 3 + [LEFT])
        model = util.small_model(0, obs_size=env.obs_size, n_x=3)
        states, transitions = export_representation(buffer, model, tmp_path, env_id='key_maze')
        assert list(states.columns) == ['state_id', 'row', 'col', 'has_key', 'x0', 'x1', 'x2']
        assert states['state_id'].tolist() == list(range(len(states)))
        assert states['has_key'].iloc[0] == 0 and states['has_key'].iloc[-1] == 1
        assert len(transitions) == 14
        assert (tmp_path / 'representation_states.csv').exists()
        written = pd.read_csv(str(tmp_path / 'representation_transitions.csv'))
        assert list(written.columns) == ['from_id', 'action', 'to_id']

    def test_labyrinth_export(self, tmp_path):
        """Test case: labyrinth states carry their side and revisits share an id"""
        env = make_env('open_labyrinth')
        _, buffer = util.play(env, [LEFT, RIGHT, LEFT])
        model = util.small_model(0, obs_size=env.obs_size, n_x=2)
        states, transitions = export_representation(buffer, model, tmp_path,
                                                    env_shape=(env.height, env.width))
        assert len(states) == 2
        assert states['side'].tolist() == ['east', 'west']
        assert transitions['from_id'].tolist() == [0, 1, 0]


class TestAggregate:
    """Test multi-seed aggregation"""

    def test_mean_and_stderr(self):
        """Test case: mean and sample standard error over three seeds"""
        summaries = [{'seed': s, 'coverage_fraction': c, 'aborted': False}
                     for s, c in zip(range(3), [0.5, 0.7, 0.9])]
        frame = aggregate(summaries)
        assert frame['metric'].tolist() == ['coverage_fraction']
        row = frame.iloc[0]
        assert abs(row['mean'] - 0.7) < 1e-12
        assert abs(row['stderr'] - 0.2 / np.sqrt(3)) < 1e-12
        assert row['n'] == 3

    def test_missing_values(self):
        """Test case: a metric absent from some seeds counts only the others; one seed has stderr 0"""
        summaries = [{'seed': 0, 'steps_to_goal': 400}, {'seed': 1, 'steps_to_goal': None}]
        row = aggregate(summaries, metrics=['steps_to_goal']).iloc[0]
        assert row['mean'] == 400.0 and row['stderr'] == 0.0 and row['n'] == 1

    def test_tracker_needs_states(self):
        """Test case: a tracker over no reachable states is rejected"""
        with pytest.raises(ValueError):
            CoverageTracker(0)
