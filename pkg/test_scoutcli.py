"""Test cases for scoutpy.scoutcli"""

import json
import pandas as pd
import pytest
from scoutpy.scoutcli import run_cli

small = {'n_init': 6, 'n_max': 10, 'n_iters': 2, 'batch_size': 4, 'depth': 1,
         'buffer_capacity': 8}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(small))
    return path


class TestRun:
    """Test the run and sweep commands"""

    def test_run(self, tmp_path, config_file, capsys):
        """Test case: run writes the run log, metrics and summary and prints a digest"""
        out = tmp_path / 'run'
        assert run_cli(['run', '--config', str(config_file), '--seed', '7', '--out', str(out)]) == 0
        for name in ('runlog.ndjson', 'metrics.csv', 'summary.json', 'config.json'):
            assert (out / name).exists()
        assert json.loads((out / 'config.json').read_text())['seed'] == 7
        printed = json.loads(capsys.readouterr().out)
        assert printed['seed'] == 7 and printed['steps'] == 10

    def test_flags_override_file(self, tmp_path, config_file):
        """Test case: --policy and --plan-trace override the file"""
        out = tmp_path / 'count'
        assert run_cli(['run', '--config', str(config_file), '--policy', 'count',
                        '--out', str(out)]) == 0
        assert json.loads((out / 'summary.json').read_text())['policy'] == 'count'
        traced = tmp_path / 'traced'
        assert run_cli(['run', '--config', str(config_file), '--plan-trace',
                        '--out', str(traced)]) == 0
        assert (traced / 'plan_trace.ndjson').exists()

    def test_sweep(self, tmp_path, config_file):
        """Test case: sweep runs consecutive seeds and writes the aggregate table"""
        out = tmp_path / 'sweep'
        assert run_cli(['sweep', '--config', str(config_file), '--seed', '3', '--seeds', '2',
                        '--policy', 'random', '--out', str(out)]) == 0
        assert (out / 'seed_3' / 'summary.json').exists()
        assert (out / 'seed_4' / 'summary.json').exists()
        summaries = pd.read_csv(str(out / 'summaries.csv'))
        assert summaries['seed'].tolist() == [3, 4]
        table = pd.read_csv(str(out / 'aggregate.csv'))
        assert list(table.columns) == ['metric', 'mean', 'stderr', 'n']
        assert table.loc[table['metric'] == 'coverage_fraction', 'n'].item() == 2


class TestPostProcessing:
    """Test the metrics and export commands"""

    @pytest.fixture
    def run_dir(self, tmp_path, config_file):
        out = tmp_path / 'run'
        assert run_cli(['run', '--config', str(config_file), '--out', str(out)]) == 0
        return out

    def test_metrics(self, run_dir):
        """Test case: recomputed coverage matches the logged metrics"""
        assert run_cli(['metrics', '--run', str(run_dir)]) == 0
        coverage = pd.read_csv(str(run_dir / 'coverage.csv'))
        logged = pd.read_csv(str(run_dir / 'metrics.csv'))
        assert coverage['unique_visited'].tolist() == logged['unique_visited'].tolist()
        assert coverage['coverage_fraction'].tolist() == logged['coverage_fraction'].tolist()

    def test_heatmap(self, run_dir, tmp_path):
        """Test case: heatmap counts sum to the steps at each checkpoint"""
        out = tmp_path / 'maps'
        assert run_cli(['export', 'heatmap', '--run', str(run_dir), '--at', '5', '10',
                        '--out', str(out)]) == 0
        frame = pd.read_csv(str(out / 'heatmap.csv'))
        assert frame.groupby('step')['count'].sum().tolist() == [5, 10]

    def test_representation(self, run_dir):
        """Test case: the representation export reloads the saved model"""
        assert run_cli(['export', 'representation', '--run', str(run_dir)]) == 0
        states = pd.read_csv(str(run_dir / 'representation_states.csv'))
        assert list(states.columns) == ['state_id', 'row', 'col', 'side', 'x0', 'x1']

    def test_representation_needs_model(self, tmp_path, config_file):
        """Test case: a baseline run has no model to export"""
        out = tmp_path / 'random'
        assert run_cli(['run', '--config', str(config_file), '--policy', 'random',
                        '--out', str(out)]) == 0
        assert run_cli(['export', 'representation', '--run', str(out)]) == 2


class TestErrors:
    """Test exit codes for bad invocations"""

    def test_missing_config(self, tmp_path):
        """Test case: a missing config file exits with 2"""
        assert run_cli(['run', '--config', str(tmp_path / 'none.json'),
                        '--out', str(tmp_path / 'out')]) == 2

    def test_bad_config_value(self, tmp_path):
        """Test case: an out-of-range value exits with 2 and names the key"""
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps({'epsilon': 1.5}))
        assert run_cli(['run', '--config', str(path), '--out', str(tmp_path / 'out')]) == 2

    @pytest.mark.parametrize('argv', [
        [],
        ['run'],
        ['run', '--out', 'x', '--env', 'acrobot'],
        ['dance'],
        ['run', '--out', 'x', '--depth', 'deep'],
        ])
    def test_bad_flags(self, argv):
        """Test case: usage errors exit with 2"""
        assert run_cli(argv) == 2
