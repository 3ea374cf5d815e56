"""The command line of scoutpy.

    scout run --config c.json --seed 7 --out runs/seed7
    scout sweep --config c.json --seeds 5 --out runs/
    scout metrics --run runs/seed7
    scout export heatmap --run runs/seed7 --at 100 500
    scout export representation --run runs/seed7

    Exit codes: 0 success, 1 aborted run (non-finite values), 2 usage or
    configuration errors."""

import argparse
import json
import multiprocessing
import sys
import pandas as pd
from . import log_util
from .__init__ import version
from .errors import ConfigError, NonFiniteError, LayoutError
from .scoutconfig import RunConfig, parse_config, POLICIES
from .scoutenv import ENV_IDS, make_env
from .scoutnets import AgentModel
from .scoutnovelty import TransitionRecord
from .scoutagent import run_policy
from .scoutmetrics import compute_coverage, heatmap_frame, export_representation, aggregate
from .utils import read_ndjson
try:
    import pathlib
except ImportError:
    import pathlib2 as pathlib

logger = log_util.get_logger(__name__)

SWEEP_METRICS = ['coverage_fraction', 'coverage_at_500', 'coverage_at_1000',
                 'visited_once_fraction', 'unique_visited', 'mean_r_intr', 'steps_to_goal',
                 'total_iters', 'mean_pairwise_distance']


def _add_run_flags(parser):
    parser.add_argument('--config', help='RunConfig JSON file (defaults when omitted)')
    parser.add_argument('--seed', type=int, help='random seed')
    parser.add_argument('--out', required=True, help='output directory')
    parser.add_argument('--env', choices=ENV_IDS)
    parser.add_argument('--policy', choices=POLICIES)
    parser.add_argument('--depth', type=int, help='planning depth D')
    parser.add_argument('--plan-trace', action='store_true', default=None,
                        help='dump every planning tree to plan_trace.ndjson')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='scout', description='Novelty search in a learned abstract state space.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + version)
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    run = commands.add_parser('run', help='run one exploration')
    _add_run_flags(run)

    sweep = commands.add_parser('sweep', help='run consecutive seeds and aggregate')
    _add_run_flags(sweep)
    sweep.add_argument('--seeds', type=int, default=5, help='number of seeds')
    sweep.add_argument('--workers', type=int, default=1, help='parallel processes')

    metrics = commands.add_parser('metrics', help='recompute coverage from a run log')
    metrics.add_argument('--run', required=True, help='run directory')

    export = commands.add_parser('export', help='export heatmaps or representations')
    export.add_argument('kind', choices=('heatmap', 'representation'))
    export.add_argument('--run', required=True, help='run directory')
    export.add_argument('--at', type=int, nargs='+', help='heatmap step checkpoints')
    export.add_argument('--out', help='output directory (defaults to the run directory)')
    return parser


def _config_from_args(args):
    if args.config is not None and not pathlib.Path(args.config).exists():
        raise FileNotFoundError('config file %s does not exist' % args.config)
    return parse_config(args.config, {
        'seed': args.seed, 'env': args.env, 'policy': args.policy,
        'depth': args.depth, 'plan_trace': args.plan_trace})


def _load_run(run_dir):
    run_dir = pathlib.Path(run_dir)
    with open(str(run_dir / 'config.json')) as f:
        config = RunConfig(**json.load(f))
    return run_dir, config


def _sweep_worker(job):
    values, out_dir = job
    config = RunConfig(**values)
    return run_policy(config, out_dir).summary


def cmd_run(args):
    config = _config_from_args(args)
    summary = run_policy(config, args.out).summary
    print(json.dumps({key: summary[key] for key in
                      ('policy', 'env', 'seed', 'steps', 'coverage_fraction', 'steps_to_goal')},
                     sort_keys=True))
    return 0


def cmd_sweep(args):
    config = _config_from_args(args)
    if args.seeds < 1 or args.workers < 1:
        raise ConfigError('seeds' if args.seeds < 1 else 'workers', 'must be >= 1')
    out = pathlib.Path(args.out)
    jobs = []
    for seed in range(config.seed, config.seed + args.seeds):
        jobs.append((dict(config.to_dict(), seed=seed), str(out / ('seed_%d' % seed))))
    if args.workers > 1:
        with multiprocessing.Pool(processes=args.workers) as pool:
            summaries = pool.map(_sweep_worker, jobs)
    else:
        summaries = [_sweep_worker(job) for job in jobs]
    per_seed = pd.DataFrame(summaries)
    per_seed.to_csv(str(out / 'summaries.csv'), index=False)
    table = aggregate(summaries, [m for m in SWEEP_METRICS if m in per_seed.columns])
    table.to_csv(str(out / 'aggregate.csv'), index=False)
    logger.info('Sweep of %d seeds written to %s', args.seeds, out)
    print(table.to_string(index=False))
    return 0


def cmd_metrics(args):
    run_dir, config = _load_run(args.run)
    env = make_env(config.env, discount=config.gamma, max_steps=config.max_episode_steps)
    frame = compute_coverage(read_ndjson(run_dir / 'runlog.ndjson'), env)
    frame.to_csv(str(run_dir / 'coverage.csv'), index=False)
    if len(frame):
        print(frame.iloc[-1].to_string())
    return 0


def _buffer_records(run_dir, env):
    records = []
    for row in read_ndjson(run_dir / 'buffer.ndjson'):
        state, next_state = tuple(row['state']), tuple(row['next_state'])
        records.append(TransitionRecord(
            state, env.observation_for(state), row['action'], row['r_extr'], row['r_intr'],
            row['gamma'], next_state, env.observation_for(next_state)))
    return records


def cmd_export(args):
    run_dir, config = _load_run(args.run)
    out = pathlib.Path(args.out) if args.out else run_dir
    if not out.exists():
        out.mkdir(parents=True)
    env = make_env(config.env, discount=config.gamma, max_steps=config.max_episode_steps)
    if args.kind == 'heatmap':
        frame = heatmap_frame(read_ndjson(run_dir / 'runlog.ndjson'), env, at=args.at)
        frame.to_csv(str(out / 'heatmap.csv'), index=False)
        logger.info('Wrote heatmap with %d cells', len(frame))
        return 0
    checkpoint = run_dir / 'model.npz'
    if not checkpoint.exists():
        raise FileNotFoundError('%s has no model.npz; only model-based runs can be exported'
                                % run_dir)
    model = AgentModel.from_checkpoint(checkpoint)
    export_representation(_buffer_records(run_dir, env), model, out, config.env,
                          (env.height, env.width))
    return 0


_commands = {
    'run': cmd_run,
    'sweep': cmd_sweep,
    'metrics': cmd_metrics,
    'export': cmd_export,
    }


def run_cli(argv = None):
    """Parses argv and runs the subcommand. Returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        return _commands[args.command](args)
    except (FileNotFoundError, ConfigError, LayoutError) as e:
        logger.error(str(e))
        sys.stderr.write('scout: error: %s\n' % e)
        return 2
    except NonFiniteError as e:
        logger.error('Run aborted: %s', e)
        sys.stderr.write('scout: run aborted: %s\n' % e)
        return 1


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == '__main__':
    main()
