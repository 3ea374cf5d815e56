"""The agent module of scoutpy: the novelty-search exploration loop and the
    random, count, hash-count and prediction-error baselines, with the run
    log they produce.

    One run: n_init uniformly random steps, then for every agent step (the
    training phases coming every n_freq steps) train the model until the
    transition loss clears (omega / delta)^2, refresh the buffered intrinsic
    rewards, pick an action with the planner, step the environment, score
    the new state against the buffer before inserting it. The run ends at
    n_max steps or when the environment terminates."""

import collections
import json
import numpy as np
from abc import ABCMeta, abstractmethod
from . import log_util
from .errors import NonFiniteError
from .scoutenv import make_env
from .scoutnets import AgentModel, ModelFreeQ, encode_numpy
from .scoutnovelty import (HistoryBuffer, TransitionRecord, novelty_score,
                           refresh_intrinsic_rewards, mean_pairwise_distance)
from .scoutloss import Batch, ModelTrainer, ModelFreeTrainer, transition_errors
from .scoutplanner import select_action, novelty_intrinsic, zero_intrinsic
from .scouttensor import no_grad
from .scoutmetrics import CoverageTracker, metrics_frame, coverage_at
from .utils import spawn_rngs, write_ndjson, to_jsonable
try:
    import pathlib
except ImportError:
    import pathlib2 as pathlib

logger = log_util.get_logger(__name__)

COVERAGE_CHECKPOINTS = (500, 1000)


class RunLog:
    """Per-step records, training phases and the terminal summary of one
        run."""

    def __init__(self, config, policy, n_reachable, goal_reward = None):
        self.config = config
        self.policy = policy
        self.n_reachable = n_reachable
        self.goal_reward = goal_reward
        self.steps = []
        self.training = []
        self.plan_trace = []
        self.summary = {}

    def add_step(self, record):
        if self.steps and record['t'] <= self.steps[-1]['t']:
            raise ValueError('Step index %d does not increase' % record['t'])
        self.steps.append(record)

    def add_training(self, t, iters_used, report, reached):
        self.training.append({
            't': t, 'iters_used': iters_used, 'gate_reached': reached,
            'losses': report.as_dict() if report is not None else None})

    def metrics(self):
        """Gets the metrics.csv frame"""
        return metrics_frame(self.steps)

    def finish(self, aborted = False, extra = None):
        """Builds the summary from the step records."""
        last = self.steps[-1] if self.steps else {}
        frame = self.metrics()
        goal = [s['t'] for s in self.steps
                if self.goal_reward is not None and s['terminal']
                and s['r_extr'] == self.goal_reward]
        summary = {
            'policy': self.policy,
            'env': self.config.env,
            'seed': self.config.seed,
            'steps': last.get('t', 0),
            'reachable': self.n_reachable,
            'unique_visited': last.get('unique_visited', 1),
            'coverage_fraction': last.get('coverage_fraction', 1.0 / self.n_reachable),
            'visited_once_fraction': last.get('visited_once_fraction', 1.0),
            'mean_r_intr': last.get('mean_r_intr', 0.0),
            'total_iters': sum(p['iters_used'] for p in self.training),
            'training_phases': len(self.training),
            'steps_to_goal': goal[0] if goal else None,
            'aborted': aborted,
            }
        for checkpoint in COVERAGE_CHECKPOINTS:
            summary['coverage_at_%d' % checkpoint] = coverage_at(frame, checkpoint) \
                if len(frame) else None
        summary.update(extra or {})
        self.summary = summary
        return summary

    def write(self, out_dir):
        """Writes runlog.ndjson, metrics.csv, summary.json and config.json
            (plus plan_trace.ndjson when tracing) into out_dir."""
        out_dir = pathlib.Path(out_dir)
        if not out_dir.exists():
            out_dir.mkdir(parents=True)
        write_ndjson(out_dir / 'runlog.ndjson', self.steps)
        self.metrics().to_csv(str(out_dir / 'metrics.csv'), index=False)
        with open(str(out_dir / 'summary.json'), 'w') as f:
            json.dump(to_jsonable(self.summary), f, indent=2, sort_keys=True)
        self.config.save(out_dir / 'config.json')
        if self.training:
            write_ndjson(out_dir / 'training.ndjson', self.training)
        if self.plan_trace:
            write_ndjson(out_dir / 'plan_trace.ndjson', self.plan_trace)
        logger.info('Wrote run %s to %s', self.policy, out_dir)


def train_phase(buffer, trainer, config):
    """Runs gradient iterations on batches sampled from buffer until the
        running mean of L_tau over the last gate_window iterations is at or
        below (omega / delta)^2, or n_iters iterations have run. The window
        lives on the trainer, so it spans earlier phases. Returns
        (iterations used, whether the gate was reached)."""
    if not len(buffer):
        raise ValueError('Cannot train on an empty buffer')
    window = trainer.transition_window
    for iteration in range(1, config.n_iters + 1):
        report = trainer.train_step(buffer.sample(config.batch_size, trainer.rng))
        window.append(report.L_tau)
        if np.mean(window) <= config.gate:
            logger.info('Model accurate after %d iterations (L_tau %.6f)',
                        iteration, report.L_tau)
            return iteration, True
    logger.warning('Training capped at %d iterations, running L_tau %.6f above gate %.6f',
                   config.n_iters, float(np.mean(window)), config.gate)
    return config.n_iters, False


def train_until_accurate(buffer, trainer, config):
    """Trains until the transition loss clears the gate; returns the number
        of iterations used (at least 1)."""
    return train_phase(buffer, trainer, config)[0]


class ScoutExplorer(metaclass=ABCMeta):
    """An abstract exploration policy run against one environment."""

    policy = None
    random_phase = True

    @abstractmethod
    def __init__(self, config, env = None):
        """Initializes the environment (the bundled one named by config
            unless env is given), buffer and random streams."""
        self.config = config
        self.rngs = spawn_rngs(config.seed)
        self.env = env if env is not None else make_env(
            config.env, discount=config.gamma, max_steps=config.max_episode_steps)
        self.buffer = HistoryBuffer(config.buffer_capacity)
        reachable = self.env.reachable_states()
        self.tracker = CoverageTracker(len(reachable), self.env.start_state)
        self.log = RunLog(config, self.policy, len(reachable),
                          getattr(self.env, 'goal_reward', None))

    # hooks
    def before_step(self, t):
        """Runs before an agent step; returns (iters_used, LossReport) when a
            training phase ran, else None."""
        return None

    @abstractmethod
    def choose(self, obs, t):
        """Returns (action, explored, q_plan) for an agent step."""

    def intrinsic_reward(self, obs, action, next_obs, next_state):
        """Scores the new transition before it enters the buffer."""
        return 0.0

    def after_step(self, record):
        """Runs after the record is buffered; may return a float L_Q."""
        return None

    def summary_extra(self):
        return {}

    def save_artifacts(self, out_dir):
        """Writes the history buffer (and any model) next to the run log."""
        self.buffer.dump(pathlib.Path(out_dir) / 'buffer.ndjson')

    # the loop
    def _random_action(self):
        return int(self.rngs['act'].integers(self.env.n_actions))

    def run(self, out_dir = None):
        """Runs the episode and returns the RunLog. A NonFiniteError aborts
            the run; the partial log is written to out_dir before it is
            re-raised."""
        config = self.config
        logger.info('Starting %s run on %s (seed %d)', self.policy, config.env, config.seed)
        obs = self.env.reset()
        try:
            for t in range(1, config.n_max + 1):
                losses, iters_used, q_values, explored = None, None, None, True
                if self.random_phase and t <= config.n_init:
                    action = self._random_action()
                else:
                    training = self.before_step(t)
                    if training is not None:
                        iters_used, losses = training
                    action, explored, q_values = self.choose(obs, t)
                state = self.env.state
                outcome = self.env.step(action)
                r_intr = self.intrinsic_reward(obs, action, outcome.observation, outcome.state)
                record = TransitionRecord(state, obs, action, outcome.r_extr, r_intr,
                                          outcome.gamma, outcome.state, outcome.observation)
                self.buffer.append(record)
                l_q = self.after_step(record)
                if l_q is not None:
                    iters_used = 1
                    losses = {'L_Q': l_q}
                self.tracker.visit(outcome.state)
                coverage = self.tracker.metrics(t, self.buffer.mean_r_intr())
                step = {
                    't': t,
                    'state': state,
                    'action': action,
                    'r_extr': outcome.r_extr,
                    'r_intr': r_intr,
                    'gamma': outcome.gamma,
                    'next_state': outcome.state,
                    'terminal': outcome.terminal,
                    'explored': explored,
                    'q_plan': q_values,
                    'iters_used': iters_used,
                    }
                step.update(coverage._asdict())
                del step['step']
                for name in ('L_Q', 'L_R', 'L_G', 'L_tau', 'L_d1', 'L_csc'):
                    step[name] = None if losses is None else \
                        (losses.get(name) if isinstance(losses, dict) else getattr(losses, name))
                self.log.add_step(step)
                obs = outcome.observation
                if outcome.terminal:
                    logger.info('Environment terminated at step %d', t)
                    break
        except NonFiniteError as e:
            logger.warning('Run aborted at step %d: %s', len(self.log.steps) + 1, e)
            self.log.finish(aborted=True, extra={'error': str(e)})
            if out_dir is not None:
                self.log.write(out_dir)
            raise
        self.log.finish(extra=self.summary_extra())
        if out_dir is not None:
            self.log.write(out_dir)
            self.save_artifacts(out_dir)
        logger.info('Finished %s run: %d steps, coverage %.3f', self.policy,
                    self.log.summary['steps'], self.log.summary['coverage_fraction'])
        return self.log


class NoveltyExplorer(ScoutExplorer):
    """Plans over the learned model with the k-NN novelty of predicted
        states as intrinsic reward."""

    policy = 'novelty'

    def __init__(self, config, env = None):
        super().__init__(config, env)
        self.model = AgentModel(self.env.obs_size, self.env.n_actions, config.n_x,
                                rng=self.rngs['init'], dropout=config.dropout,
                                freeze_interval=config.freeze_interval)
        self.trainer = ModelTrainer(self.model, config, self.rngs['train'])
        self._points = None

    def _buffer_points(self):
        if self._points is None:
            self._points = encode_numpy(self.model, self.buffer.next_observations()) \
                if len(self.buffer) else np.zeros((0, self.config.n_x))
        return self._points

    def refresh(self):
        refresh_intrinsic_rewards(self.buffer, self.model, self.config.k)

    def planning_intrinsic(self):
        return novelty_intrinsic(self._buffer_points(), self.config.k)

    def before_step(self, t):
        agent_step = t - self.config.n_init if self.random_phase else t
        if (agent_step - 1) % self.config.n_freq:
            return None
        iters_used, reached = train_phase(self.buffer, self.trainer, self.config)
        self.log.add_training(t, iters_used, self.trainer.last_report, reached)
        self._points = None
        self.refresh()
        return iters_used, self.trainer.last_report

    def choose(self, obs, t):
        x = encode_numpy(self.model, obs)[0]
        decision = select_action(x, self.model, self.config.plan_config, self.rngs['act'],
                                 intrinsic=self.planning_intrinsic(),
                                 trace=self.config.plan_trace)
        if decision.trace:
            self.log.plan_trace.extend(dict(row, t=t) for row in decision.trace)
        q_values = None if decision.q_plan is None else [float(v) for v in decision.q_plan]
        return decision.action, decision.explored, q_values

    def intrinsic_reward(self, obs, action, next_obs, next_state):
        points = self._buffer_points()
        score = 0.0
        if len(points):
            score = novelty_score(encode_numpy(self.model, next_obs)[0], points, self.config.k)
        self._points = None
        return score

    def summary_extra(self):
        points = encode_numpy(self.model, self.buffer.next_observations()) \
            if len(self.buffer) else np.zeros((0, self.config.n_x))
        return {'mean_pairwise_distance': mean_pairwise_distance(points)}

    def save_artifacts(self, out_dir):
        out_dir = pathlib.Path(out_dir)
        self.model.save(out_dir / 'model.npz')
        self.buffer.dump(out_dir / 'buffer.ndjson', model=self.model)


class PredErrorExplorer(NoveltyExplorer):
    """The same model and loop, rewarded by the transition model's squared
        error on each new transition instead of novelty. Simulated states
        get no intrinsic term while planning."""

    policy = 'pred_error'

    def refresh(self):
        pass

    def planning_intrinsic(self):
        return zero_intrinsic

    def intrinsic_reward(self, obs, action, next_obs, next_state):
        batch = Batch([obs], [action], [0.0], [0.0], [0.0], [next_obs])
        return float(transition_errors(batch, self.model)[0])


class RandomExplorer(ScoutExplorer):
    """Uniformly random actions; nothing is trained."""

    policy = 'random'
    random_phase = False

    def __init__(self, config, env = None):
        super().__init__(config, env)

    def choose(self, obs, t):
        return self._random_action(), True, None


def count_bonus(count):
    """1 / sqrt(n + 1)."""
    return 1.0 / np.sqrt(count + 1.0)


class CountExplorer(ScoutExplorer):
    """Tabular counts over true states; greedily steps to the successor with
        the largest bonus (lowest action index on ties)."""

    policy = 'count'
    random_phase = False

    def __init__(self, config, env = None):
        super().__init__(config, env)
        self.counts = collections.Counter({self.env.start_state: 1})

    def choose(self, obs, t):
        bonuses = [count_bonus(self.counts[self.env.peek(a)])
                   for a in range(self.env.n_actions)]
        return int(np.argmax(bonuses)), False, bonuses

    def intrinsic_reward(self, obs, action, next_obs, next_state):
        bonus = count_bonus(self.counts[next_state])
        self.counts[next_state] += 1
        return float(bonus)


class HashCountExplorer(ScoutExplorer):
    """SimHash codes of observations, a 1/sqrt(n + 1) bonus per code and an
        epsilon-greedy model-free DDQN learner on raw observations."""

    policy = 'hash'

    def __init__(self, config, env = None):
        super().__init__(config, env)
        self.projection = self.rngs['act'].standard_normal((config.hash_bits, self.env.obs_size))
        self.qnet = ModelFreeQ(self.env.obs_size, self.env.n_actions, rng=self.rngs['init'],
                               freeze_interval=config.freeze_interval)
        self.trainer = ModelFreeTrainer(self.qnet, config.model_free_lr,
                                        config.rmsprop_decay, config.rmsprop_epsilon)
        self.counts = collections.Counter({self.code(self.env.observation_for(
            self.env.start_state)): 1})

    def code(self, obs):
        """The SimHash code sign(A obs) as a string of hash_bits bits."""
        return ''.join('1' if v > 0 else '0' for v in self.projection @ np.asarray(obs))

    def choose(self, obs, t):
        if self.rngs['act'].random() < self.config.epsilon:
            return self._random_action(), True, None
        with no_grad():
            q_values = self.qnet.q_values(obs).numpy()[0]
        return int(np.argmax(q_values)), False, [float(v) for v in q_values]

    def intrinsic_reward(self, obs, action, next_obs, next_state):
        code = self.code(next_obs)
        bonus = count_bonus(self.counts[code])
        self.counts[code] += 1
        return float(bonus)

    def after_step(self, record):
        if len(self.buffer) < self.config.batch_size:
            return None
        batch = Batch.from_records(self.buffer.sample(self.config.batch_size, self.rngs['train']))
        return self.trainer.train_step(batch)


EXPLORERS = {
    'novelty': NoveltyExplorer,
    'random': RandomExplorer,
    'count': CountExplorer,
    'hash': HashCountExplorer,
    'pred_error': PredErrorExplorer,
    }


def run_policy(config, out_dir = None):
    """Runs the explorer named by config.policy."""
    return EXPLORERS[config.policy](config).run(out_dir)


def run_exploration(config, out_dir = None):
    return NoveltyExplorer(config).run(out_dir)


def baseline_random(config, out_dir = None):
    return RandomExplorer(config).run(out_dir)


def baseline_count(config, out_dir = None):
    return CountExplorer(config).run(out_dir)


def baseline_hash_count(config, out_dir = None):
    return HashCountExplorer(config).run(out_dir)


def baseline_pred_error(config, out_dir = None):
    return PredErrorExplorer(config).run(out_dir)
