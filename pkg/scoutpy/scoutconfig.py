"""The configuration module of scoutpy: RunConfig, its JSON form and the
    per-environment defaults. CONFIG.md documents every key."""

import json
from . import log_util
from .errors import ConfigError
from .scoutenv import ENV_IDS
from .scoutplanner import PlanConfig
try:
    import pathlib
except ImportError:
    import pathlib2 as pathlib

logger = log_util.get_logger(__name__)

POLICIES = ('novelty', 'random', 'count', 'hash', 'pred_error')
MODEL_BASED = ('novelty', 'pred_error')

## Defaults shared by every environment
BASE_DEFAULTS = {
    'env': 'open_labyrinth',
    'seed': 0,
    'policy': 'novelty',
    'n_init': 64,
    'n_iters': 30000,
    'lr': 0.00025,
    'model_free_lr': 0.00025,
    'gamma': 0.8,
    'buffer_capacity': 1000,
    'batch_size': 64,
    'omega': 0.5,
    'delta': 6.0,
    'k': 5,
    'c_d1': 5.0,
    'depth': 5,
    'b': None,
    'freeze_interval': 1000,
    'dropout': 0.1,
    'rmsprop_decay': 0.9,
    'rmsprop_epsilon': 1e-8,
    'gate_window': 100,
    'loss_weights': {},
    'hash_bits': 16,
    'plan_trace': False,
    'max_episode_steps': 4000,
    }

## Per-environment overrides of the above
ENV_DEFAULTS = {
    'open_labyrinth': {'n_max': 1000, 'n_freq': 1, 'epsilon': 0.0, 'n_x': 2},
    'four_room': {'n_max': 2000, 'n_freq': 3, 'epsilon': 0.2, 'n_x': 2},
    'key_maze': {'n_max': 4000, 'n_freq': 1, 'epsilon': 0.1, 'n_x': 3},
    }

## Key maze model-based runs train slower and longer
KEY_MAZE_MODEL_BASED = {'lr': 0.000025, 'n_iters': 50000}

KEYS = tuple(sorted(set(BASE_DEFAULTS) | set(ENV_DEFAULTS['open_labyrinth'])))

_positive_ints = ('n_init', 'n_max', 'n_freq', 'n_iters', 'buffer_capacity', 'batch_size',
                  'k', 'n_x', 'freeze_interval', 'gate_window', 'hash_bits',
                  'max_episode_steps')
_positive_floats = ('lr', 'model_free_lr', 'omega', 'delta', 'c_d1', 'rmsprop_epsilon')
_loss_weight_keys = ('q', 'r', 'g', 'tau', 'd1', 'csc')


def defaults_for(env, policy = 'novelty'):
    """Full default key set for an environment and policy."""
    if env not in ENV_DEFAULTS:
        raise ConfigError('env', 'must be one of %s' % ', '.join(ENV_IDS))
    values = dict(BASE_DEFAULTS)
    values['loss_weights'] = {}
    values.update(ENV_DEFAULTS[env])
    if env == 'key_maze' and policy in MODEL_BASED:
        values.update(KEY_MAZE_MODEL_BASED)
    return values


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _validate(values):
    if values['env'] not in ENV_IDS:
        raise ConfigError('env', 'must be one of %s' % ', '.join(ENV_IDS))
    if values['policy'] not in POLICIES:
        raise ConfigError('policy', 'must be one of %s' % ', '.join(POLICIES))
    if not _is_int(values['seed']) or values['seed'] < 0:
        raise ConfigError('seed', 'must be an integer >= 0')
    for key in _positive_ints:
        if not _is_int(values[key]) or values[key] < 1:
            raise ConfigError(key, 'must be an integer >= 1')
    for key in _positive_floats:
        if isinstance(values[key], bool) or not isinstance(values[key], (int, float)) \
                or not values[key] > 0:
            raise ConfigError(key, 'must be a number > 0')
    if not 0.0 <= values['gamma'] <= 1.0:
        raise ConfigError('gamma', 'must be in [0, 1]')
    if not 0.0 <= values['epsilon'] <= 1.0:
        raise ConfigError('epsilon', 'must be in [0, 1]')
    if not 0.0 <= values['dropout'] < 1.0:
        raise ConfigError('dropout', 'must be in [0, 1)')
    if not 0.0 < values['rmsprop_decay'] < 1.0:
        raise ConfigError('rmsprop_decay', 'must be in (0, 1)')
    if not _is_int(values['depth']) or values['depth'] < 0:
        raise ConfigError('depth', 'must be an integer >= 0')
    if values['b'] is not None and (not _is_int(values['b']) or not 1 <= values['b'] <= 4):
        raise ConfigError('b', 'must be null or an integer in [1, 4]')
    if values['n_init'] > values['n_max']:
        raise ConfigError('n_init', 'must not exceed n_max')
    if not isinstance(values['plan_trace'], bool):
        raise ConfigError('plan_trace', 'must be true or false')
    weights = values['loss_weights']
    if not isinstance(weights, dict):
        raise ConfigError('loss_weights', 'must be an object')
    for name, weight in weights.items():
        if name not in _loss_weight_keys:
            raise ConfigError('loss_weights.%s' % name,
                              'unknown loss; expected one of %s' % ', '.join(_loss_weight_keys))
        if isinstance(weight, bool) or not isinstance(weight, (int, float)) or weight < 0:
            raise ConfigError('loss_weights.%s' % name, 'must be a number >= 0')


class RunConfig:
    """The validated settings of one run. Treat instances as immutable; use
        replace() to derive variants."""

    def __init__(self, **values):
        """Initializes from keyword values; absent keys take the defaults of
            the chosen environment and policy."""
        unknown = sorted(set(values) - set(KEYS))
        if unknown:
            raise ConfigError(unknown[0], 'unknown key')
        merged = defaults_for(values.get('env', BASE_DEFAULTS['env']),
                              values.get('policy', BASE_DEFAULTS['policy']))
        merged.update(values)
        _validate(merged)
        merged['loss_weights'] = dict(merged['loss_weights'])
        self._values = merged
        self._plan_config = PlanConfig(merged['depth'], merged['b'], merged['epsilon'])

    def __getattr__(self, name):
        values = self.__dict__.get('_values')
        if values is not None and name in values:
            return values[name]
        raise AttributeError(name)

    # properties
    @property
    def plan_config(self):
        """Gets the PlanConfig built from depth, b and epsilon"""
        return self._plan_config

    @property
    def gate(self):
        """Gets the transition-accuracy threshold (omega / delta)^2"""
        return (self._values['omega'] / self._values['delta']) ** 2

    @property
    def model_based(self):
        return self._values['policy'] in MODEL_BASED

    def to_dict(self):
        values = dict(self._values)
        values['loss_weights'] = dict(values['loss_weights'])
        return values

    def replace(self, **changes):
        """Returns a copy with changes applied. Changing env or policy
            without restating the other keys re-derives their defaults."""
        if 'env' in changes or 'policy' in changes:
            defaults = defaults_for(self.env, self.policy)
            values = {key: value for key, value in self._values.items()
                      if value != defaults[key]}
        else:
            values = self.to_dict()
        values.update(changes)
        return RunConfig(**values)

    def save(self, path):
        """Writes the config as JSON."""
        with open(str(path), 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        logger.info('Wrote config %s', path)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self._values == other._values

    def __repr__(self):
        return 'RunConfig(%s)' % ', '.join(
            '%s=%r' % (key, self._values[key]) for key in sorted(self._values))


def parse_config(path = None, overrides = None):
    """Reads a RunConfig from a JSON file (path None means all defaults);
        overrides (e.g. command-line flags) win over file values."""
    values = {}
    if path is not None:
        path = pathlib.Path(path)
        if not path.exists():
            raise FileNotFoundError('Config file %s does not exist' % path)
        with open(str(path)) as f:
            try:
                values = json.load(f)
            except ValueError as e:
                raise ConfigError('<file>', 'not valid JSON (%s)' % e)
        if not isinstance(values, dict):
            raise ConfigError('<file>', 'top level must be a JSON object')
    values.update({key: value for key, value in (overrides or {}).items()
                   if value is not None})
    config = RunConfig(**values)
    logger.info('Loaded config: env=%s policy=%s seed=%d', config.env, config.policy, config.seed)
    return config
