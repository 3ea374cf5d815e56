"""The networks module of scoutpy: the encoder, transition, reward, discount
    and Q functions of the agent, with target-network bookkeeping and
    checkpoint files.

    Checkpoint layout (numpy .npz): 'format_version', 'obs_size',
    'n_actions', 'n_x', 'steps_since_sync' scalars, then one array per
    parameter keyed '<net>/<layer index>/<weight|bias>' for the nets
    encoder, transition, reward, discount, q, target_encoder, target_q."""

import numpy as np
from . import log_util
from .errors import ShapeError
from .scouttensor import Tensor, FeedForward, concat, as_tensor, no_grad

logger = log_util.get_logger(__name__)

## Hidden layers as (units, activation, dropout); output layers are appended
##   by the builders below.
DEFAULT_ARCHITECTURE = {
    'encoder': [(200, 'tanh', 0.0), (100, 'tanh', 0.0), (50, 'tanh', 0.0), (10, 'tanh', 0.0)],
    'transition': [(10, 'tanh', None), (30, 'tanh', None), (30, 'tanh', None), (10, 'tanh', None)],
    'reward': [(10, 'tanh', 0.0), (50, 'tanh', 0.0), (20, 'tanh', 0.0)],
    'discount': [(10, 'tanh', 0.0), (50, 'tanh', 0.0), (20, 'tanh', 0.0)],
    'q': [(20, 'relu', 0.0), (50, 'relu', 0.0), (20, 'relu', 0.0)],
    'q_observation': [(500, 'tanh', 0.0), (200, 'tanh', 0.0), (50, 'tanh', 0.0), (10, 'tanh', 0.0)],
    }


def one_hot(actions, n_actions):
    """Encodes action ids as rows with exactly one coordinate equal to 1."""
    actions = np.atleast_1d(np.asarray(actions, dtype=np.int64))
    if np.any(actions < 0) or np.any(actions >= n_actions):
        raise ShapeError("action ids %s outside [0, %d)" % (actions.tolist(), n_actions))
    encoded = np.zeros((len(actions), n_actions))
    encoded[np.arange(len(actions)), actions] = 1.0
    return encoded


def _as_batch(values):
    """Promotes a single vector to a one-row batch."""
    values = as_tensor(values)
    if values.data.ndim == 1:
        return values.reshape(1, -1)
    return values


def _build(in_features, hidden, out_features, rng, name, dropout = 0.0):
    description = [(units, act, dropout if rate is None else rate)
                   for units, act, rate in hidden]
    description.append((out_features, None, 0.0))
    return FeedForward(in_features, description, rng, name)


class AgentModel:
    """The five parameterized functions of the agent (live encoder,
        transition, reward, discount and Q networks) plus frozen copies of the
        encoder and Q network used for bootstrapped targets."""

    _format_version = 1
    _net_names = ('encoder', 'transition', 'reward', 'discount', 'q',
                  'target_encoder', 'target_q')

    def __init__(self, obs_size, n_actions, n_x, rng = None, architecture = None,
                 dropout = 0.1, freeze_interval = 1000):
        """Initializes all networks from rng. architecture overrides the
            hidden layers per network (see DEFAULT_ARCHITECTURE)."""
        rng = rng if rng is not None else np.random.default_rng()
        arch = dict(DEFAULT_ARCHITECTURE)
        arch.update(architecture or {})
        self._obs_size = obs_size
        self._n_actions = n_actions
        self._n_x = n_x
        self.freeze_interval = freeze_interval
        self.steps_since_sync = 0
        self.encoder = _build(obs_size, arch['encoder'], n_x, rng, 'encoder')
        self.transition_net = _build(n_x + n_actions, arch['transition'], n_x, rng,
                                     'transition', dropout=dropout)
        self.reward_net = _build(n_x + n_actions, arch['reward'], 1, rng, 'reward')
        self.discount_net = _build(n_x + n_actions, arch['discount'], 1, rng, 'discount')
        self.q_net = _build(n_x, arch['q'], n_actions, rng, 'q')
        self.target_encoder = _build(obs_size, arch['encoder'], n_x, rng, 'target_encoder')
        self.target_q = _build(n_x, arch['q'], n_actions, rng, 'target_q')
        self.target_encoder.copy_from(self.encoder)
        self.target_q.copy_from(self.q_net)

    # properties
    @property
    def obs_size(self):
        """Gets the flattened observation length the encoder expects"""
        return self._obs_size

    @property
    def n_actions(self):
        """Gets the number of discrete actions"""
        return self._n_actions

    @property
    def n_x(self):
        """Gets the abstract representation dimension"""
        return self._n_x

    def networks(self):
        """Returns the networks keyed by checkpoint name."""
        return dict(zip(self._net_names, (
            self.encoder, self.transition_net, self.reward_net,
            self.discount_net, self.q_net, self.target_encoder, self.target_q)))

    def parameter_groups(self):
        """Returns the trainable parameter groups (targets excluded)."""
        return {
            'encoder': self.encoder.parameters(),
            'transition': self.transition_net.parameters(),
            'reward': self.reward_net.parameters(),
            'discount': self.discount_net.parameters(),
            'q': self.q_net.parameters(),
            }

    # the parameterized functions
    def encode(self, obs, target = False):
        """Maps a batch of flattened observations to abstract states."""
        net = self.target_encoder if target else self.encoder
        return net(_as_batch(obs))

    def _with_action(self, x, actions):
        x = _as_batch(x)
        if x.shape[1] != self._n_x:
            raise ShapeError("abstract state of length %d, expected %d" % (x.shape[1], self._n_x))
        return concat([x, Tensor(one_hot(actions, self._n_actions))], axis=1)

    def transition(self, x, actions, training = False, rng = None):
        """Returns x + net(x || a); dropout only in training mode."""
        x = _as_batch(x)
        delta = self.transition_net(self._with_action(x, actions), training=training, rng=rng)
        return x + delta

    def predict_reward(self, x, actions):
        """Raw (unclipped) reward regression, shape (batch,)."""
        return self.reward_net(self._with_action(x, actions)).reshape(-1)

    def predict_discount(self, x, actions):
        """Raw (unclipped) discount regression, shape (batch,)."""
        return self.discount_net(self._with_action(x, actions)).reshape(-1)

    def q_values(self, x, target = False):
        """Q-values for every action, shape (batch, n_actions)."""
        net = self.target_q if target else self.q_net
        return net(_as_batch(x))

    # target bookkeeping
    def record_update(self):
        """Counts one gradient update and syncs targets when due."""
        self.steps_since_sync += 1
        return self.sync_targets()

    def sync_targets(self):
        """Copies live encoder/Q into the targets once steps_since_sync has
            reached the freeze interval. Returns True if a copy was made."""
        if self.steps_since_sync < self.freeze_interval:
            return False
        self.target_q.copy_from(self.q_net)
        self.target_encoder.copy_from(self.encoder)
        self.steps_since_sync = 0
        logger.debug('Target networks synced')
        return True

    # checkpoints
    def save(self, path):
        """Writes every network (live and target) to an .npz checkpoint."""
        arrays = {
            'format_version': np.array(self._format_version),
            'obs_size': np.array(self._obs_size),
            'n_actions': np.array(self._n_actions),
            'n_x': np.array(self._n_x),
            'steps_since_sync': np.array(self.steps_since_sync),
            }
        for net_name, net in self.networks().items():
            for layer_index, layer in enumerate(net.layers):
                arrays['%s/%d/weight' % (net_name, layer_index)] = layer.weight.data
                arrays['%s/%d/bias' % (net_name, layer_index)] = layer.bias.data
        with open(str(path), 'wb') as checkpoint:
            np.savez(checkpoint, **arrays)
        logger.info('Wrote checkpoint %s', path)

    def load(self, path):
        """Reads a checkpoint written by save into this model; shapes must
            match."""
        with np.load(str(path)) as arrays:
            version = int(arrays['format_version'])
            if version != self._format_version:
                raise ValueError('Unsupported checkpoint format version %d' % version)
            for key in ('obs_size', 'n_actions', 'n_x'):
                if int(arrays[key]) != getattr(self, key):
                    raise ShapeError("checkpoint %s=%d, model has %d" % (
                        key, int(arrays[key]), getattr(self, key)))
            for net_name, net in self.networks().items():
                for layer_index, layer in enumerate(net.layers):
                    for part in ('weight', 'bias'):
                        stored = arrays['%s/%d/%s' % (net_name, layer_index, part)]
                        param = getattr(layer, part)
                        if stored.shape != param.shape:
                            raise ShapeError("checkpoint %s/%d/%s has shape %s, expected %s" % (
                                net_name, layer_index, part, stored.shape, param.shape))
                        param.data[...] = stored
            self.steps_since_sync = int(arrays['steps_since_sync'])
        logger.info('Loaded checkpoint %s', path)
        return self

    @classmethod
    def from_checkpoint(cls, path, architecture = None):
        """Builds a model sized from the checkpoint header and loads it."""
        with np.load(str(path)) as arrays:
            sizes = [int(arrays[key]) for key in ('obs_size', 'n_actions', 'n_x')]
        return cls(*sizes, rng=np.random.default_rng(0),
                   architecture=architecture).load(path)


def encode_numpy(model, obs, target = False):
    """Encodes observations without recording a graph; returns an array."""
    with no_grad():
        return model.encode(np.asarray(obs, dtype=np.float64), target=target).numpy()


class ModelFreeQ:
    """A Q network on flattened observations with a frozen target copy, for
        the model-free baselines."""

    def __init__(self, obs_size, n_actions, rng = None, architecture = None,
                 freeze_interval = 1000):
        rng = rng if rng is not None else np.random.default_rng()
        hidden = (architecture or DEFAULT_ARCHITECTURE)['q_observation']
        self.n_actions = n_actions
        self.freeze_interval = freeze_interval
        self.steps_since_sync = 0
        self.q_net = _build(obs_size, hidden, n_actions, rng, 'q_observation')
        self.target_q = _build(obs_size, hidden, n_actions, rng, 'target_q_observation')
        self.target_q.copy_from(self.q_net)

    def parameters(self):
        return self.q_net.parameters()

    def q_values(self, obs, target = False):
        net = self.target_q if target else self.q_net
        return net(_as_batch(obs))

    def record_update(self):
        self.steps_since_sync += 1
        if self.steps_since_sync >= self.freeze_interval:
            self.target_q.copy_from(self.q_net)
            self.steps_since_sync = 0
            return True
        return False
