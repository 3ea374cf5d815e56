"""The loss module of scoutpy: the DDQN target, reward/discount regression,
    transition alignment, Gaussian-potential uniformity, the consecutive
    distance constraint, their sum, and the trainer that minimizes it.

    The Q loss sees the encoder output detached, so Q gradients reach only
    the Q network; the encoder is shaped by the model-based losses."""

import collections
import numpy as np
from . import log_util
from .errors import NonFiniteError
from .scouttensor import Tensor, RmsProp, no_grad

logger = log_util.get_logger(__name__)

LOSS_NAMES = ('L_Q', 'L_R', 'L_G', 'L_tau', 'L_d1', 'L_csc')
_weight_keys = dict(zip(LOSS_NAMES, ('q', 'r', 'g', 'tau', 'd1', 'csc')))


class LossReport(collections.namedtuple('LossReport', LOSS_NAMES + ('total',))):
    """The six loss components of one training iteration and their
        (weighted) sum."""

    __slots__ = ()

    @classmethod
    def from_components(cls, weights = None, **components):
        weights = weights or {}
        total = sum(weights.get(_weight_keys[name], 1.0) * components[name]
                    for name in LOSS_NAMES)
        return cls(total=total, **components)

    def as_dict(self):
        return dict(self._asdict())


class Batch:
    """Column-stacked transition records."""

    def __init__(self, obs, actions, r_extr, r_intr, gamma, next_obs):
        self.obs = np.asarray(obs, dtype=np.float64)
        self.actions = np.asarray(actions, dtype=np.int64)
        self.r_extr = np.asarray(r_extr, dtype=np.float64)
        self.r_intr = np.asarray(r_intr, dtype=np.float64)
        self.gamma = np.asarray(gamma, dtype=np.float64)
        self.next_obs = np.asarray(next_obs, dtype=np.float64)

    @classmethod
    def from_records(cls, records):
        return cls(
            np.stack([r.obs for r in records]),
            [r.action for r in records],
            [r.r_extr for r in records],
            [r.r_intr for r in records],
            [r.gamma for r in records],
            np.stack([r.next_obs for r in records]))

    @property
    def size(self):
        return len(self.actions)

    def __len__(self):
        return self.size


def encode_batch(batch, model):
    """Live encodings (x, x') of a batch, recorded on the graph."""
    return model.encode(batch.obs), model.encode(batch.next_obs)


def ddqn_target(batch, model, x_next = None):
    """Y = r + gamma * Q_target(e_target(s'), argmax_a' Q(e(s'), a')), with
        r = r_extr + r_intr. x_next is the live encoding e(s') when the
        caller already has it. Returns a plain array; no gradient flows."""
    rows = np.arange(batch.size)
    with no_grad():
        if x_next is None:
            x_next = model.encode(batch.next_obs)
        best = np.argmax(model.q_values(x_next.detach()).numpy(), axis=1)
        x_next_target = model.encode(batch.next_obs, target=True)
        q_target = model.q_values(x_next_target, target=True).numpy()
    return batch.r_extr + batch.r_intr + batch.gamma * q_target[rows, best]


def loss_q(batch, model, targets = None, encoded = None):
    """Mean squared error between Q(x, a) and the DDQN target."""
    x = (encoded[0] if encoded is not None else model.encode(batch.obs)).detach()
    if targets is None:
        targets = ddqn_target(batch, model, None if encoded is None else encoded[1])
    q = model.q_values(x).pick(batch.actions)
    return ((q - Tensor(targets)) ** 2).mean()


def loss_reward_discount(batch, model, encoded = None):
    """Mean squared errors of the reward and discount heads (L_R, L_G)."""
    x = encoded[0] if encoded is not None else model.encode(batch.obs)
    r_hat = model.predict_reward(x, batch.actions)
    g_hat = model.predict_discount(x, batch.actions)
    return ((r_hat - Tensor(batch.r_extr)) ** 2).mean(), \
        ((g_hat - Tensor(batch.gamma)) ** 2).mean()


def loss_transition(batch, model, training = False, rng = None, encoded = None):
    """Mean squared l2 error between x + tau(x, a) and x'. x' stays on the
        graph, so the encoder is shaped from both ends."""
    x, x_next = encoded if encoded is not None else encode_batch(batch, model)
    predicted = model.transition(x, batch.actions, training=training, rng=rng)
    return ((predicted - x_next) ** 2).sum(axis=1).mean()


def transition_errors(batch, model):
    """Per-record squared transition error in eval mode, as an array."""
    with no_grad():
        x, x_next = encode_batch(batch, model)
        predicted = model.transition(x, batch.actions)
        return ((predicted - x_next) ** 2).sum(axis=1).numpy()


def loss_uniformity(batch, model, c_d1, rng, encoded = None):
    """Mean Gaussian potential exp(-c_d1 ||x1 - x2||^2) over pairs formed by
        matching the batch with a shuffled copy of itself."""
    x = encoded[0] if encoded is not None else model.encode(batch.obs)
    partner = x[rng.permutation(x.shape[0])]
    return ((((x - partner) ** 2).sum(axis=1)) * (-c_d1)).exp().mean()


def loss_csc(batch, model, omega, encoded = None):
    """Mean hinge max(||x - x'|| - omega, 0) over consecutive pairs."""
    x, x_next = encoded if encoded is not None else encode_batch(batch, model)
    return ((x - x_next).norm(axis=1) - omega).relu().mean()


def total_loss(batch, model, config, rng, training = True):
    """Sums the six losses (weights from config.loss_weights, 1.0 by
        default). Returns (LossReport, total tensor ready for backward)."""
    weights = dict(getattr(config, 'loss_weights', None) or {})
    encoded = encode_batch(batch, model)
    l_r, l_g = loss_reward_discount(batch, model, encoded=encoded)
    components = {
        'L_Q': loss_q(batch, model, encoded=encoded),
        'L_R': l_r,
        'L_G': l_g,
        'L_tau': loss_transition(batch, model, training=training, rng=rng, encoded=encoded),
        'L_d1': loss_uniformity(batch, model, config.c_d1, rng, encoded=encoded),
        'L_csc': loss_csc(batch, model, config.omega, encoded=encoded),
        }
    total = None
    for name in LOSS_NAMES:
        term = components[name] * weights.get(_weight_keys[name], 1.0)
        total = term if total is None else total + term
    values = {name: components[name].item() for name in LOSS_NAMES}
    for name, value in values.items():
        if not np.isfinite(value):
            raise NonFiniteError('loss component %s is not finite' % name)
    return LossReport.from_components(weights, **values), total


class ModelTrainer:
    """Runs gradient iterations on an AgentModel: one backward pass over the
        summed loss, one RMSProp step per parameter group."""

    def __init__(self, model, config, rng):
        self.model = model
        self.config = config
        self.rng = rng
        self._optimizers = {
            name: RmsProp(params, config.lr, config.rmsprop_decay, config.rmsprop_epsilon)
            for name, params in model.parameter_groups().items()}
        self._iterations = 0
        self.last_report = None
        ## recent L_tau values for the accuracy gate, kept across training phases
        self.transition_window = collections.deque(
            maxlen=min(config.gate_window, config.n_iters))

    @property
    def iterations(self):
        """Gets the number of gradient iterations run so far"""
        return self._iterations

    def train_step(self, batch):
        """One iteration on a Batch (or list of records); returns its
            LossReport."""
        if not isinstance(batch, Batch):
            batch = Batch.from_records(batch)
        for optimizer in self._optimizers.values():
            optimizer.zero_grad()
        report, total = total_loss(batch, self.model, self.config, self.rng)
        total.backward()
        for optimizer in self._optimizers.values():
            optimizer.step()
        self.model.record_update()
        self._iterations += 1
        self.last_report = report
        logger.debug('Iteration %d: %s', self._iterations, report)
        return report


def ddqn_observation_target(batch, qnet):
    """The DDQN target for a Q network on raw observations (ModelFreeQ)."""
    rows = np.arange(batch.size)
    with no_grad():
        best = np.argmax(qnet.q_values(batch.next_obs).numpy(), axis=1)
        q_target = qnet.q_values(batch.next_obs, target=True).numpy()
    return batch.r_extr + batch.r_intr + batch.gamma * q_target[rows, best]


class ModelFreeTrainer:
    """DDQN updates of a ModelFreeQ with a single RMSProp optimizer."""

    def __init__(self, qnet, lr, decay = 0.9, epsilon = 1e-8):
        self.qnet = qnet
        self._optimizer = RmsProp(qnet.parameters(), lr, decay, epsilon)

    def train_step(self, batch):
        """One DDQN iteration; returns the float L_Q."""
        if not isinstance(batch, Batch):
            batch = Batch.from_records(batch)
        self._optimizer.zero_grad()
        targets = ddqn_observation_target(batch, self.qnet)
        q = self.qnet.q_values(batch.obs).pick(batch.actions)
        loss = ((q - Tensor(targets)) ** 2).mean()
        loss.backward()
        self._optimizer.step()
        self.qnet.record_update()
        return loss.item()
