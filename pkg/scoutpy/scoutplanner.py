"""The planner module of scoutpy: depth-d rollout values over the learned
    model, their sum Q_plan, b-best expansion and the epsilon-greedy rule.

    A rollout value is

        Q^0(x, a) = Q(x, a)
        Q^d(x, a) = r(x, a) + g(x, a) * max_{a' in best_b(x')} Q^{d-1}(x', a')

    with x' = x + tau(x, a), g the predicted discount clipped to [0, 0.99]
    and r the intrinsic score of x' plus the predicted extrinsic reward
    clipped to [-1, 1]. best_b(x') are the b actions ranked highest by
    Q(x', .), ties broken by lowest index. Simulated states are never
    inserted in the history buffer."""

import collections
import numpy as np
from scipy.spatial.distance import cdist
from . import log_util
from .errors import ConfigError
from .scouttensor import no_grad

logger = log_util.get_logger(__name__)

REWARD_CLIP = (-1.0, 1.0)
DISCOUNT_CLIP = (0.0, 0.99)

PlanNode = collections.namedtuple(
    'PlanNode',
    ['path', 'depth', 'state', 'q_values', 'rewards', 'discounts', 'next_states', 'expansion'])

Decision = collections.namedtuple(
    'Decision', ['action', 'q_plan', 'explored', 'nodes_evaluated', 'trace'])


class PlanConfig:
    """Depth D, expansion width b (None means every action) and the
        exploration rate epsilon."""

    def __init__(self, depth = 5, b = None, epsilon = 0.0):
        if int(depth) != depth or depth < 0:
            raise ConfigError('depth', 'must be an integer >= 0')
        if b is not None and (int(b) != b or b < 1):
            raise ConfigError('b', 'must be an integer >= 1')
        if not 0.0 <= epsilon <= 1.0:
            raise ConfigError('epsilon', 'must be in [0, 1]')
        self.depth = int(depth)
        self.b = None if b is None else int(b)
        self.epsilon = float(epsilon)

    def width(self, n_actions):
        """Gets b resolved against the action count"""
        if self.b is None:
            return n_actions
        if self.b > n_actions:
            raise ConfigError('b', 'must be in [1, %d]' % n_actions)
        return self.b

    def __repr__(self):
        return 'PlanConfig(depth=%d, b=%s, epsilon=%s)' % (self.depth, self.b, self.epsilon)


def novelty_intrinsic(points, k):
    """Returns an intrinsic term scoring predicted next states by their mean
        distance to the k nearest of points (0 for an empty buffer)."""
    points = None if points is None or len(points) == 0 else np.asarray(points, dtype=np.float64)

    def score(next_states):
        if points is None:
            return np.zeros(len(next_states))
        nearest = min(k, len(points))
        distances = cdist(next_states, points)
        if nearest < len(points):
            distances = np.partition(distances, nearest - 1, axis=1)[:, :nearest]
        return np.sort(distances, axis=1)[:, :nearest].mean(axis=1)
    return score


def zero_intrinsic(next_states):
    """An intrinsic term that is always 0."""
    return np.zeros(len(next_states))


def best_actions(q_values, b):
    """The b highest-valued actions, ties to the lowest index."""
    return [int(a) for a in np.argsort(-np.asarray(q_values), kind='stable')[:b]]


class Planner:
    """Evaluates rollout values from one root state. Nodes are keyed by the
        action path from the root. The tree is expanded one depth level at a
        time: every node of a level goes through each network in a single
        batch and the intrinsic term is computed once per level. Nodes at
        the deepest level only need Q. With memoize on, every (path, action,
        depth) value is computed once per planner; the naive recursion
        recomputes shared subtrees from the same nodes."""

    def __init__(self, model, plan_config, points = None, k = 5, intrinsic = None,
                 trace = False, memoize = True):
        self.model = model
        self.plan_config = plan_config
        self.n_actions = model.n_actions
        self.b = plan_config.width(self.n_actions)
        self.intrinsic = intrinsic if intrinsic is not None else novelty_intrinsic(points, k)
        self.memoize = memoize
        self.nodes_evaluated = 0
        self.trace = [] if trace else None
        self._root = None
        self._nodes = {}
        self._values = {}

    def _evaluate_level(self, paths, states, leaf):
        """Runs the networks once over all nodes of a level."""
        n_nodes = len(paths)
        with no_grad():
            q_values = self.model.q_values(states).numpy().reshape(n_nodes, self.n_actions)
            if not leaf:
                repeated = np.repeat(states, self.n_actions, axis=0)
                actions = np.tile(np.arange(self.n_actions), n_nodes)
                next_states = self.model.transition(repeated, actions).numpy()
                r_extr = self.model.predict_reward(repeated, actions).numpy().reshape(-1)
                discounts = self.model.predict_discount(repeated, actions).numpy().reshape(-1)
        if leaf:
            rewards = discounts = next_states = [None] * n_nodes
        else:
            rewards = (self.intrinsic(next_states) + np.clip(r_extr, *REWARD_CLIP)) \
                .reshape(n_nodes, self.n_actions)
            discounts = np.clip(discounts, *DISCOUNT_CLIP).reshape(n_nodes, self.n_actions)
            next_states = next_states.reshape(n_nodes, self.n_actions, -1)
        nodes = []
        for i, path in enumerate(paths):
            node = PlanNode(path, len(path), states[i], q_values[i], rewards[i], discounts[i],
                            next_states[i], best_actions(q_values[i], self.b))
            nodes.append(node)
            if self.trace is not None:
                self.trace.append({
                    'path': list(path),
                    'depth': node.depth,
                    'state': node.state,
                    'q_values': node.q_values,
                    'rewards': node.rewards,
                    'discounts': node.discounts,
                    'expansion': node.expansion,
                    })
        self.nodes_evaluated += n_nodes
        return nodes

    def _expand(self, depth):
        """Builds every node reachable within depth steps: all actions at
            the root, the b best below it."""
        paths = [()]
        states = self._root.reshape(1, -1)
        for level in range(depth + 1):
            nodes = self._evaluate_level(paths, states, leaf=level == depth)
            self._nodes.update((node.path, node) for node in nodes)
            if level == depth:
                break
            children = [(node, a) for node in nodes
                        for a in (range(self.n_actions) if level == 0 else node.expansion)]
            paths = [node.path + (a,) for node, a in children]
            states = np.stack([node.next_states[a] for node, a in children])

    def node(self, path):
        """Gets the node reached by following path from the root."""
        if path not in self._nodes:
            raise KeyError('path %s lies outside the expanded tree' % (path,))
        return self._nodes[path]

    def q_hat(self, path, action, depth):
        """Rollout value of action at the node reached by path."""
        key = (path, action, depth)
        if self.memoize and key in self._values:
            return self._values[key]
        node = self.node(path)
        if depth == 0:
            value = float(node.q_values[action])
        else:
            child_path = path + (action,)
            child = self.node(child_path)
            best = max(self.q_hat(child_path, a, depth - 1) for a in child.expansion)
            value = float(node.rewards[action] + node.discounts[action] * best)
        if self.memoize:
            self._values[key] = value
        return value

    def set_root(self, state, depth = None):
        """Resets the planner on a new root and expands its tree to depth
            (the configured D by default)."""
        self._root = np.asarray(state, dtype=np.float64).reshape(-1)
        self._nodes = {}
        self._values = {}
        self._expand(self.plan_config.depth if depth is None else depth)

    def q_plan(self, state):
        """Sums the rollout values over depths 0..D for every root action."""
        self.set_root(state)
        depth = self.plan_config.depth
        values = np.zeros(self.n_actions)
        for action in range(self.n_actions):
            total = 0.0
            for d in range(depth + 1):
                total += self.q_hat((), action, d)
            values[action] = total
        return values

    def max_nodes(self):
        """Nodes evaluated by one q_plan call: the root, every action below
            it, then b children per node down to depth D."""
        return 1 + self.n_actions * sum(self.b ** d for d in range(self.plan_config.depth))


def q_hat_d(x, action, depth, model, plan_config, points = None, k = 5, intrinsic = None):
    """Rollout value Q^d(x, action) under the current model."""
    if depth < 0:
        raise ValueError('depth must be >= 0')
    planner = Planner(model, plan_config, points, k, intrinsic)
    planner.set_root(x, int(depth))
    return planner.q_hat((), int(action), int(depth))


def q_plan(x, model, plan_config, points = None, k = 5, intrinsic = None, memoize = True):
    """Q_plan(x, .) as an array with one entry per action."""
    return Planner(model, plan_config, points, k, intrinsic, memoize=memoize).q_plan(x)


def select_action(x, model, plan_config, rng, points = None, k = 5, intrinsic = None,
                  trace = False):
    """Epsilon-greedy over Q_plan: draws u ~ U[0,1) first; if u < epsilon a
        uniform random action is returned without planning, otherwise the
        argmax of Q_plan (lowest index on ties). Returns a Decision."""
    u = rng.random()
    if u < plan_config.epsilon:
        return Decision(int(rng.integers(model.n_actions)), None, True, 0, None)
    planner = Planner(model, plan_config, points, k, intrinsic, trace=trace)
    values = planner.q_plan(x)
    action = int(np.argmax(values))
    logger.debug('Q_plan %s -> action %d (%d nodes)', values, action, planner.nodes_evaluated)
    return Decision(action, values, False, planner.nodes_evaluated, planner.trace)
