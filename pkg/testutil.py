"""Helpers shared by the scoutpy test modules"""

import numpy as np
from scoutpy.scoutloss import Batch
from scoutpy.scoutnets import AgentModel


class util:
    """Contains the small networks and random fixtures the test modules share"""

    ## Small hidden layers keep the tests fast
    tiny = {
        'encoder': [(6, 'tanh', 0.0)],
        'transition': [(5, 'tanh', None)],
        'reward': [(4, 'tanh', 0.0)],
        'discount': [(4, 'tanh', 0.0)],
        'q': [(5, 'relu', 0.0)],
        'q_observation': [(6, 'tanh', 0.0)],
        }

    def small_model(seed, obs_size = 7, n_x = 2, **kwargs):
        """A tiny AgentModel with 4 actions, seeded"""
        kwargs.setdefault('dropout', 0.1)
        return AgentModel(obs_size, 4, n_x, rng=np.random.default_rng(seed),
                          architecture=util.tiny, **kwargs)

    def random_batch(rng, size = 5, obs_size = 7):
        """A batch of random observations, actions and rewards"""
        return Batch(rng.normal(size=(size, obs_size)), rng.integers(0, 4, size),
                     rng.normal(size=size), rng.uniform(size=size),
                     rng.choice([0.0, 0.8], size), rng.normal(size=(size, obs_size)))

    def grad_reset(model):
        """Clears the gradients of every trainable parameter"""
        for params in model.parameter_groups().values():
            for p in params:
                p.grad = None
