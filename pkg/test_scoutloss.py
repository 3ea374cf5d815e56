"""Test cases for scoutpy.scoutloss"""

import numpy as np
import pytest
from scoutpy.scoutconfig import RunConfig
from scoutpy.scoutloss import (Batch, LossReport, ModelTrainer, ModelFreeTrainer, ddqn_target,
                               loss_csc, loss_q, loss_reward_discount, loss_transition,
                               loss_uniformity, total_loss, transition_errors)
from scoutpy.scoutnets import ModelFreeQ
from scoutpy.scouttensor import Tensor, numerical_gradient, relative_error
from testutil import util


class LinearStub:
    """A hand-set model: identity encoders, linear live and target Q, and a
        transition that adds a fixed vector"""

    n_actions = 2
    n_x = 2

    def __init__(self, live, target, shift = (0.0, 0.0)):
        self.live = np.asarray(live, dtype=float)
        self.target = np.asarray(target, dtype=float)
        self.shift = np.asarray(shift, dtype=float)

    def encode(self, obs, target = False):
        return Tensor(np.atleast_2d(obs))

    def q_values(self, x, target = False):
        return x @ Tensor(self.target if target else self.live)

    def transition(self, x, actions, training = False, rng = None):
        return x + Tensor(self.shift)


class ReversedPairs:
    """Pairs each row with the mirrored row"""

    def permutation(self, n):
        return np.arange(n)[::-1]


class TestDdqnTarget:
    """Test the bootstrapped target"""

    def test_two_state_fixture(self):
        """Test case: the live net picks the action, the target net values it"""
        model = LinearStub(live=[[1.0, 2.0], [3.0, 0.0]], target=[[5.0, 7.0], [11.0, 13.0]])
        batch = Batch([[0.0, 1.0], [1.0, 0.0]], [0, 1], [1.0, 0.0], [0.5, 0.25],
                      [0.8, 0.0], [[1.0, 0.0], [0.0, 1.0]])
        targets = ddqn_target(batch, model)
        assert abs(targets[0] - (1.0 + 0.5 + 0.8 * 7.0)) < 1e-12
        assert abs(targets[1] - 0.25) < 1e-12

    def test_identical_nets_single_action(self):
        """Test case: with one action and identical nets the target is r + gamma Q(x')"""
        model = LinearStub(live=[[2.0], [3.0]], target=[[2.0], [3.0]])
        batch = Batch([[0.0, 0.0]], [0], [1.0], [0.0], [0.8], [[1.0, 1.0]])
        assert abs(ddqn_target(batch, model)[0] - (1.0 + 0.8 * 5.0)) < 1e-12

    def test_reuses_live_encoding(self):
        """Test case: passing the live next-state encoding gives the same target"""
        model = util.small_model(2)
        batch = util.random_batch(np.random.default_rng(7))
        x_next = model.encode(batch.next_obs)
        assert np.array_equal(ddqn_target(batch, model, x_next), ddqn_target(batch, model))


class TestLossValues:
    """Test each loss on hand-checkable inputs"""

    def test_loss_q_offset(self):
        """Test case: a constant offset c from the target gives c squared"""
        model = LinearStub(live=[[1.0, 0.0], [0.0, 1.0]], target=[[0.0, 0.0], [0.0, 0.0]])
        batch = Batch([[1.0, 2.0], [3.0, 4.0]], [0, 1], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0],
                      [[0.0, 0.0], [0.0, 0.0]])
        assert abs(loss_q(batch, model, targets=np.array([1.5, 4.5])).item() - 0.25) < 1e-12
        assert loss_q(batch, model, targets=np.array([1.0, 4.0])).item() == 0.0

    def test_transition_error(self):
        """Test case: a prediction error of (0.3, 0.4) gives 0.25"""
        model = LinearStub(live=[[0.0]], target=[[0.0]], shift=(0.3, 0.4))
        batch = Batch([[1.0, 1.0]], [0], [0.0], [0.0], [0.8], [[1.0, 1.0]])
        assert abs(loss_transition(batch, model).item() - 0.25) < 1e-12
        assert abs(transition_errors(batch, model)[0] - 0.25) < 1e-12

    def test_uniformity(self):
        """Test case: identical encodings give 1, unit distance with C_d1 = 5 gives e^-5"""
        same = (Tensor(np.ones((4, 2))), None)
        assert loss_uniformity(None, None, 5.0, ReversedPairs(), encoded=same).item() == 1.0
        apart = (Tensor([[0.0, 0.0], [1.0, 0.0]]), None)
        value = loss_uniformity(None, None, 5.0, ReversedPairs(), encoded=apart).item()
        assert abs(value - 0.006738) < 1e-6
        far = (Tensor([[0.0, 0.0], [100.0, 0.0]]), None)
        assert loss_uniformity(None, None, 5.0, ReversedPairs(), encoded=far).item() < 1e-12

    @pytest.mark.parametrize('distance, expected', [(0.3, 0.0), (0.5, 0.0), (0.9, 0.4)])
    def test_csc(self, distance, expected):
        """Test case: the hinge is zero inside the slack and linear beyond it"""
        encoded = (Tensor([[0.0, 0.0]]), Tensor([[0.0, distance]]))
        assert abs(loss_csc(None, None, 0.5, encoded=encoded).item() - expected) < 1e-12

    def test_report_sum(self):
        """Test case: the report total is the sum of its six components"""
        report = LossReport.from_components(
            L_Q=0.1, L_R=0.2, L_G=0.3, L_tau=0.4, L_d1=0.5, L_csc=0.6)
        assert abs(report.total - 2.1) < 1e-12
        zero = LossReport.from_components(L_Q=0, L_R=0, L_G=0, L_tau=0, L_d1=0, L_csc=0)
        assert zero.total == 0

    def test_report_matches_components(self):
        """Test case: total_loss reports the individually computed losses"""
        model = util.small_model(0)
        config = RunConfig()
        batch = util.random_batch(np.random.default_rng(1))
        report, total = total_loss(batch, model, config, np.random.default_rng(2), training=False)
        l_r, l_g = loss_reward_discount(batch, model)
        assert abs(report.L_Q - loss_q(batch, model).item()) < 1e-12
        assert abs(report.L_R - l_r.item()) < 1e-12
        assert abs(report.L_G - l_g.item()) < 1e-12
        assert abs(report.L_tau - loss_transition(batch, model).item()) < 1e-12
        assert abs(report.L_d1 - loss_uniformity(
            batch, model, config.c_d1, np.random.default_rng(2)).item()) < 1e-12
        assert abs(report.L_csc - loss_csc(batch, model, config.omega).item()) < 1e-12
        assert abs(report.total - total.item()) < 1e-12

    def test_loss_weights(self):
        """Test case: a zero weight drops a component from the total"""
        model = util.small_model(0)
        config = RunConfig(loss_weights={'q': 0.0})
        batch = util.random_batch(np.random.default_rng(1))
        report, total = total_loss(batch, model, config, np.random.default_rng(2), training=False)
        rest = report.L_R + report.L_G + report.L_tau + report.L_d1 + report.L_csc
        assert abs(total.item() - rest) < 1e-12


class TestLossGradients:
    """Test analytic gradients of every loss against finite differences"""

    def check(self, model, fn, params):
        for param in params:
            util.grad_reset(model)
            fn().backward()
            analytic = param.grad.copy()
            numeric = numerical_gradient(lambda: fn().item(), param)
            assert relative_error(analytic, numeric) <= 1e-4, param.name

    @pytest.mark.parametrize('seed', range(4))
    def test_all_losses(self, seed):
        """Test case: each loss's gradient matches central differences on a tiny model"""
        model = util.small_model(seed)
        batch = util.random_batch(np.random.default_rng(100 + seed))
        encoder = model.encoder.parameters()
        self.check(model, lambda: loss_q(batch, model), model.q_net.parameters())
        self.check(model, lambda: loss_reward_discount(batch, model)[0],
                   encoder + model.reward_net.parameters())
        self.check(model, lambda: loss_reward_discount(batch, model)[1],
                   model.discount_net.parameters())
        self.check(model, lambda: loss_transition(batch, model),
                   encoder + model.transition_net.parameters())
        self.check(model, lambda: loss_uniformity(batch, model, 5.0,
                                                  np.random.default_rng(seed)), encoder)
        self.check(model, lambda: loss_csc(batch, model, 0.01), encoder)

    def test_q_loss_leaves_encoder(self):
        """Test case: L_Q sends no gradient into the encoder"""
        model = util.small_model(0)
        batch = util.random_batch(np.random.default_rng(0))
        util.grad_reset(model)
        loss_q(batch, model).backward()
        assert all(p.grad is None for p in model.encoder.parameters())


class TestChainGeometry:
    """Test what the consecutive-distance and uniformity losses do together"""

    def test_three_state_chain(self):
        """Test case: on a 3-state chain neighbours stay within omega and the ends spread"""
        omega = 0.5
        x = Tensor([[0.0, 0.0], [0.1, 0.05], [0.2, -0.02]], requires_grad=True)
        steps = (np.array([0, 1]), np.array([1, 2]))
        for _ in range(2000):
            x.grad = None
            consecutive = (x[steps[0]], x[steps[1]])
            loss = loss_csc(None, None, omega, encoded=consecutive) + \
                loss_uniformity(None, None, 5.0, ReversedPairs(), encoded=(x, None))
            loss.backward()
            x.data[...] -= 0.01 * x.grad
        points = x.numpy()
        assert np.linalg.norm(points[0] - points[1]) <= omega + 0.05
        assert np.linalg.norm(points[1] - points[2]) <= omega + 0.05
        assert np.linalg.norm(points[0] - points[2]) > omega


class TestTrainers:
    """Test the optimisation loops"""

    def test_train_step(self):
        """Test case: a step updates every group, counts the update and reports finite losses"""
        model = util.small_model(3, freeze_interval=1)
        config = RunConfig(freeze_interval=1)
        trainer = ModelTrainer(model, config, np.random.default_rng(0))
        groups = model.parameter_groups()
        before = {name: [p.data.copy() for p in params] for name, params in groups.items()}
        report = trainer.train_step(util.random_batch(np.random.default_rng(4)))
        for name, params in groups.items():
            assert any(not np.array_equal(old, p.data) for old, p in zip(before[name], params))
        assert np.isfinite(report.total)
        assert trainer.iterations == 1 and trainer.last_report is report
        assert model.steps_since_sync == 0

    def test_transition_loss_decreases(self):
        """Test case: repeated steps on one batch shrink the transition loss"""
        model = util.small_model(5)
        config = RunConfig(lr=0.01, dropout=0.0)
        trainer = ModelTrainer(model, config, np.random.default_rng(0))
        batch = util.random_batch(np.random.default_rng(6), size=8)
        first = trainer.train_step(batch).L_tau
        for _ in range(200):
            last = trainer.train_step(batch).L_tau
        assert last < first

    def test_model_free_step(self):
        """Test case: a DDQN step on observations returns a finite L_Q and moves the weights"""
        q = ModelFreeQ(7, 4, rng=np.random.default_rng(0), architecture=util.tiny)
        trainer = ModelFreeTrainer(q, lr=0.001)
        before = q.q_net.layers[0].weight.data.copy()
        value = trainer.train_step(util.random_batch(np.random.default_rng(1)))
        assert np.isfinite(value) and value >= 0.0
        assert not np.array_equal(before, q.q_net.layers[0].weight.data)
