"""The autodiff module of scoutpy: dense float64 tensors with reverse-mode
    differentiation, the Dense/FeedForward layer primitives and RMSProp.

    Tensors record the op that produced them and their parents; a
    ComputationTape orders those records topologically from a scalar output
    and runs the backward pass once over them."""

import contextlib
import numpy as np
from . import log_util
from .errors import ShapeError, NonFiniteError

logger = log_util.get_logger(__name__)

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disables graph recording inside the block (planning, scoring)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def _unbroadcast(grad, shape):
    """Sums grad down to shape, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def as_tensor(value):
    """Wraps constants as non-differentiable tensors."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class Tensor:
    """A dense n-dimensional float64 array participating in reverse-mode
        differentiation."""

    def __init__(self, data, requires_grad = False, name = None):
        """Initializes a leaf tensor with a copy of data."""
        self._data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None
        self._op = 'leaf'

    @classmethod
    def _make(cls, data, parents, backward, op):
        """Creates an op output, recording it only when a parent needs
            gradients and recording is enabled."""
        data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("non-finite value produced by op '%s'" % op)
        out = cls.__new__(cls)
        out._data = data
        out.grad = None
        out.name = None
        out._op = op
        track = _grad_enabled and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    # properties
    @property
    def data(self):
        """Gets the underlying array (mutable; optimizers update it in place)"""
        return self._data

    @property
    def shape(self):
        """Gets the shape as a tuple"""
        return self._data.shape

    @property
    def size(self):
        """Gets the number of elements"""
        return self._data.size

    @property
    def op(self):
        """Gets the name of the op that produced this tensor"""
        return self._op

    @property
    def parents(self):
        """Gets the recorded inputs of the op that produced this tensor"""
        return self._parents

    def __repr__(self):
        return "Tensor(shape=%s, op=%s, requires_grad=%s)" % (
            self.shape, self._op, self.requires_grad)

    def numpy(self):
        """Returns a copy of the values as a numpy array."""
        return self._data.copy()

    def item(self):
        """Returns the value of a one-element tensor as a float."""
        if self.size != 1:
            raise ShapeError("tensor of shape %s is not a scalar" % (self.shape,))
        return float(self._data.reshape(-1)[0])

    def detach(self):
        """Returns the same values cut off from the graph."""
        return Tensor._make(self._data, (), None, 'detach')

    # arithmetic
    def __add__(self, other):
        a, b = self, as_tensor(other)
        return Tensor._make(
            a._data + b._data, (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
            'add')

    def __radd__(self, other):
        return as_tensor(other).__add__(self)

    def __sub__(self, other):
        a, b = self, as_tensor(other)
        return Tensor._make(
            a._data - b._data, (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
            'sub')

    def __rsub__(self, other):
        return as_tensor(other).__sub__(self)

    def __neg__(self):
        a = self
        return Tensor._make(-a._data, (a,), lambda g: (-g,), 'neg')

    def __mul__(self, other):
        a, b = self, as_tensor(other)
        return Tensor._make(
            a._data * b._data, (a, b),
            lambda g: (_unbroadcast(g * b._data, a.shape),
                       _unbroadcast(g * a._data, b.shape)),
            'mul')

    def __rmul__(self, other):
        return as_tensor(other).__mul__(self)

    def __truediv__(self, other):
        a, b = self, as_tensor(other)
        return Tensor._make(
            a._data / b._data, (a, b),
            lambda g: (_unbroadcast(g / b._data, a.shape),
                       _unbroadcast(-g * a._data / (b._data * b._data), b.shape)),
            'div')

    def __pow__(self, exponent):
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        a, c = self, float(exponent)
        return Tensor._make(
            a._data ** c, (a,),
            lambda g: (g * c * a._data ** (c - 1.0),),
            'pow')

    def __matmul__(self, other):
        a, b = self, as_tensor(other)
        if a._data.ndim != 2 or b._data.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError("matmul of shapes %s and %s" % (a.shape, b.shape))
        # inputs that need no gradient (observations, one-hot actions) get None
        return Tensor._make(
            a._data @ b._data, (a, b),
            lambda g: (g @ b._data.T if a.requires_grad else None,
                       a._data.T @ g if b.requires_grad else None),
            'matmul')

    # elementwise functions
    def tanh(self):
        a = self
        y = np.tanh(a._data)
        return Tensor._make(y, (a,), lambda g: (g * (1.0 - y * y),), 'tanh')

    def relu(self):
        a = self
        mask = (a._data > 0).astype(np.float64)
        return Tensor._make(a._data * mask, (a,), lambda g: (g * mask,), 'relu')

    def exp(self):
        a = self
        y = np.exp(a._data)
        return Tensor._make(y, (a,), lambda g: (g * y,), 'exp')

    def sqrt(self):
        a = self
        y = np.sqrt(a._data)
        # the derivative is taken as 0 at 0 so norms of identical points stay finite
        safe = np.where(y > 0, y, 1.0)
        return Tensor._make(
            y, (a,), lambda g: (np.where(y > 0, g * 0.5 / safe, 0.0),), 'sqrt')

    # reductions and reshaping
    def sum(self, axis = None, keepdims = False):
        a = self
        y = a._data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape).copy(),)
        return Tensor._make(y, (a,), backward, 'sum')

    def mean(self, axis = None):
        count = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) / float(count)

    def reshape(self, *shape):
        a = self
        return Tensor._make(
            a._data.reshape(*shape), (a,),
            lambda g: (g.reshape(a.shape),), 'reshape')

    def __getitem__(self, index):
        a = self

        def backward(g):
            full = np.zeros(a.shape)
            np.add.at(full, index, g)
            return (full,)
        return Tensor._make(a._data[index], (a,), backward, 'index')

    def pick(self, indices):
        """Selects one column per row: out[i] = self[i, indices[i]]."""
        a = self
        indices = np.asarray(indices, dtype=np.int64)
        if a._data.ndim != 2 or len(indices) != a.shape[0]:
            raise ShapeError("pick of %d indices from shape %s" % (len(indices), a.shape))
        rows = np.arange(a.shape[0])

        def backward(g):
            full = np.zeros(a.shape)
            full[rows, indices] = g
            return (full,)
        return Tensor._make(a._data[rows, indices], (a,), backward, 'pick')

    def norm(self, axis = -1):
        """Euclidean norm along axis."""
        return (self * self).sum(axis=axis).sqrt()

    def backward(self):
        """Runs the backward pass from this scalar and returns the tape."""
        tape = ComputationTape(self)
        tape.backward()
        return tape


def concat(tensors, axis = -1):
    """Concatenates tensors along axis."""
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t._data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return Tensor._make(
        data, tensors,
        lambda g: tuple(np.split(g, bounds, axis=axis)),
        'concat')


class ComputationTape:
    """The primitive ops recorded under one scalar output, in topological
        order (inputs before the ops that consume them)."""

    def __init__(self, output):
        """Records the graph reachable from output."""
        self._output = output
        self._nodes = self._toposort(output)

    @staticmethod
    def _toposort(output):
        order = []
        visited = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    @property
    def nodes(self):
        """Gets the recorded nodes in topological order"""
        return list(self._nodes)

    @property
    def output(self):
        """Gets the output node the tape was recorded from"""
        return self._output

    def leaves(self):
        """Returns the recorded leaf tensors that require gradients."""
        return [n for n in self._nodes if n._backward is None and n.requires_grad]

    def backward(self):
        """Visits every node once in reverse order and sets .grad on each
            leaf that requires it. Gradients are overwritten, not
            accumulated, so running the pass twice gives identical results.
            Returns a list of (leaf, gradient) pairs."""
        if self._output.size != 1:
            raise ShapeError(
                "backward needs a scalar output, got shape %s" % (self._output.shape,))
        grads = {id(self._output): np.ones(self._output.shape)}
        for node in reversed(self._nodes):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, parent_grad in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + parent_grad
                else:
                    grads[id(parent)] = np.array(parent_grad, dtype=np.float64)
        result = []
        for leaf in self.leaves():
            leaf.grad = grads.get(id(leaf), np.zeros(leaf.shape))
            result.append((leaf, leaf.grad))
        return result


def backward(output):
    """Records the tape under a scalar output and runs the backward pass.
        Returns a list of (leaf, gradient) pairs."""
    return ComputationTape(output).backward()


def dropout(x, rate, rng, training = True):
    """Inverted dropout: zeroes each unit with probability rate and scales the
        survivors by 1/(1-rate) in training mode; identity otherwise."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1), got %r" % rate)
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return x * keep


class Dense:
    """A fully connected layer y = act(x W + b), optionally followed by
        dropout in training mode."""

    _activations = {
        None: lambda t: t,
        'linear': lambda t: t,
        'tanh': Tensor.tanh,
        'relu': Tensor.relu,
        }

    def __init__(self, in_features, units, activation = None, dropout = 0.0,
                 rng = None, name = 'dense'):
        """Initializes weights uniformly in +-sqrt(6/(fan_in+fan_out)) and
            biases at zero."""
        if activation not in self._activations:
            raise ValueError('Unknown activation %r' % activation)
        rng = rng if rng is not None else np.random.default_rng()
        limit = np.sqrt(6.0 / (in_features + units))
        self.name = name
        self.in_features = in_features
        self.units = units
        self.activation = activation
        self.dropout = dropout
        self.weight = Tensor(rng.uniform(-limit, limit, (in_features, units)),
                             requires_grad=True, name=name + '/weight')
        self.bias = Tensor(np.zeros(units), requires_grad=True, name=name + '/bias')

    def parameters(self):
        return [self.weight, self.bias]

    def __call__(self, x, training = False, rng = None):
        x = as_tensor(x)
        if x._data.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError("layer '%s' expects (batch, %d) input, got %s" % (
                self.name, self.in_features, x.shape))
        y = self._activations[self.activation](x @ self.weight + self.bias)
        if self.dropout > 0.0 and training:
            y = dropout(y, self.dropout, rng, training=True)
        return y


class FeedForward:
    """A stack of Dense layers built from a description: a list of
        (units, activation, dropout) tuples."""

    def __init__(self, in_features, description, rng = None, name = 'net'):
        self.name = name
        self.in_features = in_features
        self.description = [tuple(layer) for layer in description]
        self.layers = []
        width = in_features
        for i, (units, activation, rate) in enumerate(self.description):
            self.layers.append(Dense(width, units, activation, rate, rng,
                                     name='%s/%d' % (name, i)))
            width = units
        self.out_features = width

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def named_parameters(self):
        return [(p.name, p) for p in self.parameters()]

    def __call__(self, x, training = False, rng = None):
        for layer in self.layers:
            x = layer(x, training=training, rng=rng)
        return x

    def copy_from(self, other):
        """Copies every parameter value from a network of identical shape."""
        for mine, theirs in zip(self.parameters(), other.parameters()):
            if mine.shape != theirs.shape:
                raise ShapeError("cannot copy %s %s into %s %s" % (
                    theirs.name, theirs.shape, mine.name, mine.shape))
            mine.data[...] = theirs.data


def forward(network, inputs, training = False, rng = None):
    """Evaluates a FeedForward (or Dense) on a batch of inputs."""
    return network(inputs, training=training, rng=rng)


class RmsPropState:
    """Per-parameter running means of squared gradients."""

    def __init__(self, params, decay = 0.9, epsilon = 1e-8):
        if not 0.0 < decay < 1.0:
            raise ValueError('RMSProp decay must be in (0, 1)')
        if epsilon <= 0.0:
            raise ValueError('RMSProp epsilon must be positive')
        self.decay = decay
        self.epsilon = epsilon
        self.avg = [np.zeros(p.shape) for p in params]


def rmsprop_step(params, grads, state, lr):
    """Applies avg <- decay*avg + (1-decay)*g^2 and
        param <- param - lr*g/(sqrt(avg)+epsilon) in place. All gradients are
        checked before any parameter is touched."""
    if not (len(params) == len(grads) == len(state.avg)):
        raise ShapeError('params, grads and optimizer state differ in length')
    for param, grad, avg in zip(params, grads, state.avg):
        if param.shape != grad.shape or avg.shape != grad.shape:
            raise ShapeError("gradient shape %s for parameter %s %s" % (
                grad.shape, param.name, param.shape))
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("non-finite gradient for parameter %s" % param.name)
    for param, grad, avg in zip(params, grads, state.avg):
        avg *= state.decay
        avg += (1.0 - state.decay) * grad * grad
        param.data[...] -= lr * grad / (np.sqrt(avg) + state.epsilon)
    return params


class RmsProp:
    """RMSProp over one parameter group, reading gradients from .grad."""

    def __init__(self, params, lr, decay = 0.9, epsilon = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.state = RmsPropState(self.params, decay, epsilon)

    def step(self):
        grads = [p.grad if p.grad is not None else np.zeros(p.shape)
                 for p in self.params]
        rmsprop_step(self.params, grads, self.state, self.lr)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def numerical_gradient(fn, tensor, h = 1e-5):
    """Central finite differences of the scalar fn() with respect to every
        element of tensor (perturbed in place and restored)."""
    grad = np.zeros(tensor.shape)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = float(fn())
        flat[i] = original - h
        minus = float(fn())
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor = 1e-6):
    """||a - n|| / max(||a|| + ||n||, floor). The floor turns the check
        absolute for gradients that are zero up to finite-difference
        noise."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / denom)
