"""The novelty module of scoutpy: the transition history buffer, the k-NN
    novelty score in abstract space and the intrinsic-reward refresh.

    The novelty of a point is the mean l2 distance to its k nearest
    buffered encodings. Buffered records are scored without their own
    encoding, the same view the online score has before insertion."""

import collections
import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gamma as gamma_fn
from . import log_util
from .scoutnets import encode_numpy
from .utils import write_ndjson

logger = log_util.get_logger(__name__)

TransitionRecord = collections.namedtuple(
    'TransitionRecord',
    ['state', 'obs', 'action', 'r_extr', 'r_intr', 'gamma', 'next_state', 'next_obs'])


class HistoryBuffer:
    """A FIFO ring buffer of TransitionRecords; the oldest record is
        evicted first once capacity is reached."""

    def __init__(self, capacity = 1000):
        if capacity < 1:
            raise ValueError('Buffer capacity must be positive')
        self._records = collections.deque(maxlen=capacity)

    @property
    def capacity(self):
        """Gets the maximum number of records"""
        return self._records.maxlen

    @property
    def records(self):
        """Gets the records, oldest first"""
        return list(self._records)

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def __getitem__(self, index):
        return self._records[index]

    def append(self, record):
        """Adds a record; returns the evicted record, if any."""
        evicted = self._records[0] if len(self._records) == self.capacity else None
        self._records.append(record)
        return evicted

    def sample(self, batch_size, rng):
        """Draws batch_size records uniformly with replacement."""
        if not self._records:
            raise ValueError('Cannot sample from an empty buffer')
        indices = rng.integers(0, len(self._records), size=batch_size)
        return [self._records[i] for i in indices]

    def observations(self):
        return np.stack([r.obs for r in self._records])

    def next_observations(self):
        return np.stack([r.next_obs for r in self._records])

    def intrinsic_rewards(self):
        return np.array([r.r_intr for r in self._records], dtype=np.float64)

    def mean_r_intr(self):
        """Mean intrinsic reward over the buffer (0 when empty)"""
        return float(self.intrinsic_rewards().mean()) if self._records else 0.0

    def set_intrinsic_rewards(self, values):
        """Replaces every record's r_intr, in buffer order."""
        if len(values) != len(self._records):
            raise ValueError('Got %d rewards for %d records' % (len(values), len(self._records)))
        self._records = collections.deque(
            (r._replace(r_intr=float(v)) for r, v in zip(self._records, values)),
            maxlen=self._records.maxlen)

    def dump(self, path, model = None):
        """Writes one NDJSON line per record; with a model, the encoded
            current and next states are included."""
        rows = []
        if model is not None and self._records:
            xs = encode_numpy(model, self.observations())
            xs_next = encode_numpy(model, self.next_observations())
        for i, record in enumerate(self._records):
            row = {
                'index': i,
                'state': record.state,
                'action': record.action,
                'r_extr': record.r_extr,
                'r_intr': record.r_intr,
                'gamma': record.gamma,
                'next_state': record.next_state,
                }
            if model is not None:
                row['x'] = xs[i]
                row['x_next'] = xs_next[i]
            rows.append(row)
        write_ndjson(path, rows)


def _distances(x, points):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError('k-NN query on an empty buffer')
    return cdist(np.asarray(x, dtype=np.float64).reshape(1, -1), points)[0]


def knn(x, points, k, exclude = None):
    """Exact k nearest neighbours of x among points by l2 distance.
        Returns (index, distance) pairs in ascending distance; ties keep
        insertion order. Fewer than k points returns all of them. exclude
        drops one index (the query's own record)."""
    if k < 1:
        raise ValueError('k must be at least 1')
    distances = _distances(x, points)
    order = np.argsort(distances, kind='stable')
    if exclude is not None:
        order = order[order != exclude]
    return [(int(i), float(distances[i])) for i in order[:k]]


def novelty_score(x, points, k, exclude = None):
    """Mean distance from x to its k nearest buffered encodings, divided
        by the number of neighbours actually found (0 if none remain after
        exclusion)."""
    neighbours = knn(x, points, k, exclude=exclude)
    if not neighbours:
        return 0.0
    return float(np.mean([d for _, d in neighbours]))


def buffer_novelty(points, k):
    """Scores every point against all the others (self excluded)."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n == 0:
        return np.zeros(0)
    m = min(k, n - 1)
    if m == 0:
        return np.zeros(n)
    distances = cdist(points, points)
    np.fill_diagonal(distances, np.inf)
    distances.sort(axis=1)
    return distances[:, :m].mean(axis=1)


def refresh_intrinsic_rewards(buffer, model, k):
    """Recomputes every record's r_intr as the novelty of its encoded next
        state against the whole buffer under the current encoder."""
    if not len(buffer):
        return buffer
    points = encode_numpy(model, buffer.next_observations())
    buffer.set_intrinsic_rewards(buffer_novelty(points, k))
    logger.debug('Refreshed %d intrinsic rewards, mean %.6f', len(buffer), buffer.mean_r_intr())
    return buffer


def ball_volume(radius, dim):
    """Volume of the dim-dimensional ball of the given radius."""
    return np.pi ** (dim / 2.0) / gamma_fn(dim / 2.0 + 1.0) * radius ** dim


def recoding_density_oracle(x, points, k):
    """k-NN density estimate k / (n V(x, x_k)), with V the ball volume of
        radius equal to the distance to the k-th neighbour. Returns +inf for
        a zero radius."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n <= k:
        raise ValueError('Density oracle needs more than k=%d points, got %d' % (k, n))
    radius = np.sort(_distances(x, points))[k - 1]
    if radius == 0.0:
        return np.inf
    return k / (n * ball_volume(radius, points.shape[1]))


def mean_pairwise_distance(points):
    """Mean l2 distance over all distinct pairs (0 for fewer than two)."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 2:
        return 0.0
    distances = cdist(points, points)
    return float(distances.sum() / (n * (n - 1)))
