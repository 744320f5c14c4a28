"""Queryable maps with exact query accounting and anchoring."""
import threading

import numpy as np

from .errors import InvalidInput


class QueryCounter:
    """Monotone counter shared by a box and every box derived from it."""

    def __init__(self):
        self._n = 0
        self._lock = threading.Lock()

    def add(self, k=1):
        with self._lock:
            self._n += k

    @property
    def value(self):
        return self._n


class BlackBox:
    """A deterministic map R^d_in -> R^d_out that counts its evaluations.

    ``fn`` takes a 1-D array and returns a 1-D array. ``batch_fn``, when
    given, takes an (N, d_in) array and must agree row-for-row with ``fn``;
    it only exists to make bulk queries cheap. Each row still counts as one
    query.

    Concurrent calls are allowed only when ``reentrant`` is true; the
    counter itself is always thread-safe.
    """

    def __init__(self, fn, d_in, d_out, *, batch_fn=None, reentrant=False, name="f", counter=None):
        if d_in < 1 or d_out < 1:
            raise InvalidInput("dimensions must be >= 1")
        self._fn = fn
        self._batch_fn = batch_fn
        self.d_in = int(d_in)
        self.d_out = int(d_out)
        self.reentrant = reentrant
        self.name = name
        self.counter = counter if counter is not None else QueryCounter()
        self.anchor = None
        self.anchor_output = None

    @property
    def query_count(self):
        return self.counter.value

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d_in,):
            raise InvalidInput(f"{self.name}: expected input of shape ({self.d_in},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidInput(f"{self.name}: non-finite input")
        return x

    def _raw(self, x):
        return np.asarray(self._fn(x), dtype=np.float64).reshape(self.d_out)

    def _raw_batch(self, xs):
        if self._batch_fn is not None:
            return np.asarray(self._batch_fn(xs), dtype=np.float64).reshape(len(xs), self.d_out)
        return np.array([self._raw(x) for x in xs]).reshape(len(xs), self.d_out)

    def evaluate(self, x):
        x = self._check(x)
        self.counter.add(1)
        return self._raw(x)

    __call__ = evaluate

    def evaluate_many(self, xs):
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.d_in:
            raise InvalidInput(f"{self.name}: expected inputs of shape (N, {self.d_in}), got {xs.shape}")
        if not np.all(np.isfinite(xs)):
            raise InvalidInput(f"{self.name}: non-finite input")
        self.counter.add(len(xs))
        if len(xs) == 0:
            return np.zeros((0, self.d_out))
        return self._raw_batch(xs)

    def anchored(self, x_star):
        return AnchoredBlackBox(self, x_star)

    # -- global/local coordinates; identity for an unanchored box --
    def to_local(self, x):
        return np.asarray(x, dtype=np.float64)

    def to_global(self, h):
        return np.asarray(h, dtype=np.float64)

    def global_output(self, y):
        return np.asarray(y, dtype=np.float64)

    @classmethod
    def linear(cls, a, b=None, **kw):
        a = np.array(a, dtype=np.float64)
        if a.ndim == 1:
            a = a[None, :]
        b = np.zeros(a.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
        return cls(lambda x: a @ x + b, a.shape[1], a.shape[0],
                   batch_fn=lambda xs: xs @ a.T + b, reentrant=True, **kw)


class AnchoredBlackBox(BlackBox):
    """The deviation map h -> f(x_star + h) - f(x_star).

    The anchor output is cached at construction (one query on the parent's
    counter); every later evaluation costs exactly one parent query.
    """

    def __init__(self, parent, x_star):
        x_star = parent._check(x_star)
        super().__init__(None, parent.d_in, parent.d_out, reentrant=parent.reentrant,
                         name=f"{parent.name}*", counter=parent.counter)
        self.parent = parent
        self.anchor = x_star.copy()
        self.anchor_output = parent.evaluate(x_star)

    def _raw(self, h):
        return self.parent._raw(self.anchor + h) - self.anchor_output

    def _raw_batch(self, hs):
        return self.parent._raw_batch(self.anchor + hs) - self.anchor_output

    def to_local(self, x):
        return np.asarray(x, dtype=np.float64) - self.anchor

    def to_global(self, h):
        return self.anchor + np.asarray(h, dtype=np.float64)

    def global_output(self, y):
        return self.anchor_output + np.asarray(y, dtype=np.float64)


def evaluate(f, x):
    return f.evaluate(x)


def anchored(f, x_star):
    return f.anchored(x_star)
