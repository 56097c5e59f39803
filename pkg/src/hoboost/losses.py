"""Losses with analytic derivatives up to order 4, and a finite-difference oracle."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import mpmath
import numpy as np

MAX_ORDER = 4

# per-order step sizes for fd_derivative
FD_STEPS = {1: 1e-5, 2: 1e-5, 3: 1e-3, 4: 1e-3}


class LossKind(str, enum.Enum):
    LOGLOSS = "logloss"
    SQUARED_ERROR = "squared_error"


@dataclass(frozen=True, eq=False)
class GradBundle:
    """Per-row derivatives of the loss, ``g[k - 1]`` holds the k-th derivative."""

    g: np.ndarray

    def __post_init__(self):
        g = np.ascontiguousarray(self.g, dtype=np.float64)
        if g.ndim != 2 or not 1 <= g.shape[0] <= MAX_ORDER:
            raise ValueError("gradient bundle must have shape (order, n_rows), order in 1..4")
        if not np.all(np.isfinite(g)):
            raise ValueError("gradient bundle contains non-finite entries")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def order(self) -> int:
        return self.g.shape[0]

    @property
    def n_rows(self) -> int:
        return self.g.shape[1]

    def __getitem__(self, k: int) -> np.ndarray:
        """1-based access: ``bundle[2]`` is the second derivative."""
        if not 1 <= k <= self.order:
            raise IndexError(f"derivative order {k} not in bundle of order {self.order}")
        return self.g[k - 1]


def _sigmoid_pair(pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (p, 1 - p) each computed without cancellation."""
    p = np.exp(-np.logaddexp(0.0, -pred))
    q = np.exp(-np.logaddexp(0.0, pred))
    return p, q


def sigmoid(pred) -> np.ndarray:
    return _sigmoid_pair(np.asarray(pred, dtype=np.float64))[0]


def derivatives(kind, labels, predictions, order: int) -> GradBundle:
    """Analytic derivatives of the per-row loss w.r.t. the prediction.

    For logloss with ``p = sigmoid(pred)`` and ``q = 1 - p``::

        g1 = p - y
        g2 = p q
        g3 = p q (q - p)
        g4 = p q (1 - 6 p q)

    Squared error ``0.5 (y - pred)^2`` gives ``g1 = pred - y``, ``g2 = 1``
    and zero above that.
    """
    kind = LossKind(kind)
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"unsupported derivative order {order}; expected 1..{MAX_ORDER}")
    y = np.asarray(labels, dtype=np.float64)
    f = np.asarray(predictions, dtype=np.float64)
    if y.shape != f.shape:
        raise ValueError("labels and predictions differ in length")
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite prediction")

    out = np.zeros((order, f.size))
    if kind is LossKind.SQUARED_ERROR:
        out[0] = f - y
        if order >= 2:
            out[1] = 1.0
        return GradBundle(out)

    p, q = _sigmoid_pair(f)
    # (1 - y) p - y q equals p - y but keeps precision when p is close to 1
    out[0] = (1.0 - y) * p - y * q
    pq = p * q
    if order >= 2:
        out[1] = pq
    if order >= 3:
        out[2] = pq * (q - p)
    if order >= 4:
        out[3] = pq * (1.0 - 6.0 * pq)
    return GradBundle(out)


def pointwise_loss(kind, labels, predictions) -> np.ndarray:
    kind = LossKind(kind)
    y = np.asarray(labels, dtype=np.float64)
    f = np.asarray(predictions, dtype=np.float64)
    if y.shape != f.shape:
        raise ValueError("labels and predictions differ in length")
    if kind is LossKind.SQUARED_ERROR:
        return 0.5 * (y - f) ** 2
    # softplus form: -log p = log(1 + e^-f), -log(1 - p) = log(1 + e^f)
    return y * np.logaddexp(0.0, -f) + (1.0 - y) * np.logaddexp(0.0, f)


def loss_value(kind, labels, predictions) -> float:
    """Sum of the per-row loss."""
    return float(np.sum(pointwise_loss(kind, labels, predictions)))


def _mp_loss(kind: LossKind, y, f):
    if kind is LossKind.SQUARED_ERROR:
        return (y - f) ** 2 / 2
    return y * mpmath.log1p(mpmath.exp(-f)) + (1 - y) * mpmath.log1p(mpmath.exp(f))


# central stencils with O(h^2) truncation error: (offsets, weights); divide by h**k
_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1, -2, 1)),
    3: ((-2, -1, 1, 2), (-0.5, 1, -1, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1, -4, 6, -4, 1)),
}


def fd_derivative(kind, label: float, prediction: float, k: int, h: float | None = None) -> float:
    """Central finite-difference estimate of the k-th derivative of the loss.

    Stencils have second-order truncation error. The loss is evaluated in
    40-digit arithmetic: with h = 1e-3 a fourth difference divides by 1e-12,
    which would amplify double-precision round-off to ~1e-3.
    """
    kind = LossKind(kind)
    if k not in _STENCILS:
        raise ValueError(f"unsupported derivative order {k}")
    h = FD_STEPS[k] if h is None else h
    if h <= 0:
        raise ValueError("step size must be positive")
    offsets, weights = _STENCILS[k]
    with mpmath.workdps(40):
        y = mpmath.mpf(label)
        f0 = mpmath.mpf(prediction)
        step = mpmath.mpf(h)
        total = mpmath.fsum(
            mpmath.mpf(w) * _mp_loss(kind, y, f0 + o * step) for o, w in zip(offsets, weights)
        )
        return float(total / step**k)
