"""Diagonal-Gaussian moment machinery and the action-information estimator.

An agent's recent actions (a FIFO window, default 100) provide per-step
moment snapshots that drive an exponential running estimate of the
marginal action distribution.  At training time, the minibatch of
actions defines a second ("conditional") Gaussian, and the mutual
information between states and actions is approximated as the
difference of two plug-in entropies:

    I = H(marginal; D) - H(batch; D),
    H(g; D) = sum over a in D of  -N(a; g) * log N(a; g)

where N(a; g) is the product of per-dimension normal densities.  The
sums are deliberately NOT normalized by |D| (the penalty weight beta
absorbs scale), are in nats, and the difference may be negative; it is
passed through unclamped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# densities are undefined at zero variance, and deterministic policies
# early in training emit near-constant action windows
VARIANCE_FLOOR = 1e-6

_LOG_TWO_PI = float(np.log(2.0 * np.pi))


@dataclass
class DiagGaussian:
    """Axis-aligned Gaussian given by per-dimension mean and variance."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.var = np.asarray(self.var, dtype=np.float64)
        if self.mean.shape != self.var.shape or self.mean.ndim != 1:
            raise ValueError(
                f"mean shape {self.mean.shape} and var shape {self.var.shape} "
                "must be equal 1-D shapes"
            )
        if np.any(self.var < VARIANCE_FLOOR):
            raise ValueError("variance below floor; construct via floored moments")

    @property
    def dim(self):
        return self.mean.size


def _floor(var):
    return np.maximum(var, VARIANCE_FLOOR)


def batch_moments(batch):
    """Per-dimension mean and population (divide-by-n) variance, floored."""
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.size == 0:
        raise ValueError("batch_moments needs a nonempty batch")
    return DiagGaussian(arr.mean(axis=0), _floor(arr.var(axis=0)))


def mixture_moments(weights, means, variances):
    """Exact moments of a mixture of diagonal Gaussians.

    mu = sum p mu_s;  var = sum p var_s + sum p mu_s^2 - mu^2.
    This closed form is the oracle the running estimate approximates.
    """
    w = np.asarray(weights, dtype=np.float64)
    mus = np.asarray(means, dtype=np.float64)
    v = np.asarray(variances, dtype=np.float64)
    if not (len(w) == len(mus) == len(v)):
        raise ValueError("weights, means, variances must have equal length")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    mu = w @ mus
    var = w @ v + w @ (mus * mus) - mu * mu
    return DiagGaussian(mu, _floor(var))


class ActionWindow:
    """FIFO ring of the most recent actions (capacity default 100)."""

    def __init__(self, dim, capacity=100):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._buf = np.zeros((self.capacity, int(dim)), dtype=np.float64)
        self._count = 0
        self._head = 0  # next write slot

    def __len__(self):
        return self._count

    def push(self, action):
        self._buf[self._head] = action
        self._head = (self._head + 1) % self.capacity
        if self._count < self.capacity:
            self._count += 1

    def contents(self):
        """Stored actions, oldest first."""
        if self._count < self.capacity:
            return self._buf[: self._count].copy()
        return np.concatenate([self._buf[self._head:], self._buf[: self._head]])

    def filled(self):
        """Full view in storage order; moments do not care about order."""
        return self._buf[: self._count]


def window_snapshot_moments(window):
    """Moments of the window contents; needs at least 2 entries."""
    if len(window) < 2:
        raise ValueError("window snapshot needs at least 2 actions")
    return batch_moments(window.filled())


@dataclass
class MarginalEstimate:
    """Running estimate of the marginal action distribution.

    The first update seeds the estimate with the supplied moments; every
    later update applies the moment-matched exponential blend with rate
    alpha (see running_update).
    """

    alpha: float
    gaussian: DiagGaussian | None = field(default=None)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")

    @property
    def initialized(self):
        return self.gaussian is not None


def running_update(est, mu_n, sigma2_n):
    """Blend step-n moments into the running marginal estimate.

    mu_hat_n   = a mu_n + (1-a) mu_hat_{n-1}
    sig2_hat_n = a sig2_n + (1-a) sig2_hat_{n-1}
                 + (a mu_n^2 + (1-a) mu_hat_{n-1}^2)
                 - (a mu_n + (1-a) mu_hat_{n-1})^2

    applied per dimension, variance floored afterwards.  Mutates and
    returns est.
    """
    mu_n = np.asarray(mu_n, dtype=np.float64)
    sigma2_n = np.asarray(sigma2_n, dtype=np.float64)
    if mu_n.shape != sigma2_n.shape:
        raise ValueError("mu_n and sigma2_n must have matching shapes")
    if not est.initialized:
        est.gaussian = DiagGaussian(mu_n.copy(), _floor(sigma2_n))
        return est
    prev = est.gaussian
    if mu_n.shape != prev.mean.shape:
        raise ValueError(
            f"update dim {mu_n.shape} does not match estimate dim {prev.mean.shape}"
        )
    a = est.alpha
    mu_new = a * mu_n + (1.0 - a) * prev.mean
    var_new = (
        a * sigma2_n
        + (1.0 - a) * prev.var
        + (a * mu_n * mu_n + (1.0 - a) * prev.mean * prev.mean)
        - mu_new * mu_new
    )
    est.gaussian = DiagGaussian(mu_new, _floor(var_new))
    return est


def log_density(g, batch):
    """Per-point log of the product of per-dimension normal densities."""
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != g.dim:
        raise ValueError(f"batch dim {arr.shape[1]} does not match gaussian dim {g.dim}")
    diff = arr - g.mean
    diff *= diff
    diff /= g.var
    quad = diff.sum(axis=1)
    quad += g.dim * _LOG_TWO_PI + np.log(g.var).sum()
    quad *= -0.5
    return quad


def plugin_entropy(g, batch):
    """Unnormalized plug-in entropy:  sum over the batch of -p log p.

    p is the density of g at each batch point.  Underflowed densities
    (p == 0) contribute the limit value 0.  Result is in nats and is a
    raw sum, not an average.
    """
    arr = np.asarray(batch, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("plugin_entropy needs a nonempty batch")
    logp = log_density(g, arr)
    p = np.exp(logp)
    terms = p * logp
    return -float(terms[p > 0.0].sum())


def policy_mutual_information(marginal, batch):
    """Difference of marginal and batch plug-in entropies, in nats.

    May be negative; the value is passed through unclamped.
    """
    if not marginal.initialized:
        raise ValueError("marginal estimate not initialized yet")
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.size == 0:
        raise ValueError("policy_mutual_information needs a nonempty batch")
    return plugin_entropy(marginal.gaussian, arr) - plugin_entropy(batch_moments(arr), arr)
