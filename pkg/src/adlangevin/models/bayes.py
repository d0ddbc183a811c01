"""Minibatch Bayesian models: the mean of a normal with known variance and
logistic regression with a standard normal prior.

Minibatches are drawn with replacement by default, which makes the
noisy-force variance exactly ``N (N-1) Var X / (n~ sigma^4)``. Pass
``replace=False`` for sampling without replacement. A minibatch of the full
size ``n~ = N`` always means the whole data set (the clean force).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..core import ConfigurationError, ForceModel, ForceSample, RngStream


def _check_minibatch(minibatch: int, n: int) -> int:
    minibatch = int(minibatch)
    if not 1 <= minibatch <= n:
        raise ConfigurationError(f"minibatch must be in [1, {n}], got {minibatch}")
    return minibatch


class GaussianMeanModel(ForceModel):
    """Posterior of the mean ``theta`` of ``N(theta, sigma_hat^2)`` under a flat prior.

    ``q`` has a single coordinate. The force is
    ``(N / sigma_hat^2) (mean(x[batch]) - theta)``.
    """

    n_dof = 1

    def __init__(self, data, sigma_hat: float = 1.0, minibatch: int = 10, replace: bool = True):
        self.data = np.asarray(data, dtype=float).ravel()
        if self.data.size < 1:
            raise ConfigurationError("data must be non-empty")
        if not sigma_hat > 0:
            raise ConfigurationError(f"sigma_hat must be > 0, got {sigma_hat}")
        self.sigma_hat = float(sigma_hat)
        self.minibatch = _check_minibatch(minibatch, self.data.size)
        self.replace = bool(replace)
        self.is_stochastic = self.minibatch < self.n_data

    @property
    def n_data(self) -> int:
        return self.data.size

    @property
    def precision(self) -> float:
        return self.n_data / self.sigma_hat**2

    def exact_posterior(self) -> tuple[float, float]:
        """``(mean, variance)`` of the exact posterior ``N(x_bar, sigma_hat^2 / N)``."""
        return float(self.data.mean()), self.sigma_hat**2 / self.n_data

    def force_variance(self) -> float:
        """Exact variance of the noisy force under the chosen sampling rule."""
        if not self.is_stochastic:
            return 0.0
        n, m = self.n_data, self.minibatch
        var_x = self.data.var(ddof=1) if n > 1 else 0.0
        factor = (n - 1) if self.replace else (n - m)
        return n * factor / m * var_x / self.sigma_hat**4

    def force_noise_sigma(self) -> float:
        return float(np.sqrt(self.force_variance()))

    def batch_means(self, batch_shape, rng: RngStream) -> np.ndarray:
        if not self.is_stochastic:
            return np.full(batch_shape, self.data.mean())
        idx = rng.indices(self.n_data, self.minibatch, batch_shape, replace=self.replace)
        return self.data[idx].mean(axis=-1)

    def force(self, q, rng=None, *, want_cov=False):
        q = np.asarray(q, dtype=float)
        xbar = self.batch_means(q.shape[:-1], rng)
        f = self.precision * (xbar[..., None] - q)
        cov = np.full(q.shape, self.force_variance()) if want_cov else None
        return ForceSample(f, self.is_stochastic, cov)

    def gradient(self, q):
        return self.precision * (np.asarray(q, dtype=float) - self.data.mean())

    def laplacian(self, q):
        return np.full(np.shape(q)[:-1], self.precision)

    def potential(self, q):
        q = np.asarray(q, dtype=float)
        return 0.5 * np.sum((self.data - q) ** 2, axis=-1) / self.sigma_hat**2


class LogisticModel(ForceModel):
    """Bayesian logistic regression, ``pi(beta) ~ exp(-|beta|^2/2) prod_i f(y_i beta.x_i)``.

    The noisy force is ``-beta + (N/n~) sum_batch y_i x_i (1 - f(y_i beta.x_i))``.
    With ``want_cov`` the diagonal of its covariance is estimated from the
    minibatch itself.
    """

    def __init__(self, X, y, minibatch: int = 100, replace: bool = True):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float).ravel()
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ConfigurationError(f"X must be (N, d) with N = len(y); got {self.X.shape} and {self.y.size}")
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ConfigurationError("labels must be -1 or +1")
        self.n_dof = self.X.shape[1]
        self.minibatch = _check_minibatch(minibatch, self.n_data)
        self.replace = bool(replace)
        self.is_stochastic = self.minibatch < self.n_data
        self._yx = self.y[:, None] * self.X

    @property
    def n_data(self) -> int:
        return self.y.size

    def _terms(self, beta, yx):
        # yx is (n, d) shared by all replicas or (..., n, d) per replica; beta is (..., d)
        sub = "nd,...d->...n" if yx.ndim == 2 else "...nd,...d->...n"
        margin = np.einsum(sub, yx, beta)
        return yx * expit(-margin)[..., None]

    def force(self, q, rng=None, *, want_cov=False):
        q = np.asarray(q, dtype=float)
        if self.is_stochastic:
            idx = rng.indices(self.n_data, self.minibatch, q.shape[:-1], replace=self.replace)
            terms = self._terms(q, self._yx[idx])
        else:
            terms = self._terms(q, self._yx)
        scale = self.n_data / self.minibatch
        f = -q + scale * terms.sum(axis=-2)
        cov = None
        if want_cov:
            if self.is_stochastic and self.minibatch > 1:
                cov = self.n_data**2 / self.minibatch * terms.var(axis=-2, ddof=1)
            else:
                cov = np.zeros_like(q)
        return ForceSample(f, self.is_stochastic, cov)

    def gradient(self, q):
        q = np.asarray(q, dtype=float)
        return q - self._terms(q, self._yx).sum(axis=-2)

    def potential(self, q):
        q = np.asarray(q, dtype=float)
        margin = np.einsum("nd,...d->...n", self._yx, q)
        return 0.5 * np.sum(q * q, axis=-1) + np.logaddexp(0.0, -margin).sum(axis=-1)

    def laplacian(self, q):
        q = np.asarray(q, dtype=float)
        s = expit(np.einsum("nd,...d->...n", self._yx, q))
        return self.n_dof + np.einsum("...n,n->...", s * (1 - s), np.sum(self.X**2, axis=1))
