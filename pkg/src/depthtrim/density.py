"""Gaussian product-kernel density estimation with Silverman bandwidths."""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_sample

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class KdeModel:
    """Data matrix and per-coordinate bandwidths of a Gaussian product KDE."""

    data: np.ndarray
    bandwidths: np.ndarray

    def __post_init__(self):
        data = check_sample(self.data, name="data")
        h = np.atleast_1d(np.asarray(self.bandwidths, dtype=float))
        if h.shape != (data.shape[1],):
            raise ValueError(f"need {data.shape[1]} bandwidths, got shape {h.shape}")
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise ValueError("bandwidths must be positive and finite")
        data.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "bandwidths", h)

    @property
    def dim(self):
        return self.data.shape[1]

    def mean(self):
        return self.data.mean(axis=0)


def silverman_bandwidth(X):
    """``sd_j * (4 / ((d + 2) n)) ** (1 / (d + 4))`` for each coordinate j.

    ``sd_j`` is the sample standard deviation with denominator ``n - 1``.
    """
    X = check_sample(X)
    n, d = X.shape
    if n < 2:
        raise ValueError("degenerate sample for bandwidth: need at least 2 points")
    sd = X.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        raise ValueError("degenerate sample for bandwidth: a coordinate has zero spread")
    return sd * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


def fit_kde(sample):
    """Gaussian product KDE of ``sample`` with Silverman's multivariate rule of thumb."""
    X = check_sample(sample)
    return KdeModel(X, silverman_bandwidth(X))


def kde_log_eval(model, x):
    Q = check_points(x, model.dim)
    X, h = model.data, model.bandwidths
    n, d = X.shape
    log_norm = -np.log(n) - np.sum(np.log(h)) - d * _LOG_SQRT_2PI
    out = np.empty(Q.shape[0])
    step = max(1, 2_000_000 // max(1, n * d))
    for start in range(0, Q.shape[0], step):
        z = (Q[start:start + step, None, :] - X[None, :, :]) / h
        out[start:start + step] = logsumexp(-0.5 * np.sum(z * z, axis=2), axis=1) + log_norm
    return out


def kde_eval(model, x):
    """Density ``(1/n) sum_i prod_j phi((x_j - X_ij) / h_j) / h_j``.

    Returns a float for a single point and an array for a matrix of points.
    """
    values = np.exp(kde_log_eval(model, x))
    x = np.asarray(x)
    single = x.ndim == 0 or (x.ndim == 1 and (model.dim > 1 or x.shape[0] == 1))
    return float(values[0]) if single else values


def kde_sample(model, count, seed=0, *, antithetic=False):
    """Draw ``count`` points from the KDE.

    Each draw is a uniformly chosen data row plus independent Gaussian noise
    scaled by the bandwidths.  With ``antithetic=True`` the same random
    numbers are used with the noise negated, which maps the draws of the
    reflected data ``c - X`` to ``c -`` (draws of ``X``).
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, model.data.shape[0], size=count)
    noise = rng.standard_normal((count, model.dim)) * model.bandwidths
    if antithetic:
        noise = -noise
    return model.data[idx] + noise


class GaussianKDE(BaseEstimator):
    """Estimator wrapper around ``KdeModel``.

    Parameters
    ----------
    bandwidth : "silverman", float or array of shape (d,)
    """

    def __init__(self, bandwidth="silverman"):
        self.bandwidth = bandwidth

    def fit(self, X, y=None):
        X = check_sample(X)
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "silverman":
                raise ValueError(f"unknown bandwidth rule {self.bandwidth!r}")
            h = silverman_bandwidth(X)
        else:
            h = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (X.shape[1],)).copy()
        self.model_ = KdeModel(X, h)
        self.bandwidth_ = self.model_.bandwidths
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X):
        """Log density at each row of ``X``."""
        check_is_fitted(self, "model_")
        return kde_log_eval(self.model_, X)

    def pdf(self, X):
        return np.exp(self.score_samples(X))

    def sample(self, n_samples=1, random_state=0, antithetic=False):
        check_is_fitted(self, "model_")
        return kde_sample(self.model_, n_samples, random_state, antithetic=antithetic)
