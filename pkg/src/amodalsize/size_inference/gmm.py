"""One-dimensional Gaussian mixtures fitted by EM."""

import warnings

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .._validation import as_float_array, check_fitted
from ..errors import InputError

VAR_FLOOR = 1e-4


class GaussianMixture1D(BaseEstimator):
    """EM for a K-component Gaussian mixture on scalar data.

    Means start at evenly spaced quantiles, so fits are deterministic.
    Components are reported sorted by mean; component index doubles as the
    cluster id.

    Parameters
    ----------
    n_components : int
    var_floor : float
        Lower bound on every component variance.
    tol : float
        Stop when the mean log-likelihood improves by less than this.
    max_iter : int
    """

    def __init__(self, n_components=1, var_floor=VAR_FLOOR, tol=1e-8, max_iter=500):
        self.n_components = n_components
        self.var_floor = var_floor
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        x = as_float_array(np.ravel(X), "samples")
        if self.n_components < 1:
            raise InputError("n_components must be >= 1")
        k = self.n_components
        n_distinct = np.unique(x).size
        if n_distinct < k:
            warnings.warn(f"only {n_distinct} distinct samples; reducing K from {k} "
                          f"to {n_distinct}", UserWarning, stacklevel=2)
            k = n_distinct

        if k == 1:
            means = np.array([x.mean()])
            variances = np.array([max(x.var(), self.var_floor)])
            weights = np.ones(1)
            self.n_iter_ = 0
            self.converged_ = True
        else:
            means, variances, weights = self._em(x, k)

        order = np.argsort(means, kind="stable")
        self.means_ = means[order]
        self.variances_ = variances[order]
        self.weights_ = weights[order] / weights.sum()
        self.n_components_ = k
        return self

    def _em(self, x, k):
        means = np.quantile(x, (np.arange(k) + 0.5) / k)
        variances = np.full(k, max(x.var() / k, self.var_floor))
        weights = np.full(k, 1.0 / k)
        prev = -np.inf
        self.converged_ = False
        for it in range(1, self.max_iter + 1):
            log_resp = self._log_joint(x, means, variances, weights)
            ll = logsumexp(log_resp, axis=1)
            resp = np.exp(log_resp - ll[:, None])
            nk = resp.sum(axis=0)
            dead = nk < 1e-12
            nk = np.where(dead, 1e-12, nk)
            means = np.where(dead, means, resp.T @ x / nk)
            variances = np.maximum((resp * (x[:, None] - means) ** 2).sum(axis=0) / nk,
                                   self.var_floor)
            weights = nk / nk.sum()
            mean_ll = ll.mean()
            self.n_iter_ = it
            if abs(mean_ll - prev) < self.tol:
                self.converged_ = True
                break
            prev = mean_ll
        return means, variances, weights

    @staticmethod
    def _log_joint(x, means, variances, weights):
        x = x[:, None]
        return (np.log(weights) - 0.5 * np.log(2 * np.pi * variances)
                - 0.5 * (x - means) ** 2 / variances)

    def predict_log_joint(self, X):
        check_fitted(self, "means_")
        x = as_float_array(np.ravel(X), "samples", allow_empty=True)
        return self._log_joint(x, self.means_, self.variances_, self.weights_)

    def predict(self, X):
        """Maximum-posterior component; ties go to the lower index."""
        return np.argmax(self.predict_log_joint(X), axis=1)

    def score_samples(self, X):
        return logsumexp(self.predict_log_joint(X), axis=1)

    @property
    def components_(self):
        check_fitted(self, "means_")
        return [(float(m), float(v), float(w))
                for m, v, w in zip(self.means_, self.variances_, self.weights_)]


def gmm_fit_1d(samples, K=1, var_floor=VAR_FLOOR, tol=1e-8, max_iter=500):
    """Fit a 1-D mixture and return ``[(mean, variance, weight), ...]``."""
    gm = GaussianMixture1D(K, var_floor=var_floor, tol=tol, max_iter=max_iter)
    return gm.fit(samples).components_


def assign_clusters(log_heights, components):
    """Index of the maximum-posterior component for each log height.

    ``components`` is a list of ``(mean, variance, weight)``; ties are
    broken toward the lower index.
    """
    x = np.asarray(log_heights, dtype=float)
    means, variances, weights = (np.array(c, dtype=float) for c in zip(*components))
    scores = GaussianMixture1D._log_joint(x, means, variances, weights)
    return np.argmax(scores, axis=1)
