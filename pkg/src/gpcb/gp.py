"""Gaussian-process posteriors over a growing history of batch observations.

Two immutable state types are provided:

* :class:`GPState` keeps a lower Cholesky factor of ``K + noise * I`` and
  extends it blockwise when a round's observations arrive.
* :class:`SparseGPState` evaluates the inducing-point (DTC / variational
  predictive) posterior through ``s`` contexts sampled uniformly from the
  history.

Both expose ``predict(X) -> (mean, variance)``. :class:`GPRegressor` and
:class:`SparseGPRegressor` wrap them behind the scikit-learn estimator API.
"""

from dataclasses import dataclass, replace
import logging

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_contexts, as_vector
from .exceptions import ConfigError, InputError, NumericalError
from .kernels import KernelSpec

logger = logging.getLogger(__name__)

JITTER_SCALE = 1e-8
JITTER_RETRIES = 3


def cholesky_jitter(A):
    """Lower Cholesky factor of ``A``, adding diagonal jitter on failure.

    The jitter is ``1e-8 * trace(A) / n``, grown tenfold per retry; after
    three failed retries :class:`NumericalError` is raised.
    """
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    base = JITTER_SCALE * max(np.trace(A) / n, 1e-300)
    eye = np.eye(n)
    for attempt in range(JITTER_RETRIES):
        jitter = base * 10.0**attempt
        try:
            L = np.linalg.cholesky(A + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        logger.debug("cholesky needed jitter %.3g", jitter)
        return L
    raise NumericalError(f"cholesky failed for {n}x{n} matrix after {JITTER_RETRIES} jitter retries")


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _check_noise(noise_variance):
    if not (np.isfinite(noise_variance) and noise_variance > 0):
        raise ConfigError("noise variance must be positive", "gp.noise_variance")
    return float(noise_variance)


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    variance: float

    @property
    def std(self):
        return float(np.sqrt(self.variance))


@dataclass(frozen=True, eq=False)
class GPState:
    """Exact zero-mean GP posterior given ``N`` noisy observations."""

    kernel: KernelSpec
    noise_variance: float
    X: np.ndarray
    y: np.ndarray
    L: np.ndarray
    alpha: np.ndarray
    dim: int | None = None

    @classmethod
    def empty(cls, kernel, noise_variance, dim=None):
        z = _readonly(np.zeros(0))
        return cls(
            kernel=kernel,
            noise_variance=_check_noise(noise_variance),
            X=_readonly(np.zeros((0, dim or 0))),
            y=z,
            L=_readonly(np.zeros((0, 0))),
            alpha=z,
            dim=dim,
        )

    @classmethod
    def from_data(cls, kernel, noise_variance, X, y):
        """Factorize the full history in one shot (the rebuild reference)."""
        X = as_contexts(X)
        y = as_vector(y, X.shape[0])
        noise_variance = _check_noise(noise_variance)
        if X.shape[0] == 0:
            return cls.empty(kernel, noise_variance, X.shape[1] or None)
        A = kernel(X) + noise_variance * np.eye(X.shape[0])
        L = cholesky_jitter(A)
        alpha = _cho_solve(L, y)
        return cls(kernel, noise_variance, _readonly(X), _readonly(y),
                   _readonly(L), _readonly(alpha), X.shape[1])

    @property
    def n(self):
        return self.y.shape[0]

    def _query(self, X):
        X = as_contexts(X, dim=self.dim)
        return X

    def predict(self, X):
        """Posterior mean and variance at each row of ``X``."""
        X = self._query(X)
        kdiag = self.kernel.diag(X)
        if self.n == 0:
            return np.zeros(X.shape[0]), kdiag
        Ks = self.kernel(self.X, X)
        mean = Ks.T @ self.alpha
        V = solve_triangular(self.L, Ks, lower=True, check_finite=False)
        var = kdiag - np.einsum("ij,ij->j", V, V)
        return mean, np.clip(var, 0.0, kdiag)

    def posterior(self, x):
        mean, var = self.predict(x)
        if mean.shape[0] != 1:
            raise InputError("posterior() takes a single context; use predict() for batches")
        return PosteriorSummary(float(mean[0]), float(var[0]))

    def batch_update(self, contexts, outcomes):
        """Append one round of observations, extending the factor blockwise.

        With ``A = K_old + noise*I = L L^T`` the new factor is
        ``[[L, 0], [L21, L22]]`` where ``L21 = (L^{-1} B)^T`` and ``L22`` is
        the Cholesky factor of the Schur complement ``C - L21 L21^T``.
        """
        Xn = as_contexts(contexts, dim=self.dim, allow_empty=False)
        yn = as_vector(outcomes, Xn.shape[0])
        C = self.kernel(Xn) + self.noise_variance * np.eye(Xn.shape[0])
        if self.n == 0:
            L = cholesky_jitter(C)
            X, y = Xn, yn
        else:
            B = self.kernel(self.X, Xn)
            L21 = solve_triangular(self.L, B, lower=True, check_finite=False).T
            S = C - L21 @ L21.T
            L22 = cholesky_jitter(0.5 * (S + S.T))
            n, b = self.n, Xn.shape[0]
            L = np.zeros((n + b, n + b))
            L[:n, :n] = self.L
            L[n:, :n] = L21
            L[n:, n:] = L22
            X = np.vstack([self.X, Xn])
            y = np.concatenate([self.y, yn])
        alpha = _cho_solve(L, y)
        return replace(self, X=_readonly(X), y=_readonly(y), L=_readonly(L),
                       alpha=_readonly(alpha), dim=Xn.shape[1])


def _cho_solve(L, b):
    z = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, z, lower=False, check_finite=False)


def posterior(state, x):
    return state.posterior(x)


def batch_update(state, contexts, outcomes):
    return state.batch_update(contexts, outcomes)


@dataclass(frozen=True, eq=False)
class SparseGPState:
    """Inducing-point posterior over the full history.

    ``inducing`` holds history indices. The factors ``Luu``, ``LB`` and ``c``
    are prepared once per (history, inducing set) in O(s^2 N); each query is
    then O(s^2).
    """

    kernel: KernelSpec
    noise_variance: float
    X: np.ndarray
    y: np.ndarray
    inducing: np.ndarray
    seed: int = 0
    draws: int = 0
    dim: int | None = None
    Z: np.ndarray | None = None
    Luu: np.ndarray | None = None
    LB: np.ndarray | None = None
    c: np.ndarray | None = None

    @classmethod
    def empty(cls, kernel, noise_variance, dim=None, seed=0):
        return cls(
            kernel=kernel,
            noise_variance=_check_noise(noise_variance),
            X=_readonly(np.zeros((0, dim or 0))),
            y=_readonly(np.zeros(0)),
            inducing=_readonly(np.zeros(0, dtype=np.int64)),
            seed=int(seed),
            dim=dim,
        )

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def num_inducing(self):
        return self.inducing.shape[0]

    def _prepare(self):
        if self.n == 0 or self.num_inducing == 0:
            return replace(self, Z=None, Luu=None, LB=None, c=None)
        # duplicated contexts add nothing to the inducing span but make Kuu singular
        Z = np.unique(self.X[self.inducing], axis=0)
        sigma = np.sqrt(self.noise_variance)
        Luu = cholesky_jitter(self.kernel(Z))
        Kuf = self.kernel(Z, self.X)
        A = solve_triangular(Luu, Kuf, lower=True, check_finite=False) / sigma
        LB = cholesky_jitter(np.eye(Z.shape[0]) + A @ A.T)
        c = solve_triangular(LB, A @ self.y, lower=True, check_finite=False) / sigma
        return replace(self, Z=_readonly(Z), Luu=_readonly(Luu), LB=_readonly(LB), c=_readonly(c))

    def predict(self, X):
        X = as_contexts(X, dim=self.dim)
        kdiag = self.kernel.diag(X)
        if self.Z is None:
            return np.zeros(X.shape[0]), kdiag
        Kus = self.kernel(self.Z, X)
        t1 = solve_triangular(self.Luu, Kus, lower=True, check_finite=False)
        t2 = solve_triangular(self.LB, t1, lower=True, check_finite=False)
        mean = t2.T @ self.c
        var = kdiag - np.einsum("ij,ij->j", t1, t1) + np.einsum("ij,ij->j", t2, t2)
        return mean, np.clip(var, 0.0, kdiag)

    def posterior(self, x):
        mean, var = self.predict(x)
        if mean.shape[0] != 1:
            raise InputError("posterior() takes a single context; use predict() for batches")
        return PosteriorSummary(float(mean[0]), float(var[0]))

    def batch_update(self, contexts, outcomes):
        """Append observations; the inducing set is kept as is."""
        Xn = as_contexts(contexts, dim=self.dim, allow_empty=False)
        yn = as_vector(outcomes, Xn.shape[0])
        X = np.vstack([self.X, Xn]) if self.n else Xn
        y = np.concatenate([self.y, yn])
        return replace(self, X=_readonly(X), y=_readonly(y), dim=Xn.shape[1])._prepare()

    def resample_inducing(self, s):
        """Draw ``s`` history indices uniformly without replacement.

        The draw depends only on ``(seed, draws)``, so calling this twice on
        the same state gives the same set; the returned state has ``draws``
        advanced. ``s`` is clamped into ``[1, N]``.
        """
        if self.n == 0:
            return self
        s = min(max(int(s), 1), self.n)
        if s == self.n:
            idx = np.arange(self.n)
        else:
            rng = np.random.default_rng([self.seed, self.draws])
            idx = np.sort(rng.choice(self.n, size=s, replace=False))
        return replace(self, inducing=_readonly(idx.astype(np.int64)),
                       draws=self.draws + 1)._prepare()

    def grow_inducing(self, s):
        """Top the inducing set up to ``s`` with uniformly drawn new indices."""
        if self.n == 0:
            return self
        s = min(max(int(s), 1), self.n)
        have = self.inducing
        if have.shape[0] >= s:
            return self._prepare() if self.Z is None else self
        pool = np.setdiff1d(np.arange(self.n), have)
        rng = np.random.default_rng([self.seed, self.draws])
        extra = rng.choice(pool, size=s - have.shape[0], replace=False)
        idx = np.sort(np.concatenate([have, extra]))
        return replace(self, inducing=_readonly(idx.astype(np.int64)),
                       draws=self.draws + 1)._prepare()


def sparse_posterior(state, x):
    return state.posterior(x)


def resample_inducing(state, s):
    return state.resample_inducing(s)


class GPRegressor(RegressorMixin, BaseEstimator):
    """Exact zero-mean GP regressor with incremental ``partial_fit``.

    Parameters
    ----------
    kernel : {"se", "matern", "linear"}
    lengthscale, nu, kernel_variance : float
        Hyperparameters forwarded to :class:`KernelSpec`.
    noise_variance : float
        Observation noise variance.
    """

    def __init__(self, kernel="se", lengthscale=1.0, nu=2.5, kernel_variance=1.0,
                 noise_variance=0.01):
        self.kernel = kernel
        self.lengthscale = lengthscale
        self.nu = nu
        self.kernel_variance = kernel_variance
        self.noise_variance = noise_variance

    def _kernel_spec(self):
        return KernelSpec(self.kernel, self.lengthscale, self.nu, self.kernel_variance)

    def _empty_state(self, dim):
        return GPState.empty(self._kernel_spec(), self.noise_variance, dim)

    def fit(self, X, y):
        X = as_contexts(X, allow_empty=False)
        self.state_ = self._empty_state(X.shape[1]).batch_update(X, y)
        self.n_features_in_ = X.shape[1]
        return self

    def partial_fit(self, X, y):
        X = as_contexts(X, allow_empty=False)
        if not hasattr(self, "state_"):
            self.state_ = self._empty_state(X.shape[1])
            self.n_features_in_ = X.shape[1]
        self.state_ = self.state_.batch_update(X, y)
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "state_")
        mean, var = self.state_.predict(X)
        if return_std:
            return mean, np.sqrt(var)
        return mean


class SparseGPRegressor(GPRegressor):
    """Inducing-point GP regressor; inducing points are re-drawn on each fit step."""

    def __init__(self, kernel="se", lengthscale=1.0, nu=2.5, kernel_variance=1.0,
                 noise_variance=0.01, num_inducing=50, random_state=0):
        super().__init__(kernel, lengthscale, nu, kernel_variance, noise_variance)
        self.num_inducing = num_inducing
        self.random_state = random_state

    def _empty_state(self, dim):
        return SparseGPState.empty(self._kernel_spec(), self.noise_variance, dim,
                                   seed=self.random_state or 0)

    def fit(self, X, y):
        super().fit(X, y)
        self.state_ = self.state_.resample_inducing(self.num_inducing)
        return self

    def partial_fit(self, X, y):
        super().partial_fit(X, y)
        self.state_ = self.state_.resample_inducing(self.num_inducing)
        return self
