"""Covariance functions and Gram matrices.

All kernels are normalized so that ``k(x, x) <= variance``; with the default
``variance=1`` this is the usual ``k(x, x) <= 1`` assumption of GP bandits.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import as_contexts
from .exceptions import ConfigError, InputError


class KernelFamily(str, Enum):
    LINEAR = "linear"
    SQUARED_EXPONENTIAL = "se"
    MATERN = "matern"


_ALIASES = {
    "linear": KernelFamily.LINEAR,
    "se": KernelFamily.SQUARED_EXPONENTIAL,
    "rbf": KernelFamily.SQUARED_EXPONENTIAL,
    "squared_exponential": KernelFamily.SQUARED_EXPONENTIAL,
    "squaredexponential": KernelFamily.SQUARED_EXPONENTIAL,
    "matern": KernelFamily.MATERN,
}

SUPPORTED_NU = (1.5, 2.5)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    ``nu`` is only read by the Matérn family and must be 1.5 or 2.5.
    """

    family: KernelFamily = KernelFamily.SQUARED_EXPONENTIAL
    lengthscale: float = 1.0
    nu: float = 2.5
    variance: float = 1.0

    def __post_init__(self):
        family = self.family
        if not isinstance(family, KernelFamily):
            key = str(family).lower().replace("-", "_")
            if key not in _ALIASES:
                raise ConfigError(f"unknown kernel family {family!r}", "kernel.family")
            object.__setattr__(self, "family", _ALIASES[key])
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise ConfigError("lengthscale must be positive", "kernel.lengthscale")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise ConfigError("variance must be positive", "kernel.variance")
        if self.family is KernelFamily.MATERN and float(self.nu) not in SUPPORTED_NU:
            raise ConfigError(
                f"nu must be one of {SUPPORTED_NU}, got {self.nu}", "kernel.nu"
            )

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - {"family", "lengthscale", "nu", "variance"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", "kernel")
        return cls(**d)

    def to_dict(self):
        return {
            "family": self.family.value,
            "lengthscale": float(self.lengthscale),
            "nu": float(self.nu),
            "variance": float(self.variance),
        }

    def __call__(self, X, Y=None):
        """Cross-covariance matrix between the rows of ``X`` and ``Y``."""
        X = as_contexts(X)
        Y = X if Y is None else as_contexts(Y)
        if X.shape[1] != Y.shape[1]:
            raise InputError(
                f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}"
            )
        if X.shape[0] == 0 or Y.shape[0] == 0:
            return np.zeros((X.shape[0], Y.shape[0]))
        return self._cross(X, Y)

    def _cross(self, X, Y):
        if self.family is KernelFamily.LINEAR:
            return self.variance * (X @ Y.T) / X.shape[1]
        sq = cdist(X, Y, "sqeuclidean")
        if self.family is KernelFamily.SQUARED_EXPONENTIAL:
            return self.variance * np.exp(-0.5 * sq / self.lengthscale**2)
        r = np.sqrt(sq) / self.lengthscale
        if float(self.nu) == 1.5:
            a = np.sqrt(3.0) * r
            return self.variance * (1.0 + a) * np.exp(-a)
        a = np.sqrt(5.0) * r
        return self.variance * (1.0 + a + a * a / 3.0) * np.exp(-a)

    def diag(self, X):
        """``k(x, x)`` for every row of ``X`` without building the full matrix."""
        X = as_contexts(X)
        if self.family is KernelFamily.LINEAR:
            return self.variance * np.einsum("ij,ij->i", X, X) / max(X.shape[1], 1)
        return np.full(X.shape[0], float(self.variance))


def kernel_eval(spec, x, y):
    """k(x, y) for two single contexts."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise InputError(f"contexts must be 1-d of equal length, got {x.shape} and {y.shape}")
    return float(spec(x[None, :], y[None, :])[0, 0])


def gram_matrix(spec, xs):
    """N x N Gram matrix ``[k(x_i, x_j)]``; an empty list gives a 0 x 0 matrix."""
    if len(xs) == 0:
        return np.zeros((0, 0))
    X = as_contexts(np.asarray(xs, dtype=float))
    K = spec(X)
    # sqeuclidean is symmetric entrywise, but enforce it for the linear family too
    return 0.5 * (K + K.T)
