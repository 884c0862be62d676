"""Input validation helpers built on sklearn's checkers."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import InputError


def as_contexts(X, dim=None, allow_empty=True, name="contexts"):
    """Return ``X`` as a float (n, D) array.

    A 1-d input is read as a single context. ``dim`` pins the expected D.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise InputError(f"{name} must be 2-d, got shape {X.shape}")
    if X.shape[0] == 0:
        if not allow_empty:
            raise InputError(f"{name} is empty")
        if dim is not None and X.shape[1] not in (0, dim):
            raise InputError(f"{name} has dimension {X.shape[1]}, expected {dim}")
        return np.empty((0, dim if dim is not None else X.shape[1]))
    try:
        X = check_array(X, dtype=np.float64, ensure_2d=True)
    except ValueError as exc:
        raise InputError(f"{name}: {exc}") from exc
    if dim is not None and X.shape[1] != dim:
        raise InputError(f"{name} has dimension {X.shape[1]}, expected {dim}")
    return X


def as_vector(y, length=None, name="outcomes"):
    y = np.asarray(y, dtype=float).reshape(-1)
    if length is not None and y.shape[0] != length:
        raise InputError(f"{name} has length {y.shape[0]}, expected {length}")
    if not np.all(np.isfinite(y)):
        raise InputError(f"{name} contains non-finite values")
    return y
