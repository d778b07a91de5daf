"""Small input-validation helpers shared across estimators and functions."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def as_float_array(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-d float64 array, rejecting NaN and infinities."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def as_float_matrix(X, name: str = "X"):
    """Coerce to a 2-d float64 array (sparse input is passed through as CSR)."""
    if sp.issparse(X):
        Xc = X.tocsr().astype(np.float64)
        if not np.all(np.isfinite(Xc.data)):
            raise ValueError(f"{name} contains NaN or infinite entries")
        return Xc
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def check_non_negative(X, name: str = "X") -> None:
    data = X.data if sp.issparse(X) else np.asarray(X)
    if data.size and data.min() < 0:
        raise ValueError(f"{name} must be non-negative")


def check_binary_labels(y, name: str = "y") -> np.ndarray:
    """Validate a 0/1 label vector containing both classes."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    uniq = set(np.unique(arr).tolist())
    if not uniq <= {0, 1, False, True}:
        raise ValueError(f"{name} must contain only 0/1 values")
    arr = arr.astype(np.float64)
    if arr.min() == arr.max():
        raise ValueError(f"{name} must contain both classes")
    return arr


def check_consistent_length(*arrays) -> int:
    lengths = {a.shape[0] for a in arrays}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent first dimensions: {sorted(lengths)}")
    return lengths.pop()
