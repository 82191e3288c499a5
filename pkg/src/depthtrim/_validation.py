"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_sample(X, *, min_samples=1, name="sample"):
    """Return ``X`` as a finite float64 matrix of shape (n, d).

    A 1-d input is read as n observations of a scalar variable.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={X.ndim}")
    if X.shape[0] == 0:
        if min_samples > 0:
            raise ValueError("empty sample")
        return X.reshape(0, X.shape[1])
    X = check_array(X, dtype=np.float64, ensure_min_samples=1, input_name=name)
    if X.shape[0] < min_samples:
        raise ValueError(f"insufficient points: {name} has {X.shape[0]} rows, need {min_samples}")
    return X


def check_points(x, dim, *, name="x"):
    """Return query points as a (k, dim) float64 matrix.

    A single point may be passed as a flat vector.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        # a flat vector is one point, unless the sample is univariate
        x = x.reshape(-1, 1) if dim == 1 else x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(
            f"dimension mismatch: {name} has shape {x.shape}, expected points of dimension {dim}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_level(a, *, name="a"):
    if not isinstance(a, numbers.Real) or not np.isfinite(a):
        raise ValueError(f"{name} must be a finite real number, got {a!r}")
    return float(a)


def check_positive_int(value, name):
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_box(box, dim=None):
    """Normalise a box given as ``(lower, upper)`` into two float vectors."""
    lower, upper = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("box must be a pair (lower, upper) of equal-length vectors")
    if dim is not None and lower.shape[0] != dim:
        raise ValueError(f"box has dimension {lower.shape[0]}, expected {dim}")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("box must be finite")
    if np.any(upper <= lower):
        raise ValueError("box upper corner must exceed the lower corner")
    return lower, upper
