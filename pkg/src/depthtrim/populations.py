"""Closed-form populations used by the simulation study."""

import numpy as np

BETA22_MEAN = 0.5
BETA22_VAR = 1.0 / 20.0


def beta22_sample(n, seed=0, *, reflect=False):
    """``n`` draws of (X1, X2) with independent Beta(2, 2) coordinates.

    Each coordinate is the median of three independent uniforms, whose law is
    exactly Beta(2, 2).  ``reflect=True`` uses ``1 - U`` for every uniform,
    which yields ``1 - X`` for the same seed.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    u = rng.random((n, 2, 3))
    if reflect:
        u = 1.0 - u
    return np.median(u, axis=2)


def beta22_pdf(points):
    """Density ``36 x(1-x) y(1-y)`` on the unit square, zero elsewhere."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    inside = np.all((p >= 0.0) & (p <= 1.0), axis=1)
    val = 36.0 * p[:, 0] * (1 - p[:, 0]) * p[:, 1] * (1 - p[:, 1])
    return np.where(inside, val, 0.0)


def beta22_cdf(t):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return 3 * t**2 - 2 * t**3


POPULATIONS = {
    "beta22_product": {
        "sample": beta22_sample,
        "pdf": beta22_pdf,
        "box": (np.zeros(2), np.ones(2)),
        "dim": 2,
    },
}
