"""Hadamard derivative of the trimmed-mean functional and finite-difference checks.

The functional is ``T(y, g) = int t 1{y(t) > a} g(t) dt`` with a depth-like
function ``y`` and a density-like function ``g``.  At ``(D, f)`` its
derivative in the direction ``(y~, g)`` is a surface term over the level set
``{D = a}`` plus the volume term ``int t 1{D >= a} g``.  Planar only: the
surface term uses the radial chart of ``level_geometry``.

All callables take an ``(k, 2)`` array of points and return ``k`` values.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_box
from .depth import as_depth_function
from .level_geometry import radial_radii
from .trimmed_mean import TRUNCATION_WARNING, _touches_boundary, cell_centers


def _zero(points):
    return np.zeros(np.asarray(points).shape[0])


def _vectorized(fn):
    if fn is None:
        return _zero
    return lambda pts: np.broadcast_to(np.asarray(fn(pts), dtype=float), (pts.shape[0],))


@dataclass
class PerturbationPair:
    """Direction ``(y, g)`` of a perturbation of ``(D, f)``.

    ``y`` must be continuous and bounded (``|y| <= y_bound``); ``g`` must be
    continuous, bounded and integrable.  ``None`` stands for the zero function.
    """

    y: object = None
    g: object = None
    y_bound: float | None = None

    def scaled(self, alpha):
        y, g = _vectorized(self.y), _vectorized(self.g)
        bound = None if self.y_bound is None else abs(alpha) * self.y_bound
        return PerturbationPair(lambda p: alpha * y(p), lambda p: alpha * g(p), bound)

    def __add__(self, other):
        y1, g1 = _vectorized(self.y), _vectorized(self.g)
        y2, g2 = _vectorized(other.y), _vectorized(other.g)
        bound = None
        if self.y_bound is not None and other.y_bound is not None:
            bound = self.y_bound + other.y_bound
        return PerturbationPair(lambda p: y1(p) + y2(p), lambda p: g1(p) + g2(p), bound)


def default_band(a, upper=1.0):
    """``(a1, a2) = (0.8 a, a + 0.2 (T - a))``."""
    return (a - 0.2 * a, a + 0.2 * (upper - a))


class _Quadrature:
    """Midpoint rule on a ``resolution**2`` grid over a box, with cached evaluations."""

    def __init__(self, box, resolution):
        lower, upper = check_box(box, 2)
        if resolution < 16:
            raise ValueError("resolution must be at least 16 cells per axis")
        axes = cell_centers(lower, upper, resolution)
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.stack([m.ravel() for m in mesh], axis=1)
        self.shape = (resolution, resolution)
        self.cell = float(np.prod((upper - lower) / resolution))
        self._cache = {}

    def values(self, fn):
        key = id(fn)
        if key not in self._cache:
            self._cache[key] = (fn, np.asarray(_vectorized(fn)(self.points), dtype=float))
        return self._cache[key][1]

    def moment(self, weights):
        """``sum_t t w(t) * cell``."""
        return self.points.T @ weights * self.cell

    def check_region(self, mask, warn=True):
        if warn and _touches_boundary(mask.reshape(self.shape)):
            warnings.warn(TRUNCATION_WARNING, UserWarning, stacklevel=3)


def _depth_callable(depth_fn):
    # plain callables pass through unchanged so that quadrature caches keyed by identity hit
    if hasattr(depth_fn, "score_samples"):
        return as_depth_function(depth_fn)
    if not callable(depth_fn):
        raise TypeError("depth_fn must be a fitted depth estimator or a callable")
    return depth_fn


def _check_band(a, band, eps, y_bound, upper=1.0):
    a1, a2 = default_band(a, upper) if band is None else band
    if not a1 < a < a2:
        raise ValueError(f"band must satisfy a1 < a < a2, got ({a1}, {a2}) for a = {a}")
    if eps * y_bound >= min(a - a1, a2 - a):
        raise ValueError(
            f"band exceeded: eps * |y|_inf = {eps * y_bound:g} must stay below {min(a - a1, a2 - a):g}"
        )
    return a1, a2


def functional_T(depth_fn, g, a, band=None, box=None, resolution=400, *, warn=True, _quad=None):
    """``int t 1{depth(t) > a} g(t) dt`` by midpoint quadrature over ``box``.

    The band ``(a1, a2)`` only has to bracket ``a``; the indicator vanishes
    outside the box region that is integrated.
    """
    a1, a2 = default_band(a) if band is None else band
    if not a1 < a < a2:
        raise ValueError(f"band must satisfy a1 < a < a2, got ({a1}, {a2}) for a = {a}")
    quad = _quad or _Quadrature(box, resolution)
    mask = quad.values(_depth_callable(depth_fn)) > a
    quad.check_region(mask, warn)
    return quad.moment(mask * quad.values(g))


def delta_epsilon(depth_fn, f, Y, a, eps, box, resolution=400, *, band=None, y_bound=None,
                  _quad=None):
    """``int t (1{D + eps Y >= a} - 1{D >= a}) / eps f(t) dt``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    quad = _quad or _Quadrature(box, resolution)
    D = quad.values(_depth_callable(depth_fn))
    y = quad.values(Y)
    r = float(np.max(np.abs(y))) if y_bound is None else y_bound
    _check_band(a, band, eps, r)
    diff = (D + eps * y >= a).astype(float) - (D >= a)
    return quad.moment(diff * quad.values(f)) / eps


def tau_and_jacobian(depth_fn, mu, a, thetas, h=None, r_max=10.0, tol=1e-12):
    """Points ``tau(a, theta_k)`` and ``|det d tau|`` there, by central differences.

    ``h`` (default ``1e-4 * a``) is the step in both the level and the angle.
    """
    fn = _depth_callable(depth_fn)
    mu = np.asarray(mu, dtype=float)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    h = 1e-4 * a if h is None else h

    def tau(level, angles):
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        radii, failed = radial_radii(fn, mu, dirs, level, r_max, tol)
        if failed.any():
            raise ValueError(f"level not reached: level {level} along {int(failed.sum())} rays")
        return mu + radii[:, None] * dirs

    d_level = (tau(a + h, thetas) - tau(a - h, thetas)) / (2 * h)
    d_angle = (tau(a, thetas + h) - tau(a, thetas - h)) / (2 * h)
    det = d_level[:, 0] * d_angle[:, 1] - d_level[:, 1] * d_angle[:, 0]
    return tau(a, thetas), np.abs(det)


def delta_limit(depth_fn, f, Y, mu, a, K_dirs=256, *, h=None, r_max=10.0, tol=1e-12):
    """Surface term ``int_{S^1} tau f(tau) |det d tau| Y(tau) dtheta`` (periodic trapezoid rule)."""
    thetas = 2 * np.pi * np.arange(K_dirs) / K_dirs
    pts, jac = tau_and_jacobian(depth_fn, mu, a, thetas, h, r_max, tol)
    w = _vectorized(f)(pts) * jac * _vectorized(Y)(pts)
    return pts.T @ w * (2 * np.pi / K_dirs)


def nabla_epsilon(depth_fn, g, Y, a, eps, box, resolution=400, *, _quad=None):
    """``int t 1{D + eps Y >= a} g(t) dt``; ``eps = 0`` gives the volume term."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    quad = _quad or _Quadrature(box, resolution)
    D = quad.values(_depth_callable(depth_fn))
    mask = D + eps * quad.values(Y) >= a if eps > 0 else D >= a
    return quad.moment(mask * quad.values(g))


def hadamard_derivative(depth_fn, f, mu, a, pair, K_dirs=256, box=None, resolution=400, *,
                        h=None, r_max=10.0, _quad=None):
    """Derivative of ``T`` at ``(D, f)`` in the direction ``pair`` (surface + volume term)."""
    surface = np.zeros(2)
    if pair.y is not None:
        surface = delta_limit(depth_fn, f, pair.y, mu, a, K_dirs, h=h, r_max=r_max)
    volume = np.zeros(2)
    if pair.g is not None:
        volume = nabla_epsilon(depth_fn, pair.g, None, a, 0.0, box, resolution, _quad=_quad)
    return surface + volume


@dataclass
class FDTable:
    """Finite-difference quotients of ``T`` next to the analytic derivative."""

    eps: np.ndarray
    quotients: np.ndarray
    errors: np.ndarray
    derivative: np.ndarray

    def rows(self):
        for e, q, err in zip(self.eps, self.quotients, self.errors):
            yield float(e), float(q[0]), float(q[1]), float(err)

    def extrapolated(self, points=None):
        """Quotient extrapolated to ``eps -> 0`` through the last ``points`` rows.

        The polynomial in ``eps`` interpolating the quotients is evaluated at
        zero (Richardson extrapolation for an error expansion in powers of
        ``eps``).  Defaults to all rows.
        """
        k = len(self.eps) if points is None else int(points)
        if not 1 <= k <= len(self.eps):
            raise ValueError(f"points must be between 1 and {len(self.eps)}")
        e, q = self.eps[-k:], self.quotients[-k:]
        weights = np.array([np.prod([e[j] / (e[j] - e[i]) for j in range(k) if j != i])
                            for i in range(k)])
        return weights @ q

    def extrapolation_error(self, points=None):
        return float(np.linalg.norm(self.extrapolated(points) - self.derivative))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "quotient_x", "quotient_y", "err"])
            for row in self.rows():
                w.writerow([repr(v) for v in row])


def fd_convergence_check(depth_fn, f, pair, a, eps_list, box, resolution=400, *, mu=None,
                         K_dirs=256, band=None, derivative=None, h=None, r_max=10.0):
    """Tabulate ``(T(D + eps y, f + eps g) - T(D, f)) / eps`` against ``T'(y, g)``.

    ``mu`` (centre of the radial chart) is required when ``pair.y`` is set.
    """
    eps = np.asarray(eps_list, dtype=float)
    if eps.ndim != 1 or eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps_list must be positive and strictly decreasing")
    quad = _Quadrature(box, resolution)
    fn = _depth_callable(depth_fn)
    D = quad.values(fn)
    y = quad.values(pair.y)
    g = quad.values(pair.g)
    fv = quad.values(f)
    r = float(np.max(np.abs(y))) if pair.y_bound is None else pair.y_bound
    for e in eps:
        _check_band(a, band, e, r)
    if derivative is None:
        if pair.y is not None and mu is None:
            raise ValueError("mu is required to evaluate the surface term")
        derivative = hadamard_derivative(fn, f, mu, a, pair, K_dirs, box, resolution,
                                         h=h, r_max=r_max, _quad=quad)
    base_mask = D > a
    quad.check_region(base_mask)
    base = quad.moment(base_mask * fv)
    quotients = []
    for e in eps:
        mask = D + e * y > a
        quad.check_region(mask)
        quotients.append((quad.moment(mask * (fv + e * g)) - base) / e)
    quotients = np.array(quotients)
    errors = np.linalg.norm(quotients - derivative, axis=1)
    return FDTable(eps, quotients, errors, np.asarray(derivative, dtype=float))


def _gaussian(center):
    center = np.asarray(center, dtype=float)
    return lambda p: np.exp(-0.5 * np.sum((p - center) ** 2, axis=1)) / (2 * np.pi)


@dataclass(frozen=True)
class RadialFixture:
    """Analytic test case: ``D = 1/(1+|x|)``, standard Gaussian ``f``, ``y(x) = x1``, shifted Gaussian ``g``.

    At level ``a`` the level set is the circle of radius ``1/a - 1``, so the
    chart and Jacobian have closed forms.  ``box`` is the integration box and
    ``pair.y_bound`` the supremum of ``|x1|`` on it.
    """

    half_width: float = 2.0
    shift: tuple = (0.5, 0.0)

    @staticmethod
    def depth(p):
        return 1.0 / (1.0 + np.linalg.norm(p, axis=1))

    @property
    def f(self):
        return _gaussian((0.0, 0.0))

    @property
    def g(self):
        return _gaussian(self.shift)

    @staticmethod
    def y(p):
        return p[:, 0]

    @property
    def mu(self):
        return np.zeros(2)

    @property
    def box(self):
        w = self.half_width
        return (np.array([-w, -w]), np.array([w, w]))

    @property
    def pair(self):
        return PerturbationPair(self.y, self.g, self.half_width)

    @staticmethod
    def radius(a):
        return 1.0 / a - 1.0

    @staticmethod
    def jacobian(a):
        return (1.0 / a**2) * (1.0 / a - 1.0)
