"""Empirical data depths and their KDE-smoothed versions.

Every depth is a scikit-learn style estimator: ``fit`` stores the reference
sample (plus any Monte-Carlo directions or simplices drawn from
``random_state``) and ``score_samples`` returns depth values in ``[0, 1]``.
An unfitted estimator doubles as a depth *kind*: it carries the kind and its
parameters and can be cloned and fitted on any source sample.

Functional wrappers (``tukey_depth``, ``simplicial_depth``, ...) evaluate a
depth of one sample at one or several query points.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_points, check_positive_int, check_sample

# closed half-spaces and simplices are tested with this slack
TOL = 1e-12

# largest sample for which the simplicial depth enumerates every simplex
SIMPLICIAL_EXACT_THRESHOLD = 12

_CHUNK_ELEMENTS = 4_000_000


def _chunks(n_rows, row_cost):
    step = max(1, _CHUNK_ELEMENTS // max(1, row_cost))
    for start in range(0, n_rows, step):
        yield slice(start, min(n_rows, start + step))


def random_directions(count, dim, seed):
    """``count`` unit vectors drawn uniformly on the sphere of ``R^dim``."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((count, dim))
    norms = np.linalg.norm(u, axis=1)
    # a zero draw has probability 0; replace it by the first axis to stay deterministic
    bad = norms == 0
    u[bad] = np.eye(dim)[0]
    norms[bad] = 1.0
    return u / norms[:, None]


def circle_directions(count, seed):
    """``count`` equally spaced unit vectors in the plane, rotated by a random angle.

    The largest angular gap is ``2 pi / count``, so narrow minimizing
    halfplanes are missed far less often than with i.i.d. directions.
    """
    offset = np.random.default_rng(seed).random()
    theta = 2 * np.pi * (np.arange(count) + offset) / count
    return np.column_stack([np.cos(theta), np.sin(theta)])


class BaseDepth(BaseEstimator):
    """Common machinery for depth estimators.

    Subclasses implement ``_fit(X)`` and ``_depth(Q)`` on validated arrays.
    """

    #: supremum of the depth range; every implemented depth lives in [0, 1]
    upper_bound = 1.0
    kind = None

    def _min_samples(self, dim):
        return 1

    def fit(self, X, y=None):
        X = check_sample(X)
        min_samples = self._min_samples(X.shape[1])
        if X.shape[0] < min_samples:
            raise ValueError(
                f"insufficient points: {self.kind} depth needs at least {min_samples} "
                f"points in dimension {X.shape[1]}, got {X.shape[0]}"
            )
        self.sample_ = X
        self.n_features_in_ = X.shape[1]
        self._fit(X)
        return self

    def _fit(self, X):
        pass

    def score_samples(self, X):
        """Depth of each row of ``X`` with respect to the fitted sample."""
        check_is_fitted(self, "sample_")
        Q = check_points(X, self.n_features_in_, name="X")
        return np.clip(self._depth(Q), 0.0, self.upper_bound)

    def __call__(self, X):
        return self.score_samples(X)


class TukeyDepth(BaseDepth):
    """Halfspace depth: the smallest empirical mass of a closed halfspace containing x.

    Parameters
    ----------
    method : {"auto", "exact", "mc"}
        ``"auto"`` is exact in dimensions 1 and 2 (angular sweep, O(n log n) per
        query) and Monte Carlo otherwise.
    direction_count : int
        Number of directions for the Monte-Carlo minimum; in the plane they
        form a randomly rotated regular fan.
    random_state : int
        Seed of the random directions.
    """

    kind = "tukey"

    def __init__(self, method="auto", direction_count=1000, random_state=0):
        self.method = method
        self.direction_count = direction_count
        self.random_state = random_state

    def _resolved_method(self, dim):
        if self.method not in ("auto", "exact", "mc"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "exact" and dim > 2:
            raise ValueError("exact Tukey depth is only available for d <= 2")
        if self.method == "auto":
            return "exact" if dim <= 2 else "mc"
        return self.method

    def _fit(self, X):
        n, d = X.shape
        self.method_ = self._resolved_method(d)
        if self.method_ == "mc":
            count = check_positive_int(self.direction_count, "direction_count")
            if d == 2:
                self.directions_ = circle_directions(count, self.random_state)
            else:
                self.directions_ = random_directions(count, d, self.random_state)
            self._sorted_proj = np.sort(X @ self.directions_.T, axis=0)
        elif d == 1:
            self._sorted_proj = np.sort(X[:, 0])

    def _depth(self, Q):
        n, d = self.sample_.shape
        if self.method_ == "exact" and d == 2:
            counts = _kernels.tukey2d_counts(
                self.sample_[:, 0].copy(), self.sample_[:, 1].copy(),
                Q[:, 0].copy(), Q[:, 1].copy(), TOL,
            )
            return counts / n
        if self.method_ == "exact":
            s = self._sorted_proj
            x = Q[:, 0]
            upper = n - np.searchsorted(s, x - TOL, side="left")
            lower = np.searchsorted(s, x + TOL, side="right")
            return np.minimum(upper, lower) / n
        best = np.full(Q.shape[0], n, dtype=np.int64)
        qproj = Q @ self.directions_.T
        for k in range(self.directions_.shape[0]):
            # points with <X_i - x, u> >= 0, closed halfspace
            above = n - np.searchsorted(self._sorted_proj[:, k], qproj[:, k] - TOL, side="left")
            np.minimum(best, above, out=best)
        return best / n


class SimplicialDepth(BaseDepth):
    """Simplicial (Liu) depth: fraction of sample simplices whose closed hull contains x.

    Parameters
    ----------
    method : {"auto", "enumerate", "mc", "angular"}
        ``"auto"`` enumerates all C(n, d+1) simplices when ``n <= exact_threshold``
        and otherwise averages over ``subset_count`` random simplices.
        ``"angular"`` is the exact O(n log n) planar count, valid for points in
        general position.
    exact_threshold : int
    subset_count : int
    random_state : int
        Seed of the random simplices.

    Notes
    -----
    Simplices of (numerically) zero volume are dropped from both the count
    and the denominator.
    """

    kind = "simplicial"

    def __init__(self, method="auto", exact_threshold=SIMPLICIAL_EXACT_THRESHOLD,
                 subset_count=5000, random_state=0):
        self.method = method
        self.exact_threshold = exact_threshold
        self.subset_count = subset_count
        self.random_state = random_state

    def _min_samples(self, dim):
        return dim + 1

    def _fit(self, X):
        n, d = X.shape
        method = self.method
        if method not in ("auto", "enumerate", "mc", "angular"):
            raise ValueError(f"unknown method {method!r}")
        if method == "auto":
            method = "enumerate" if n <= self.exact_threshold else "mc"
        if method == "angular" and d != 2:
            raise ValueError("the angular simplicial count requires d = 2")
        self.method_ = method
        if method == "angular":
            return
        if method == "enumerate":
            simplices = np.array(list(combinations(range(n), d + 1)), dtype=np.int64)
        else:
            simplices = _random_subsets(n, d + 1, check_positive_int(self.subset_count, "subset_count"),
                                        self.random_state)
        self.simplices_ = simplices
        self._inv, self._base, valid = _simplex_inverses(X, simplices)
        self.n_valid_simplices_ = int(valid.sum())
        if self.n_valid_simplices_ == 0:
            raise ValueError("all simplices are degenerate")
        self._inv = np.ascontiguousarray(self._inv[valid])
        self._base = np.ascontiguousarray(self._base[valid])

    def _depth(self, Q):
        n = self.sample_.shape[0]
        if self.method_ == "angular":
            counts = _kernels.simplicial2d_angular(
                self.sample_[:, 0].copy(), self.sample_[:, 1].copy(),
                Q[:, 0].copy(), Q[:, 1].copy(), TOL,
            )
            return counts / (n * (n - 1) * (n - 2) / 6)
        counts = _kernels.simplex_containment_counts(self._inv, self._base, np.ascontiguousarray(Q), TOL)
        return counts / self.n_valid_simplices_


def _random_subsets(n, size, count, seed):
    """``count`` random index subsets of ``size`` distinct elements of ``range(n)``."""
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(count, size))
    while True:
        s = np.sort(idx, axis=1)
        dup = np.any(s[:, 1:] == s[:, :-1], axis=1)
        if not dup.any():
            return idx
        idx[dup] = rng.integers(0, n, size=(int(dup.sum()), size))


def _simplex_inverses(X, simplices):
    """Barycentric solvers of the simplices, with a validity mask.

    A simplex counts as degenerate when ``|det|`` is below ``TOL`` times the
    product of its edge lengths (the Hadamard bound).
    """
    verts = X[simplices]
    base = verts[:, 0, :]
    edges = verts[:, 1:, :] - base[:, None, :]
    mats = np.transpose(edges, (0, 2, 1))
    det = np.linalg.det(mats)
    bound = np.prod(np.linalg.norm(edges, axis=2), axis=1)
    valid = np.abs(det) > TOL * bound
    inv = np.zeros_like(mats)
    if valid.any():
        inv[valid] = np.linalg.inv(mats[valid])
    return inv, base, valid


class SpatialDepth(BaseDepth):
    """Spatial depth ``1 - ||mean_i S(x - X_i)||`` with ``S(v) = v/||v||`` and ``S(0) = 0``."""

    kind = "spatial"

    def __init__(self):
        pass

    def _depth(self, Q):
        X = self.sample_
        n, d = X.shape
        out = np.empty(Q.shape[0])
        for sl in _chunks(Q.shape[0], n * d):
            diff = Q[sl, None, :] - X[None, :, :]
            norms = np.linalg.norm(diff, axis=2)
            with np.errstate(invalid="ignore", divide="ignore"):
                units = np.where(norms[..., None] > 0, diff / norms[..., None], 0.0)
            out[sl] = 1.0 - np.linalg.norm(units.mean(axis=1), axis=1)
        return out


class ProjectionDepth(BaseDepth):
    """Projection depth ``1 / (1 + O(x))`` with median/MAD outlyingness.

    ``O(x) = max_u |<u, x> - med(<u, X>)| / MAD(<u, X>)`` over ``direction_count``
    random unit directions plus the coordinate axes.  MAD is the raw median
    absolute deviation (no consistency factor).  Directions with zero MAD are
    skipped.
    """

    kind = "projection"

    def __init__(self, direction_count=1000, random_state=0):
        self.direction_count = direction_count
        self.random_state = random_state

    def _min_samples(self, dim):
        return 2

    def _fit(self, X):
        d = X.shape[1]
        count = check_positive_int(self.direction_count, "direction_count")
        U = np.vstack([random_directions(count, d, self.random_state), np.eye(d)])
        proj = X @ U.T
        med = np.median(proj, axis=0)
        mad = np.median(np.abs(proj - med), axis=0)
        keep = mad > 0
        if not keep.any():
            raise ValueError("degenerate projections: MAD is zero on every direction")
        self.directions_ = U[keep]
        self.medians_ = med[keep]
        self.mads_ = mad[keep]

    def _depth(self, Q):
        k = self.directions_.shape[0]
        out = np.empty(Q.shape[0])
        for sl in _chunks(Q.shape[0], k):
            o = np.abs(Q[sl] @ self.directions_.T - self.medians_) / self.mads_
            out[sl] = 1.0 / (1.0 + o.max(axis=1))
        return out


class SmoothedDepth(BaseDepth):
    """Depth with respect to a Gaussian kernel density estimate of the sample.

    The KDE is realised by a surrogate sample of ``surrogate_size`` draws, on
    which a clone of ``depth`` is fitted.

    Parameters
    ----------
    depth : BaseDepth, default TukeyDepth()
        Unfitted depth estimator (the kind).
    surrogate_size : int
    random_state : int
        Seed of the surrogate draws.
    antithetic : bool
        Negate the kernel noise of the surrogate draws (see ``kde_sample``).
    """

    kind = "smoothed"

    def __init__(self, depth=None, surrogate_size=10_000, random_state=0, antithetic=False):
        self.depth = depth
        self.surrogate_size = surrogate_size
        self.random_state = random_state
        self.antithetic = antithetic

    def _min_samples(self, dim):
        return 2

    def _fit(self, X):
        from .density import fit_kde

        self.fit_kde_model(fit_kde(X))

    def fit_kde_model(self, model):
        """Fit on an already estimated ``KdeModel`` instead of raw data."""
        from .density import kde_sample

        size = check_positive_int(self.surrogate_size, "surrogate_size")
        self.kde_ = model
        self.sample_ = model.data
        self.n_features_in_ = model.data.shape[1]
        self.surrogate_ = kde_sample(model, size, self.random_state, antithetic=self.antithetic)
        base = TukeyDepth() if self.depth is None else self.depth
        self.depth_ = clone(base).fit(self.surrogate_)
        return self

    def _depth(self, Q):
        return self.depth_.score_samples(Q)


DEPTHS = {
    "tukey": TukeyDepth,
    "simplicial": SimplicialDepth,
    "liu": SimplicialDepth,
    "spatial": SpatialDepth,
    "projection": ProjectionDepth,
}


def make_depth(kind, **params):
    """Unfitted depth estimator for a kind name such as ``"tukey"``."""
    if isinstance(kind, BaseDepth):
        return clone(kind).set_params(**params) if params else clone(kind)
    try:
        cls = DEPTHS[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown depth kind {kind!r}; choose from {sorted(DEPTHS)}") from None
    return cls(**params)


def _is_single_point(x, dim):
    x = np.asarray(x)
    return x.ndim == 0 or (x.ndim == 1 and (dim > 1 or x.shape[0] == 1))


def _evaluate(estimator, sample, x):
    values = estimator.fit(sample).score_samples(x)
    return float(values[0]) if _is_single_point(x, estimator.n_features_in_) else values


def tukey_depth(sample, x, *, method="auto", direction_count=1000, seed=0):
    """Tukey depth of ``x`` (one point or a matrix of points) in ``sample``."""
    return _evaluate(TukeyDepth(method, direction_count, seed), sample, x)


def simplicial_depth(sample, x, *, method="auto", exact_threshold=SIMPLICIAL_EXACT_THRESHOLD,
                     subset_count=5000, seed=0):
    return _evaluate(SimplicialDepth(method, exact_threshold, subset_count, seed), sample, x)


def spatial_depth(sample, x):
    return _evaluate(SpatialDepth(), sample, x)


def projection_depth(sample, x, *, direction_count=1000, seed=0):
    return _evaluate(ProjectionDepth(direction_count, seed), sample, x)


def smoothed_depth(kind, kde, x, m=10_000, seed=0, *, antithetic=False):
    """Depth of ``x`` with respect to the density of ``kde`` (a ``KdeModel``).

    The KDE is represented by ``m`` draws generated from ``seed``.
    """
    est = SmoothedDepth(make_depth(kind), surrogate_size=m, random_state=seed, antithetic=antithetic)
    est.fit_kde_model(kde)
    values = est.score_samples(x)
    return float(values[0]) if _is_single_point(x, est.n_features_in_) else values


@dataclass(frozen=True)
class GridSpec:
    """Rectangular lattice of ``shape[j]`` equispaced nodes on ``[lower[j], upper[j]]``."""

    lower: tuple
    upper: tuple
    shape: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        shape = tuple(int(v) for v in np.atleast_1d(self.shape))
        if not len(lower) == len(upper) == len(shape):
            raise ValueError("lower, upper and shape must have the same length")
        if any(s < 1 for s in shape):
            raise ValueError("grid shape entries must be positive")
        if any(u < lo for lo, u in zip(lower, upper)):
            raise ValueError("grid upper corner must not be below the lower corner")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "shape", shape)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def axes(self):
        return [np.linspace(lo, u, s) for lo, u, s in zip(self.lower, self.upper, self.shape)]

    def step(self):
        return np.array([(u - lo) / (s - 1) if s > 1 else 0.0
                         for lo, u, s in zip(self.lower, self.upper, self.shape)])

    def nodes(self):
        """Node coordinates in row-major order, shape ``(size, ndim)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def as_depth_function(evaluator):
    """Vectorised callable ``points (k, d) -> values (k,)`` for an evaluator.

    Accepts fitted depth estimators or plain callables.
    """
    if hasattr(evaluator, "score_samples"):
        return evaluator.score_samples
    if callable(evaluator):
        return lambda pts: np.asarray(evaluator(np.asarray(pts, dtype=float)), dtype=float).reshape(-1)
    raise TypeError("evaluator must be a fitted depth estimator or a callable")


def depth_field(evaluator, grid):
    """Evaluate a depth on every node of ``grid``; returns an array of ``grid.shape``."""
    fn = as_depth_function(evaluator)
    values = np.asarray(fn(grid.nodes()), dtype=float)
    if values.shape != (grid.size,):
        values = np.broadcast_to(values, (grid.size,)).copy()
    return values.reshape(grid.shape)
