"""The depth-trimmed mean functional ``int t 1{D(t) >= a} f(t) dt`` and its estimators."""

import hashlib
import json
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from ._random import derive_seed
from ._validation import check_box, check_level, check_positive_int, check_sample
from .density import GaussianKDE, KdeModel, fit_kde, kde_eval, kde_sample
from .depth import BaseDepth, SimplicialDepth, SmoothedDepth, TukeyDepth, as_depth_function, make_depth

#: seed of the mega-sample behind every cached population reference
REFERENCE_SEED = 20_240_601

TRUNCATION_WARNING = "box may truncate region"


@dataclass
class TrimmedMeanResult:
    """Outcome of a trimmed-mean evaluation.

    ``vector`` is the unnormalised integral; ``normalized_vector`` divides it
    by ``trimmed_mass`` and is ``None`` when nothing is retained.
    """

    vector: np.ndarray
    trimmed_mass: float
    a: float
    method: str
    standard_error: np.ndarray | None = None
    strict: bool = False
    normalized_vector: np.ndarray | None = field(init=False)

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)
        self.trimmed_mass = float(self.trimmed_mass)
        self.normalized_vector = self.vector / self.trimmed_mass if self.trimmed_mass > 0 else None

    def to_dict(self):
        def listed(v):
            return None if v is None else [float(x) for x in v]

        return {
            "vector": listed(self.vector),
            "mass": self.trimmed_mass,
            "normalized_vector": listed(self.normalized_vector),
            "stderr": listed(self.standard_error),
            "a": self.a,
            "method": self.method,
        }


def _retained(depths, a, strict):
    return depths > a if strict else depths >= a


def _density_function(density):
    if isinstance(density, KdeModel):
        return lambda pts: kde_eval(density, pts)
    if isinstance(density, GaussianKDE):
        return density.pdf
    if callable(density):
        return lambda pts: np.asarray(density(pts), dtype=float).reshape(-1)
    raise TypeError("density must be a KdeModel, a fitted GaussianKDE or a callable")


def trimmed_mean_mc(kde, evaluator, a, m=20_000, seed=0, *, strict=False, antithetic=False):
    """Monte-Carlo estimate of ``E[X 1{D(X) >= a}]`` for X drawn from the KDE.

    Parameters
    ----------
    kde : KdeModel
    evaluator : fitted depth estimator or callable
    a : float
        Trimming level.
    m : int
        Number of KDE draws.
    strict : bool
        Use ``D > a`` instead of ``D >= a``.
    """
    a = check_level(a)
    m = check_positive_int(m, "m")
    depth_fn = as_depth_function(evaluator)
    draws = kde_sample(kde, m, seed, antithetic=antithetic)
    keep = _retained(depth_fn(draws), a, strict)
    summand = draws * keep[:, None]
    se = summand.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(kde.dim)
    return TrimmedMeanResult(summand.mean(axis=0), keep.mean(), a, "mc", se, strict)


def cell_centers(lower, upper, resolution):
    return [lo + (np.arange(resolution) + 0.5) * (u - lo) / resolution for lo, u in zip(lower, upper)]


def _mesh_points(axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def level_indicator(depth_fn, a, lower, upper, resolution, *, strict=False, refine=False):
    """Indicator of ``{D >= a}`` at the cell centres of a ``resolution**d`` grid.

    With ``refine=True`` the depth is evaluated on a coarse grid first and
    only cells near a change of the indicator are subdivided and re-evaluated,
    so expensive depths cost roughly the boundary length instead of the
    area.  This assumes that no component of the region or of its
    complement is narrower than a coarse cell.
    """
    dim = len(lower)
    levels = [resolution]
    if refine:
        while levels[-1] % 2 == 0 and levels[-1] // 2 >= 16:
            levels.append(levels[-1] // 2)
    levels.reverse()

    res = levels[0]
    ind = _retained(depth_fn(_mesh_points(cell_centers(lower, upper, res))), a, strict)
    ind = ind.reshape((res,) * dim)
    evaluations = ind.size
    for res in levels[1:]:
        mixed = ndimage.maximum_filter(ind, size=3, mode="nearest") != ndimage.minimum_filter(
            ind, size=3, mode="nearest")
        for axis in range(dim):
            ind = np.repeat(ind, 2, axis=axis)
            mixed = np.repeat(mixed, 2, axis=axis)
        idx = np.nonzero(mixed)
        if idx[0].size:
            centers = cell_centers(lower, upper, res)
            pts = np.stack([centers[j][idx[j]] for j in range(dim)], axis=1)
            ind[idx] = _retained(depth_fn(pts), a, strict)
            evaluations += pts.shape[0]
    return ind, evaluations


def trimmed_mean_grid(density_fn, evaluator, a, box, resolution=200, *, strict=False,
                      refine=False, warn=True):
    """Midpoint-rule quadrature of ``int t 1{D(t) >= a} f(t) dt`` over ``box``.

    A ``UserWarning`` is issued when cells on the box boundary are retained,
    since the region may then extend beyond the box.
    """
    a = check_level(a)
    if resolution < 16:
        raise ValueError("resolution must be at least 16 cells per axis")
    lower, upper = check_box(box)
    dim = lower.shape[0]
    f = _density_function(density_fn)
    ind, _ = level_indicator(as_depth_function(evaluator), a, lower, upper, resolution,
                             strict=strict, refine=refine)
    if warn and _touches_boundary(ind):
        warnings.warn(TRUNCATION_WARNING, UserWarning, stacklevel=2)
    cell = np.prod((upper - lower) / resolution)
    axes = cell_centers(lower, upper, resolution)
    flat = ind.ravel()
    vector = np.zeros(dim)
    mass = 0.0
    if flat.any():
        pts = _mesh_points(axes)[flat]
        w = f(pts) * cell
        vector = pts.T @ w
        mass = float(w.sum())
    return TrimmedMeanResult(vector, mass, a, "grid", None, strict)


def _touches_boundary(ind):
    for axis in range(ind.ndim):
        if np.take(ind, 0, axis=axis).any() or np.take(ind, -1, axis=axis).any():
            return True
    return False


def _reference_depth(kind, dim):
    """The depth used for population references: exact planar counts where available."""
    depth = make_depth(kind)
    if isinstance(depth, SimplicialDepth) and dim == 2 and depth.method in ("auto", "mc"):
        depth.set_params(method="angular")
    if isinstance(depth, TukeyDepth) and dim == 2 and depth.method == "mc":
        depth.set_params(method="exact")
    return depth


def _depth_description(depth):
    return {"kind": depth.kind, **{k: v for k, v in sorted(depth.get_params().items())
                                   if not isinstance(v, BaseEstimator)}}


#: read-only references shipped with the package, consulted before the user cache
BUNDLED_REFERENCES = Path(__file__).parent / "references"


def default_cache_dir():
    return Path(os.environ.get("DEPTHTRIM_CACHE", Path.home() / ".cache" / "depthtrim"))


def reference_record(config, *, n_ref=200_000, resolution=400, seed=REFERENCE_SEED,
                     cache_dir=None, refine=True, reflect=False):
    """Population trimmed mean for ``config`` with its provenance, cached as JSON.

    The population depth is the empirical depth of one mega-sample of size
    ``n_ref``; the integral is a ``resolution**2`` midpoint rule against the
    closed-form density.  Returns a dict with keys ``config_hash, vector,
    mass, n_ref, resolution, seed``.
    """
    from .populations import POPULATIONS

    pop = POPULATIONS[config.population]
    depth = _reference_depth(config.depth, pop["dim"])
    a = check_level(config.a)
    key = {
        "population": config.population,
        "depth": _depth_description(depth),
        "a": a,
        "strict": bool(getattr(config, "strict", False)),
        "n_ref": int(n_ref),
        "resolution": int(resolution),
        "seed": int(seed),
        "reflect": bool(reflect),
    }
    config_hash = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()
    cache_dir = default_cache_dir() if cache_dir is None else Path(cache_dir)
    name = f"reference-{config_hash[:20]}.json"
    path = cache_dir / name
    for candidate in (BUNDLED_REFERENCES / name, path):
        if candidate.exists():
            record = json.loads(candidate.read_text())
            if record.get("config_hash") == config_hash:
                return record

    if a > depth.upper_bound:
        vector, mass = np.zeros(pop["dim"]), 0.0
    else:
        mega = pop["sample"](n_ref, seed, reflect=reflect)
        fitted = clone(depth).fit(mega)
        res = trimmed_mean_grid(pop["pdf"], fitted, a, pop["box"], resolution,
                                strict=key["strict"], refine=refine, warn=False)
        vector, mass = res.vector, res.trimmed_mass
    record = {
        "config_hash": config_hash,
        "vector": [float(v) for v in vector],
        "mass": float(mass),
        "n_ref": int(n_ref),
        "resolution": int(resolution),
        "seed": int(seed),
    }
    cache_dir.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(record, indent=2, sort_keys=True))
    tmp.replace(path)
    return record


def population_reference(config, **kwargs):
    """High-accuracy population trimmed mean ``Pi(D, f)`` (a d-vector); see ``reference_record``."""
    return np.asarray(reference_record(config, **kwargs)["vector"])


class DepthTrimmedMean(BaseEstimator):
    """Depth-based trimmed mean of a sample.

    The sample is smoothed by a Gaussian KDE with Silverman bandwidths, the
    depth is computed with respect to the KDE (or the raw sample when
    ``smoothed=False``) and the functional is integrated against the KDE.

    Parameters
    ----------
    depth : BaseDepth or str, default TukeyDepth()
        Unfitted depth estimator or kind name.
    a : float
        Trimming level; points with depth below ``a`` are discarded.
    method : {"mc", "grid"}
    mc_size : int
        KDE draws for ``method="mc"``.
    surrogate_size : int
        KDE draws representing the smoothed depth.
    resolution : int
        Cells per axis for ``method="grid"``.
    strict : bool
        Retain ``D > a`` instead of ``D >= a``.
    smoothed : bool
    random_state : int

    Attributes
    ----------
    location_ : ndarray of shape (d,)
        Unnormalised trimmed mean.
    normalized_location_ : ndarray of shape (d,) or None
    trimmed_mass_ : float
    standard_error_ : ndarray or None
    result_ : TrimmedMeanResult
    depth_ : fitted depth estimator
    kde_ : KdeModel
    """

    def __init__(self, depth=None, a=0.1, method="mc", mc_size=20_000, surrogate_size=10_000,
                 resolution=200, strict=False, smoothed=True, random_state=0):
        self.depth = depth
        self.a = a
        self.method = method
        self.mc_size = mc_size
        self.surrogate_size = surrogate_size
        self.resolution = resolution
        self.strict = strict
        self.smoothed = smoothed
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_sample(X, min_samples=2)
        if self.method not in ("mc", "grid"):
            raise ValueError(f"unknown method {self.method!r}")
        kind = TukeyDepth() if self.depth is None else make_depth(self.depth)
        self.kde_ = fit_kde(X)
        if self.smoothed:
            self.depth_ = SmoothedDepth(kind, self.surrogate_size,
                                        derive_seed(self.random_state, 0)).fit_kde_model(self.kde_)
        else:
            self.depth_ = clone(kind).fit(X)
        if self.method == "mc":
            res = trimmed_mean_mc(self.kde_, self.depth_, self.a, self.mc_size,
                                  derive_seed(self.random_state, 1), strict=self.strict)
        else:
            h = self.kde_.bandwidths
            box = (X.min(axis=0) - 8 * h, X.max(axis=0) + 8 * h)
            res = trimmed_mean_grid(self.kde_, self.depth_, self.a, box, self.resolution,
                                    strict=self.strict)
        self.result_ = res
        self.location_ = res.vector
        self.normalized_location_ = res.normalized_vector
        self.trimmed_mass_ = res.trimmed_mass
        self.standard_error_ = res.standard_error
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X):
        """Depth of each row of ``X`` under the fitted (smoothed) depth."""
        check_is_fitted(self, "depth_")
        return self.depth_.score_samples(X)

    def predict(self, X):
        """+1 for points kept by the trimming, -1 for trimmed points."""
        keep = _retained(self.score_samples(X), self.a, self.strict)
        return np.where(keep, 1, -1)
