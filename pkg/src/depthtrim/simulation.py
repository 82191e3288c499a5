"""Simulation of the scaled estimation error of the depth-trimmed mean.

A replicate draws a Beta(2, 2) x Beta(2, 2) sample, smooths it with a
Gaussian KDE, evaluates the trimmed mean of the KDE under the smoothed depth
by Monte Carlo and returns ``R_n = sqrt(a_n) (Pi_hat - Pi_ref)``.
"""

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from ._random import derive_seed
from .density import KdeModel, fit_kde, kde_eval
from .depth import DEPTHS, GridSpec, SmoothedDepth, make_depth
from .level_geometry import contour_marching_squares
from .populations import POPULATIONS, beta22_sample
from .trimmed_mean import population_reference, trimmed_mean_mc

__all__ = [
    "SimConfig",
    "SimResult",
    "ConsistencyTable",
    "beta22_sample",
    "a_n_value",
    "run_replicate",
    "run_simulation",
    "consistency_sweep",
    "export_figure_data",
    "resolve_threads",
]

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "reps", "depth", "a", "a_n_rule", "population", "mc_size",
                 "surrogate_size", "base_seed"],
    "properties": {
        "n": {"type": "integer", "minimum": 2},
        "reps": {"type": "integer", "minimum": 0},
        "depth": {"enum": sorted(DEPTHS)},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "a_n_rule": {
            "oneOf": [
                {"enum": ["sqrt_n", "n"]},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["custom"],
                    "properties": {"custom": {"type": "number", "exclusiveMinimum": 0}},
                },
            ]
        },
        "population": {"enum": sorted(POPULATIONS)},
        "mc_size": {"type": "integer", "minimum": 1},
        "surrogate_size": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
    },
}


def _json_path(error):
    path = "$"
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; ``from_dict`` / ``from_json`` validate against ``CONFIG_SCHEMA``.

    ``a`` may exceed 1 (empty trimming region); the schema only requires it
    to be positive.
    """

    n: int
    reps: int
    depth: str
    a: float
    a_n_rule: object = "sqrt_n"
    population: str = "beta22_product"
    mc_size: int = 20_000
    surrogate_size: int = 10_000
    base_seed: int = 0

    def __post_init__(self):
        self.validate(self.to_dict())

    @staticmethod
    def validate(data):
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            err = errors[0]
            raise ValueError(f"config error at {_json_path(err)}: {err.message}")

    @classmethod
    def from_dict(cls, data):
        cls.validate(data)
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"config error at $: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self):
        rule = dict(self.a_n_rule) if isinstance(self.a_n_rule, dict) else self.a_n_rule
        return {
            "n": self.n,
            "reps": self.reps,
            "depth": self.depth,
            "a": self.a,
            "a_n_rule": rule,
            "population": self.population,
            "mc_size": self.mc_size,
            "surrogate_size": self.surrogate_size,
            "base_seed": self.base_seed,
        }

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **changes):
        return SimConfig(**{**self.to_dict(), **changes})


def a_n_value(config):
    """``a_n`` for the configured rule: ``sqrt(n)``, ``n`` or a custom constant."""
    rule = config.a_n_rule
    if rule == "sqrt_n":
        return math.sqrt(config.n)
    if rule == "n":
        return float(config.n)
    return float(rule["custom"])


def resolve_threads(threads=None):
    """Worker count from the argument, then ``DEPTHTRIM_THREADS``, then 1."""
    if threads is None:
        env = os.environ.get("DEPTHTRIM_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("threads must be at least 1")
    return int(threads)


def replicate_seed(config, rep_index):
    return derive_seed(config.base_seed, rep_index)


def _estimate(sample, config, seed, *, antithetic=False):
    """Smoothed-depth trimmed mean of one sample; sub-streams keyed off ``seed``."""
    kde = fit_kde(sample)
    kind = make_depth(config.depth)
    if "random_state" in kind.get_params():
        kind.set_params(random_state=derive_seed(seed, 3))
    depth = SmoothedDepth(kind, config.surrogate_size, derive_seed(seed, 1),
                          antithetic=antithetic).fit_kde_model(kde)
    return trimmed_mean_mc(kde, depth, config.a, config.mc_size, derive_seed(seed, 2),
                           antithetic=antithetic)


def run_replicate(config, rep_index, reference=None, *, reflect=False, return_result=False):
    """``R_n`` of replicate ``rep_index``.

    ``reflect=True`` replays the same random numbers for the reflected
    population ``1 - X`` (uniforms ``1 - U``, negated kernel noise).
    """
    pop = POPULATIONS[config.population]
    if reference is None:
        reference = population_reference(config)
    seed = replicate_seed(config, rep_index)
    sample = pop["sample"](config.n, derive_seed(seed, 0), reflect=reflect)
    res = _estimate(sample, config, seed, antithetic=reflect)
    r = math.sqrt(a_n_value(config)) * (res.vector - np.asarray(reference, dtype=float))
    return (r, res) if return_result else r


@dataclass
class SimResult:
    """Replicate draws of ``R_n`` and their summary.

    Failed replicates leave a NaN row and an entry in ``failures``; ``mean``
    and ``covariance`` use the completed rows only.
    """

    config: SimConfig
    r_values: np.ndarray
    reference: np.ndarray
    seeds: list
    wall_time: float = 0.0
    failures: dict = field(default_factory=dict)
    masses: np.ndarray | None = None

    @property
    def config_hash(self):
        return self.config.config_hash()

    @property
    def completed(self):
        return self.r_values[np.all(np.isfinite(self.r_values), axis=1)]

    @property
    def partial(self):
        return bool(self.failures)

    @property
    def mean(self):
        done = self.completed
        return done.mean(axis=0) if len(done) else np.full(self.r_values.shape[1], np.nan)

    @property
    def covariance(self):
        done = self.completed
        d = self.r_values.shape[1]
        if len(done) < 2:
            return np.full((d, d), np.nan)
        return np.cov(done, rowvar=False, ddof=1)

    def summary(self):
        """JSON-ready summary; wall time is left out so the file is reproducible."""
        def num(v):
            v = float(v)
            return v if math.isfinite(v) else None

        done = self.completed
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config_hash,
            "a_n": a_n_value(self.config),
            "reference": [num(v) for v in self.reference],
            "reps": int(self.r_values.shape[0]),
            "completed": int(len(done)),
            "partial": self.partial,
            "failures": {str(k): v for k, v in sorted(self.failures.items())},
            "mean": [num(v) for v in self.mean],
            "covariance": [[num(v) for v in row] for row in self.covariance],
            "standard_error": [num(v) for v in (done.std(axis=0, ddof=1) / math.sqrt(len(done))
                                                if len(done) > 1 else [math.nan] * len(self.reference))],
            "mean_mass": num(np.nanmean(self.masses)) if self.masses is not None and len(done) else None,
            "seeds": [int(s) for s in self.seeds],
        }


def run_simulation(config, *, reference=None, threads=None, reflect=False, progress=None):
    """Run ``config.reps`` replicates and collect them in index order.

    Replicates are independent given their seeds, so ``threads`` only changes
    the schedule.  A replicate that raises is recorded in ``failures``.
    """
    t0 = time.perf_counter()
    dim = POPULATIONS[config.population]["dim"]
    if reference is None:
        reference = population_reference(config) if config.reps else np.full(dim, np.nan)
    reference = np.asarray(reference, dtype=float)

    def job(i):
        try:
            r, res = run_replicate(config, i, reference, reflect=reflect, return_result=True)
            return i, r, res.trimmed_mass, None
        except Exception as exc:  # recorded per index; the run continues
            return i, None, np.nan, f"{type(exc).__name__}: {exc}"

    r_values = np.full((config.reps, dim), np.nan)
    masses = np.full(config.reps, np.nan)
    failures = {}
    workers = resolve_threads(threads)
    if workers == 1:
        outcomes = map(job, range(config.reps))
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        outcomes = pool.map(job, range(config.reps))
    try:
        for i, r, mass, err in outcomes:
            if err is None:
                r_values[i] = r
                masses[i] = mass
            else:
                failures[i] = err
            if progress is not None:
                progress(i)
    finally:
        if workers > 1:
            pool.shutdown()
    seeds = [replicate_seed(config, i) for i in range(config.reps)]
    return SimResult(config, r_values, reference, seeds, time.perf_counter() - t0, failures, masses)


@dataclass
class ConsistencyTable:
    """Per sample size: median and interquartile range of the replicate errors."""

    n: np.ndarray
    median: np.ndarray
    iqr: np.ndarray
    errors: list

    def rows(self):
        for n, med, iqr in zip(self.n, self.median, self.iqr):
            yield int(n), float(med), float(iqr)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "median_error", "iqr"])
            for n, med, iqr in self.rows():
                w.writerow([n, repr(med), repr(iqr)])


def consistency_sweep(depth, a, n_list, reps, seed=0, *, population="beta22_product",
                      mc_size=5_000, surrogate_size=5_000, target=None, threads=None):
    """Errors ``||normalized estimate - target||`` over ``reps`` replicates per ``n``.

    ``target`` defaults to the population centre of symmetry ``(0.5, 0.5)``.
    An empty trimming region counts as an infinite error.
    """
    target = np.full(POPULATIONS[population]["dim"], 0.5) if target is None else np.asarray(target)
    n_list = [int(n) for n in n_list]
    if reps == 0:
        return ConsistencyTable(np.array(n_list[:0]), np.empty(0), np.empty(0), [])
    sampler = POPULATIONS[population]["sample"]
    workers = resolve_threads(threads)
    meds, iqrs, all_errors = [], [], []
    for n in n_list:
        config = SimConfig(n=n, reps=reps, depth=depth, a=a, population=population,
                           mc_size=mc_size, surrogate_size=surrogate_size, base_seed=seed)

        def job(rep, n=n, config=config):
            s = derive_seed(seed, n, rep)
            res = _estimate(sampler(n, derive_seed(s, 0)), config, s)
            if res.normalized_vector is None:
                return math.inf
            return float(np.linalg.norm(res.normalized_vector - target))

        if workers == 1:
            errs = np.array([job(r) for r in range(reps)])
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                errs = np.array(list(pool.map(job, range(reps))))
        q1, med, q3 = np.percentile(errs, [25, 50, 75])
        meds.append(med)
        iqrs.append(q3 - q1)
        all_errors.append(errs)
    return ConsistencyTable(np.array(n_list), np.array(meds), np.array(iqrs), all_errors)


def _cloud_kde(points):
    """KDE of the ``R_n`` cloud; unit bandwidths when Silverman's rule is undefined."""
    try:
        return fit_kde(points)
    except ValueError:
        return KdeModel(points, np.ones(points.shape[1]))


def density_grid(points, grid_resolution=64):
    """KDE of ``points`` on a ``grid_resolution**2`` node grid covering the cloud +- 3 bandwidths."""
    kde = _cloud_kde(points)
    h = kde.bandwidths
    grid = GridSpec(points.min(axis=0) - 3 * h, points.max(axis=0) + 3 * h,
                    (grid_resolution, grid_resolution))
    values = kde_eval(kde, grid.nodes()).reshape(grid.shape)
    return grid, values


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def export_figure_data(result, out_dir, grid_resolution=64):
    """Write ``r_values.csv``, ``density_grid.csv``, ``contours.csv`` and ``summary.json``.

    Contours are drawn at the deciles ``k/10 * max f`` (k = 1..9) of the
    density of the ``R_n`` cloud.  Returns the list of written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if result.r_values.shape[1] != 2:
        raise ValueError("figure data is only defined for d = 2")
    paths = [out / name for name in ("r_values.csv", "density_grid.csv", "contours.csv",
                                     "summary.json")]

    _write_csv(paths[0], ["rep", "r1", "r2"],
               ((i, float(r[0]), float(r[1])) for i, r in enumerate(result.r_values)))

    done = result.completed
    grid_rows, contour_rows = [], []
    if len(done):
        grid, values = density_grid(done, grid_resolution)
        nodes = grid.nodes()
        grid_rows = [(float(x), float(y), float(f)) for (x, y), f in zip(nodes, values.ravel())]
        top = float(values.max())
        for k in range(1, 10):
            level = k / 10 * top
            for cid, vid, x, y in contour_marching_squares(values, level, grid).rows():
                contour_rows.append((level, cid, vid, x, y))
    _write_csv(paths[1], ["x", "y", "f"], grid_rows)
    _write_csv(paths[2], ["level", "component_id", "vertex_index", "x", "y"], contour_rows)

    summary = result.summary()
    summary["grid_resolution"] = int(grid_resolution)
    paths[3].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths

