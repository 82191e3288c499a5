"""Level sets ``{D = a}`` of a depth: radial charts, contours and the chart Jacobian.

Around a centre ``mu`` with ``D(mu) > a`` each unit direction ``n`` meets the
level set at radius ``gamma(a, n)``; ``tau(s, n) = mu + gamma(s, n) n`` is the
radial parametrisation of the level sets near ``a``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from ._validation import check_box
from .depth import GridSpec, as_depth_function


class ChartError(ValueError):
    """Raised when some rays of a radial chart fail; ``failed`` lists their indices."""

    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = list(failed)


@dataclass
class RadialChart:
    """Radii ``gamma(a, n_k)`` of the level set along ``K`` unit directions from ``center``."""

    center: np.ndarray
    level: float
    directions: np.ndarray
    radii: np.ndarray
    window: float | None = None

    @property
    def angles(self):
        if self.directions.shape[1] != 2:
            raise ValueError("angles are only defined for planar charts")
        return np.arctan2(self.directions[:, 1], self.directions[:, 0])

    def points(self):
        return self.center + self.radii[:, None] * self.directions

    def area(self):
        """Shoelace area of the chart polygon (planar charts)."""
        p = self.points()
        if p.shape[1] != 2:
            raise ValueError("area is only defined for planar charts")
        x, y = p[:, 0], p[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass
class ContourSet:
    """Polylines of one level; ``closed[k]`` is False for components cut by the grid boundary."""

    level: float
    components: list = field(default_factory=list)
    closed: list = field(default_factory=list)

    @property
    def truncated(self):
        return [k for k, c in enumerate(self.closed) if not c]

    def __len__(self):
        return len(self.components)

    def rows(self):
        for cid, comp in enumerate(self.components):
            for vid, (x, y) in enumerate(comp):
                yield cid, vid, float(x), float(y)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["component_id", "vertex_index", "x", "y"])
            for cid, vid, x, y in self.rows():
                w.writerow([cid, vid, repr(x), repr(y)])


def sphere_directions(count, dim):
    """``count`` quasi-uniform unit vectors: equispaced angles in the plane,
    a Fibonacci lattice on the 2-sphere, scrambled-free Sobol points otherwise."""
    if count < 1:
        raise ValueError("count must be positive")
    if dim == 1:
        return np.array([[1.0], [-1.0]])[: max(1, min(count, 2))]
    if dim == 2:
        theta = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if dim == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5**0.5) * k
        r = np.sqrt(1 - z * z)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    u = qmc.Sobol(dim, scramble=False).random(count + 1)[1:]
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1)[:, None]


def deepest_point(evaluator, search_box, resolution=64, iterations=30):
    """Approximate maximiser of the depth inside ``search_box``.

    Grid argmax followed by a compass search whose step halves whenever no
    axis move improves the depth.
    """
    fn = as_depth_function(evaluator)
    lower, upper = check_box(search_box)
    grid = GridSpec(lower, upper, (resolution,) * lower.shape[0])
    nodes = grid.nodes()
    values = fn(nodes)
    if not np.max(values) > np.min(values):
        raise ValueError("no interior mode: the depth is flat on the search box")
    x = nodes[int(np.argmax(values))].copy()
    best = float(np.max(values))
    step = grid.step().copy()
    dim = x.shape[0]
    moves = np.vstack([np.eye(dim), -np.eye(dim)])
    for _ in range(iterations):
        cand = x + moves * step
        vals = fn(cand)
        k = int(np.argmax(vals))
        if vals[k] > best:
            x, best = cand[k], float(vals[k])
        else:
            step = step / 2
    return x


def radial_radii(evaluator, mu, directions, a, r_max, tol=1e-8, steps=256, max_iter=200):
    """First crossings of level ``a`` along several rays at once.

    Returns ``(radii, failed)``; failed rays (level never reached within
    ``r_max``) get a NaN radius.
    """
    fn = as_depth_function(evaluator)
    mu = np.asarray(mu, dtype=float)
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
    if not fn(mu[None, :])[0] > a:
        raise ValueError("center below level: D(mu) must exceed a")
    k = dirs.shape[0]
    r = r_max * np.arange(1, steps + 1) / steps
    pts = mu + (r[None, :, None] * dirs[:, None, :])
    below = fn(pts.reshape(-1, mu.shape[0])).reshape(k, steps) <= a
    failed = ~below.any(axis=1)
    first = np.argmax(below, axis=1)
    hi = np.where(failed, np.nan, r[first])
    lo = np.where(first > 0, hi - r_max / steps, 0.0)
    active = ~failed
    radii = np.full(k, np.nan)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        mid = 0.5 * (lo[idx] + hi[idx])
        dm = fn(mu + mid[:, None] * dirs[idx])
        width = hi[idx] - lo[idx]
        done = ((np.abs(dm - a) <= tol) & (width <= tol * r_max)) | (width <= 4 * np.finfo(float).eps * r_max)
        radii[idx[done]] = mid[done]
        active[idx[done]] = False
        up = dm > a
        lo[idx[~done & up]] = mid[~done & up]
        hi[idx[~done & ~up]] = mid[~done & ~up]
    radii[active] = 0.5 * (lo[active] + hi[active])
    return radii, failed


def radial_radius(evaluator, mu, direction, a, r_max=10.0, tol=1e-8):
    """Smallest ``r`` with ``D(mu + r n) = a``: marching in ``r_max / 256`` steps, then bisection."""
    radii, failed = radial_radii(evaluator, mu, [direction], a, r_max, tol)
    if failed[0]:
        raise ValueError(f"level not reached: D stays above {a} up to radius {r_max}")
    return float(radii[0])


def radial_chart(evaluator, mu, a, K, r_max=10.0, tol=1e-8, window=None):
    """Tabulate ``gamma(a, n)`` on ``K`` quasi-uniform directions around ``mu``."""
    mu = np.asarray(mu, dtype=float)
    dirs = sphere_directions(K, mu.shape[0])
    radii, failed = radial_radii(evaluator, mu, dirs, a, r_max, tol)
    if failed.any():
        bad = np.nonzero(failed)[0]
        raise ChartError(f"partial chart: level {a} not reached along directions {bad.tolist()}", bad)
    return RadialChart(mu, float(a), dirs, radii, window)


@dataclass
class H2Report:
    """Per-direction monotonicity of ``lambda -> D(mu + (gamma + lambda) n)`` on ``(-delta, delta)``."""

    decreasing: np.ndarray
    delta: float

    @property
    def pass_fraction(self):
        return float(np.mean(self.decreasing)) if self.decreasing.size else 1.0

    @property
    def flagged(self):
        return np.nonzero(~self.decreasing)[0].tolist()


def check_H2(evaluator, chart, delta, probes=11, noise_tol=0.0):
    """Diagnose strict radial decrease of the depth across the chart's level set.

    With ``noise_tol = 0`` a direction passes when consecutive probed depths
    strictly decrease.  A positive ``noise_tol`` tolerates increases up to
    that size, provided the depth still drops across the window.  Probes stay
    on the ray (``gamma + lambda > 0``).
    """
    fn = as_depth_function(evaluator)
    lam = np.linspace(-delta, delta, probes + 2)[1:-1]
    r = chart.radii[:, None] + lam[None, :]
    r = np.maximum(r, chart.radii[:, None] * 1e-9)
    pts = chart.center + r[..., None] * chart.directions[:, None, :]
    vals = fn(pts.reshape(-1, chart.center.shape[0])).reshape(r.shape)
    diffs = np.diff(vals, axis=1)
    if noise_tol > 0:
        decreasing = np.all(diffs <= noise_tol, axis=1) & (vals[:, -1] < vals[:, 0])
    else:
        decreasing = np.all(diffs < 0, axis=1)
    chart.window = float(delta)
    return H2Report(decreasing, float(delta))


_CORNER_EDGES = ((0, 3), (0, 1), (1, 2), (2, 3))


def contour_marching_squares(field, a, grid):
    """Level-``a`` polylines of a planar field sampled on ``grid``.

    ``field[i, j]`` is the value at ``(x_i, y_j)`` (the layout returned by
    ``depth_field``).  Crossings are linearly interpolated along cell edges;
    saddle cells are resolved by the mean of their corners.  Chains that end
    on the grid boundary are reported as not closed.
    """
    F = np.asarray(field, dtype=float)
    if F.ndim != 2 or grid.ndim != 2 or F.shape != grid.shape:
        raise ValueError("field must be a 2-d array matching the grid shape")
    xs, ys = grid.axes()
    inside = F >= a
    nx, ny = F.shape
    out = ContourSet(float(a))
    if nx < 2 or ny < 2:
        return out

    c0, c1 = inside[:-1, :-1], inside[1:, :-1]
    c2, c3 = inside[1:, 1:], inside[:-1, 1:]
    code = c0.astype(int) | (c1.astype(int) << 1) | (c2.astype(int) << 2) | (c3.astype(int) << 3)
    cells = np.argwhere((code != 0) & (code != 15))

    def point(edge):
        kind, i, j = edge
        if kind == 0:  # horizontal edge (i, j) -> (i + 1, j)
            f0, f1 = F[i, j], F[i + 1, j]
            t = (a - f0) / (f1 - f0)
            return (xs[i] + t * (xs[i + 1] - xs[i]), ys[j])
        f0, f1 = F[i, j], F[i, j + 1]
        t = (a - f0) / (f1 - f0)
        return (xs[i], ys[j] + t * (ys[j + 1] - ys[j]))

    adjacency = {}

    def link(e, f):
        adjacency.setdefault(e, []).append(f)
        adjacency.setdefault(f, []).append(e)

    for i, j in cells:
        i, j = int(i), int(j)
        edges = ((0, i, j), (1, i + 1, j), (0, i, j + 1), (1, i, j))
        corners = (c0[i, j], c1[i, j], c2[i, j], c3[i, j])
        crossed = [k for k in range(4) if corners[k] != corners[(k + 1) % 4]]
        if len(crossed) == 2:
            link(edges[crossed[0]], edges[crossed[1]])
            continue
        centre_inside = 0.25 * (F[i, j] + F[i + 1, j] + F[i + 1, j + 1] + F[i, j + 1]) >= a
        for k in range(4):
            # isolate the corners whose state differs from the centre
            if corners[k] != centre_inside:
                e, f = _CORNER_EDGES[k]
                link(edges[e], edges[f])

    visited = set()

    def trace(start):
        chain = [start]
        visited.add(start)
        prev, cur = None, start
        while True:
            nxt = [e for e in adjacency[cur] if e != prev and e not in visited]
            if not nxt:
                closed = len(chain) > 2 and start in adjacency[cur] and prev is not None
                return chain, closed
            prev, cur = cur, nxt[0]
            chain.append(cur)
            visited.add(cur)

    order = sorted(adjacency)
    for e in order:
        if e not in visited and len(adjacency[e]) == 1:
            chain, _ = trace(e)
            out.components.append(np.array([point(v) for v in chain]))
            out.closed.append(False)
    for e in order:
        if e not in visited:
            chain, closed = trace(e)
            out.components.append(np.array([point(v) for v in chain]))
            out.closed.append(closed)
    return out


def jacobian_det_tau(evaluator, mu, a, theta, h=None, r_max=10.0, tol=1e-12):
    """``|det d tau|`` at ``(a, theta)`` by central differences (planar).

    ``tau(s, theta) = mu + gamma(s, theta) (cos theta, sin theta)``; ``h``
    defaults to ``1e-4 * a`` and is used for both arguments.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (2,):
        raise ValueError("jacobian_det_tau is implemented for d = 2")
    h = 1e-4 * a if h is None else h
    levels = np.array([a + h, a - h, a, a])
    angles = np.array([theta, theta, theta + h, theta - h])
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    tau = np.empty((4, 2))
    for k in range(4):
        # one root per (level, angle); radial_radius raises on failure
        tau[k] = mu + radial_radius(evaluator, mu, dirs[k], levels[k], r_max, tol) * dirs[k]
    J = np.column_stack([(tau[0] - tau[1]) / (2 * h), (tau[2] - tau[3]) / (2 * h)])
    return float(abs(np.linalg.det(J)))
