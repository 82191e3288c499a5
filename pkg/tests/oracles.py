"""Independent brute-force reference implementations used as test oracles."""

import itertools

import numpy as np


def tukey_brute_force_counts(X, x, tol=1e-12):
    """Minimum closed-halfplane count over all critical directions (d = 2).

    The count changes only where a boundary line through ``x`` passes a
    sample point, so it suffices to probe the normals of ``X_i - x``, both
    orientations, slightly rotated either way, plus the pairwise-difference
    normals.
    """
    V = X - x
    nz = V[np.hypot(V[:, 0], V[:, 1]) > tol]
    zero = len(X) - len(nz)
    if len(nz) == 0:
        return len(X)
    angles = np.arctan2(nz[:, 1], nz[:, 0])
    cand = []
    for t in angles:
        for base in (t + np.pi / 2, t - np.pi / 2):
            cand.extend([base, base + 1e-9, base - 1e-9])
    for i, j in itertools.combinations(range(len(X)), 2):
        d = X[j] - X[i]
        t = np.arctan2(d[1], d[0]) + np.pi / 2
        cand.extend([t, t + np.pi])
    U = np.stack([np.cos(cand), np.sin(cand)], axis=1)
    proj = nz @ U.T
    counts = np.sum(proj >= -tol, axis=0)
    return int(counts.min()) + zero


def simplicial_enumeration(X, x, tol=1e-12):
    """Fraction of non-degenerate closed triangles containing ``x`` (d = 2), via signed areas."""
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    hit = total = 0
    for i, j, k in itertools.combinations(range(len(X)), 3):
        p, q, r = X[i], X[j], X[k]
        area = cross(p, q, r)
        scale = np.linalg.norm(q - p) * np.linalg.norm(r - p)
        if abs(area) <= tol * max(scale, 1.0):
            continue
        total += 1
        s1, s2, s3 = cross(p, q, x) / area, cross(q, r, x) / area, cross(r, p, x) / area
        if min(s1, s2, s3) >= -tol:
            hit += 1
    return hit / total


def spatial_direct(X, x):
    acc = np.zeros(X.shape[1])
    for row in X:
        v = x - row
        nrm = np.sqrt(np.sum(v * v))
        if nrm > 0:
            acc += v / nrm
    return 1.0 - np.sqrt(np.sum((acc / len(X)) ** 2))


def projection_dense(X, x, count=100_000):
    theta = np.linspace(0, np.pi, count, endpoint=False)
    U = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    P = X @ U.T
    med = np.median(P, axis=0)
    mad = np.median(np.abs(P - med), axis=0)
    keep = mad > 0
    out = np.abs(x @ U.T - med)[keep] / mad[keep]
    return 1.0 / (1.0 + out.max())
