"""Compiled inner loops for the count-based depths.

All kernels loop over query points independently (``prange``), so the output
does not depend on the number of worker threads.
"""

import numba
import numpy as np

# OpenMP is thread-safe for concurrent launches and avoids the TBB version probe
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "omp"

TWO_PI = 2.0 * np.pi


@numba.njit(cache=True, nogil=True)
def _sorted_angles(px, py, qx, qy, tol):
    n = px.shape[0]
    ang = np.empty(n)
    nz = 0
    zero = 0
    for i in range(n):
        # +0.0 maps -0.0 to 0.0 so that atan2 never returns -pi
        dx = (px[i] - qx) + 0.0
        dy = (py[i] - qy) + 0.0
        if abs(dx) <= tol and abs(dy) <= tol:
            zero += 1
        else:
            ang[nz] = np.arctan2(dy, dx)
            nz += 1
    return np.sort(ang[:nz]), zero


@numba.njit(cache=True, nogil=True, parallel=True)
def tukey2d_counts(px, py, qx, qy, tol):
    """Minimum number of sample points in a closed half-plane through each query.

    The closed half-plane count is ``n - (points in the complementary open
    half-plane)``; the largest open half-plane is found by a two-pointer sweep
    over the sorted angles, each candidate arc being ``[theta_i, theta_i + pi)``.
    """
    m = qx.shape[0]
    out = np.empty(m, np.int64)
    for k in numba.prange(m):
        a, zero = _sorted_angles(px, py, qx[k], qy[k], tol)
        nz = a.shape[0]
        best = 0
        j = 0
        for i in range(nz):
            if j < i:
                j = i
            while j < i + nz:
                if j < nz:
                    t = a[j]
                else:
                    t = a[j - nz] + TWO_PI
                if t - a[i] < np.pi - tol:
                    j += 1
                else:
                    break
            if j - i > best:
                best = j - i
        out[k] = zero + nz - best
    return out


@numba.njit(cache=True, nogil=True, parallel=True)
def simplicial2d_angular(px, py, qx, qy, tol):
    """Number of sample triangles containing each query (planar, general position).

    A triangle misses the query iff its vertices lie in an open half-plane
    through it; charging each such triangle to its first vertex in
    counter-clockwise order gives ``sum_i C(k_i, 2)`` missed triangles, with
    ``k_i`` the number of points strictly inside ``(theta_i, theta_i + pi)``.
    """
    n = px.shape[0]
    m = qx.shape[0]
    total = n * (n - 1) * (n - 2) // 6
    out = np.empty(m, np.int64)
    for k in numba.prange(m):
        a, zero = _sorted_angles(px, py, qx[k], qy[k], tol)
        nz = a.shape[0]
        missed = 0
        lo = 0
        hi = 0
        for i in range(nz):
            if lo < i + 1:
                lo = i + 1
            while lo < i + nz:
                t = a[lo] if lo < nz else a[lo - nz] + TWO_PI
                if t - a[i] <= tol:
                    lo += 1
                else:
                    break
            if hi < lo:
                hi = lo
            while hi < i + nz:
                t = a[hi] if hi < nz else a[hi - nz] + TWO_PI
                if t - a[i] < np.pi - tol:
                    hi += 1
                else:
                    break
            c = hi - lo
            missed += c * (c - 1) // 2
        out[k] = total - missed
    return out


@numba.njit(cache=True, nogil=True, parallel=True)
def simplex_containment_counts(inv, base, queries, tol):
    """Count, for each query, the simplices whose closed hull contains it.

    ``inv[s]`` maps ``x - base[s]`` to the barycentric weights of vertices
    1..d of simplex ``s``; the weight of vertex 0 is one minus their sum.
    """
    m = queries.shape[0]
    s_count = inv.shape[0]
    d = queries.shape[1]
    out = np.zeros(m, np.int64)
    for k in numba.prange(m):
        diff = np.empty(d)
        c = 0
        for s in range(s_count):
            for r in range(d):
                diff[r] = queries[k, r] - base[s, r]
            inside = True
            total = 0.0
            for r in range(d):
                lam = 0.0
                for q in range(d):
                    lam += inv[s, r, q] * diff[q]
                if lam < -tol:
                    inside = False
                    break
                total += lam
            if inside and 1.0 - total >= -tol:
                c += 1
        out[k] = c
    return out
