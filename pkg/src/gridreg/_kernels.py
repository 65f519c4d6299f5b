"""Numba kernels behind the search engines and metric evaluators.

Layout conventions shared by all kernels here:

* Reference clouds arrive as three separate contiguous column arrays
  (y0, y1, y2) sorted ascending by the first axis. Column layout plus
  branch-free inner loops is what lets LLVM vectorize the pair sweep, and
  the sort enables a searchsorted window prefilter on axis 0.
* Bin indices use round-half-away-from-zero of v / bin_size, computed as
  copysign(floor(|v * inv_bin| + 0.5), v * inv_bin). The same expression is
  used everywhere bins are assigned so results agree bit-for-bit.
* Parallel kernels write one output slot per work item and never reduce
  across threads, so results are independent of the thread count.

Metric codes: 0 = L2, 1 = L1, 2 = truncated L1 (param = threshold),
3 = saturated L0 (param = bin size; inlier ball is Chebyshev param/2).
"""

import math

import numpy as np
from numba import njit, prange

# rotations per parallel work item; fixed so chunking never depends on
# the thread count
_CHUNK = 16

METRIC_L2 = 0
METRIC_L1 = 1
METRIC_TRUNC_L1 = 2
METRIC_SAT_L0 = 3


@njit(cache=True, inline="always")
def _point_best(p0, p1, p2, y0, y1, y2, code, param):
    """Best (minimum) residual of one transformed source point against all of Y.

    Requires y0 ascending for the windowed metrics (codes 2 and 3).
    """
    m = y0.shape[0]
    if code == METRIC_TRUNC_L1:
        # points with |dy0| >= param already hit the truncation ceiling
        jlo = np.searchsorted(y0, p0 - param)
        jhi = np.searchsorted(y0, p0 + param)
        best = param
        for j in range(jlo, jhi):
            v = abs(y0[j] - p0) + abs(y1[j] - p1) + abs(y2[j] - p2)
            if v < best:
                best = v
                if best == 0.0:
                    break
        return best
    if code == METRIC_SAT_L0:
        half = 0.5 * param
        jlo = np.searchsorted(y0, p0 - half)
        jhi = np.searchsorted(y0, p0 + half)
        for j in range(jlo, jhi):
            if (
                abs(y0[j] - p0) < half
                and abs(y1[j] - p1) < half
                and abs(y2[j] - p2) < half
            ):
                return 0.0
        return 1.0
    if code == METRIC_L1:
        best = math.inf
        for j in range(m):
            v = abs(y0[j] - p0) + abs(y1[j] - p1) + abs(y2[j] - p2)
            if v < best:
                best = v
        return best
    best = math.inf
    for j in range(m):
        d0 = y0[j] - p0
        d1 = y1[j] - p1
        d2 = y2[j] - p2
        v = d0 * d0 + d1 * d1 + d2 * d2
        if v < best:
            best = v
    return math.sqrt(best)


@njit(cache=True)
def alignment_error_kernel(p, y0, y1, y2, code, param):
    """Sum over source points of the best residual against Y (serial, fixed order)."""
    total = 0.0
    for i in range(p.shape[0]):
        total += _point_best(p[i, 0], p[i, 1], p[i, 2], y0, y1, y2, code, param)
    return total


@njit(cache=True)
def chamfer_one_way(a, b):
    """Mean over rows of `a` of the Euclidean distance to the closest row of `b`."""
    total = 0.0
    for i in range(a.shape[0]):
        best = math.inf
        for j in range(b.shape[0]):
            d0 = a[i, 0] - b[j, 0]
            d1 = a[i, 1] - b[j, 1]
            d2 = a[i, 2] - b[j, 2]
            v = d0 * d0 + d1 * d1 + d2 * d2
            if v < best:
                best = v
        total += math.sqrt(best)
    return total / a.shape[0]


@njit(cache=True, inline="always")
def _mode_dense_one(rot, x, y0, y1, y2, inv_bin, bin_size,
                    lo0, lo1, lo2, d0, d1, d2, counts, last, linf):
    """Histogram mode for a single rotation using a dense per-bin count array.

    `counts` and `last` have d0*d1*d2 + 1 slots; the extra slot collects
    out-of-bounds pairs. `last` holds the most recent source index seen per
    bin, which deduplicates multiple reference hits from one source point.
    Returns (best count, flat bin index, number of tied bins).
    """
    n = x.shape[0]
    m = y0.shape[0]
    nbins = d0 * d1 * d2
    counts[: nbins + 1] = 0
    last[: nbins + 1] = -1
    fd0 = np.float64(d0)
    fd1 = np.float64(d1)
    fd2 = np.float64(d2)
    flo0 = np.float64(lo0)
    flo1 = np.float64(lo1)
    flo2 = np.float64(lo2)
    dump = np.float64(nbins)
    for i in range(n):
        xi0 = x[i, 0]
        xi1 = x[i, 1]
        xi2 = x[i, 2]
        p0 = rot[0, 0] * xi0 + rot[0, 1] * xi1 + rot[0, 2] * xi2
        p1 = rot[1, 0] * xi0 + rot[1, 1] * xi1 + rot[1, 2] * xi2
        p2 = rot[2, 0] * xi0 + rot[2, 1] * xi1 + rot[2, 2] * xi2
        # conservative axis-0 window: candidates outside it cannot land in bounds
        yl = p0 + (flo0 - 1.0) * bin_size
        yh = p0 + (flo0 + fd0) * bin_size
        jlo = np.searchsorted(y0, yl)
        jhi = np.searchsorted(y0, yh)
        for j in range(jlo, jhi):
            q0 = (y0[j] - p0) * inv_bin
            f0 = np.copysign(np.floor(np.fabs(q0) + 0.5), q0) - flo0
            q1 = (y1[j] - p1) * inv_bin
            f1 = np.copysign(np.floor(np.fabs(q1) + 0.5), q1) - flo1
            q2 = (y2[j] - p2) * inv_bin
            f2 = np.copysign(np.floor(np.fabs(q2) + 0.5), q2) - flo2
            ok = (f0 >= 0.0) & (f0 < fd0) & (f1 >= 0.0) & (f1 < fd1) \
                & (f2 >= 0.0) & (f2 < fd2)
            linf[j] = (f0 * fd1 + f1) * fd2 + f2 if ok else dump
        for j in range(jlo, jhi):
            lin = np.int64(linf[j])
            if last[lin] != i:
                last[lin] = i
                if lin < nbins:
                    counts[lin] += 1
    best = np.int64(0)
    best_lin = np.int64(-1)
    ties = np.int64(0)
    for lin in range(nbins):
        c = np.int64(counts[lin])
        if c > best:
            best = c
            best_lin = lin
            ties = 1
        elif c == best and c > 0:
            ties += 1
    return best, best_lin, ties


@njit(cache=True, parallel=True)
def mode_dense_batch(rots, x, y0, y1, y2, inv_bin, bin_size,
                     lo0, lo1, lo2, d0, d1, d2,
                     counts_out, lins_out, ties_out):
    nrot = rots.shape[0]
    nchunks = (nrot + _CHUNK - 1) // _CHUNK
    nbins = d0 * d1 * d2
    m = y0.shape[0]
    for c in prange(nchunks):
        counts = np.empty(nbins + 1, dtype=np.int32)
        last = np.empty(nbins + 1, dtype=np.int32)
        linf = np.empty(m, dtype=np.float64)
        hi = min(nrot, (c + 1) * _CHUNK)
        for r in range(c * _CHUNK, hi):
            best, lin, ties = _mode_dense_one(
                rots[r], x, y0, y1, y2, inv_bin, bin_size,
                lo0, lo1, lo2, d0, d1, d2, counts, last, linf,
            )
            counts_out[r] = best
            lins_out[r] = lin
            ties_out[r] = ties


@njit(cache=True, inline="always")
def _mode_sparse_one(rot, x, y0, y1, y2, inv_bin, bin_size,
                     lo0, lo1, lo2, d0, d1, d2, keys):
    """Histogram mode via sorting (bin, source) keys; no dense count array.

    Key encoding: flat_bin * N + i, so ascending sort groups bins in
    lexicographic order with source indices deduplicable within each group.
    Out-of-bounds pairs get key -1. Returns (best, flat bin, ties).
    """
    n = x.shape[0]
    m = y0.shape[0]
    fd0 = np.float64(d0)
    fd1 = np.float64(d1)
    fd2 = np.float64(d2)
    flo0 = np.float64(lo0)
    flo1 = np.float64(lo1)
    flo2 = np.float64(lo2)
    for i in range(n):
        xi0 = x[i, 0]
        xi1 = x[i, 1]
        xi2 = x[i, 2]
        p0 = rot[0, 0] * xi0 + rot[0, 1] * xi1 + rot[0, 2] * xi2
        p1 = rot[1, 0] * xi0 + rot[1, 1] * xi1 + rot[1, 2] * xi2
        p2 = rot[2, 0] * xi0 + rot[2, 1] * xi1 + rot[2, 2] * xi2
        yl = p0 + (flo0 - 1.0) * bin_size
        yh = p0 + (flo0 + fd0) * bin_size
        jlo = np.searchsorted(y0, yl)
        jhi = np.searchsorted(y0, yh)
        base = i * m
        for j in range(base, base + jlo):
            keys[j] = -1
        for j in range(base + jhi, base + m):
            keys[j] = -1
        for j in range(jlo, jhi):
            q0 = (y0[j] - p0) * inv_bin
            f0 = np.copysign(np.floor(np.fabs(q0) + 0.5), q0) - flo0
            q1 = (y1[j] - p1) * inv_bin
            f1 = np.copysign(np.floor(np.fabs(q1) + 0.5), q1) - flo1
            q2 = (y2[j] - p2) * inv_bin
            f2 = np.copysign(np.floor(np.fabs(q2) + 0.5), q2) - flo2
            ok = (f0 >= 0.0) & (f0 < fd0) & (f1 >= 0.0) & (f1 < fd1) \
                & (f2 >= 0.0) & (f2 < fd2)
            if ok:
                # int64 arithmetic: flat_bin * n + i can exceed 2**53
                lin = (np.int64(f0) * d1 + np.int64(f1)) * d2 + np.int64(f2)
                keys[base + j] = lin * n + i
            else:
                keys[base + j] = -1
    srt = np.sort(keys)
    best = np.int64(0)
    best_lin = np.int64(-1)
    ties = np.int64(0)
    cur_lin = np.int64(-1)
    cur = np.int64(0)
    prev_key = np.int64(-2)
    for idx in range(srt.shape[0]):
        k = srt[idx]
        if k < 0 or k == prev_key:
            continue
        prev_key = k
        lin = k // n
        if lin != cur_lin:
            if cur > best:
                best = cur
                best_lin = cur_lin
                ties = 1
            elif cur == best and cur > 0:
                ties += 1
            cur_lin = lin
            cur = 1
        else:
            cur += 1
    if cur > best:
        best = cur
        best_lin = cur_lin
        ties = 1
    elif cur == best and cur > 0:
        ties += 1
    return best, best_lin, ties


@njit(cache=True, parallel=True)
def mode_sparse_batch(rots, x, y0, y1, y2, inv_bin, bin_size,
                      lo0, lo1, lo2, d0, d1, d2,
                      counts_out, lins_out, ties_out):
    nrot = rots.shape[0]
    nchunks = (nrot + _CHUNK - 1) // _CHUNK
    nm = x.shape[0] * y0.shape[0]
    for c in prange(nchunks):
        keys = np.empty(nm, dtype=np.int64)
        hi = min(nrot, (c + 1) * _CHUNK)
        for r in range(c * _CHUNK, hi):
            best, lin, ties = _mode_sparse_one(
                rots[r], x, y0, y1, y2, inv_bin, bin_size,
                lo0, lo1, lo2, d0, d1, d2, keys,
            )
            counts_out[r] = best
            lins_out[r] = lin
            ties_out[r] = ties


@njit(cache=True, parallel=True)
def refine_batch(rots, ts, x, y0, y1, y2, code, param, out):
    """Alignment error for a batch of candidate poses, one output slot each."""
    ncand = rots.shape[0]
    n = x.shape[0]
    for c in prange(ncand):
        r00 = rots[c, 0, 0]
        r01 = rots[c, 0, 1]
        r02 = rots[c, 0, 2]
        r10 = rots[c, 1, 0]
        r11 = rots[c, 1, 1]
        r12 = rots[c, 1, 2]
        r20 = rots[c, 2, 0]
        r21 = rots[c, 2, 1]
        r22 = rots[c, 2, 2]
        t0 = ts[c, 0]
        t1 = ts[c, 1]
        t2 = ts[c, 2]
        total = 0.0
        for i in range(n):
            xi0 = x[i, 0]
            xi1 = x[i, 1]
            xi2 = x[i, 2]
            p0 = r00 * xi0 + r01 * xi1 + r02 * xi2 + t0
            p1 = r10 * xi0 + r11 * xi1 + r12 * xi2 + t1
            p2 = r20 * xi0 + r21 * xi1 + r22 * xi2 + t2
            total += _point_best(p0, p1, p2, y0, y1, y2, code, param)
        out[c] = total


@njit(cache=True, parallel=True)
def exhaustive_batch(rots, x, y0, y1, y2, t0vals, t1vals, t2vals,
                     code, param, err_out, tflat_out):
    """Best translation-grid pose per rotation under the metric.

    Enumerates the translation grid lexicographically; strict-less updates
    keep the first (lexicographically smallest) minimizer. The running-sum
    early break cannot change the winner because residuals are non-negative.
    """
    nrot = rots.shape[0]
    n = x.shape[0]
    n0 = t0vals.shape[0]
    n1 = t1vals.shape[0]
    n2 = t2vals.shape[0]
    for c in prange(nrot):
        r00 = rots[c, 0, 0]
        r01 = rots[c, 0, 1]
        r02 = rots[c, 0, 2]
        r10 = rots[c, 1, 0]
        r11 = rots[c, 1, 1]
        r12 = rots[c, 1, 2]
        r20 = rots[c, 2, 0]
        r21 = rots[c, 2, 1]
        r22 = rots[c, 2, 2]
        rx0 = np.empty(n, dtype=np.float64)
        rx1 = np.empty(n, dtype=np.float64)
        rx2 = np.empty(n, dtype=np.float64)
        for i in range(n):
            xi0 = x[i, 0]
            xi1 = x[i, 1]
            xi2 = x[i, 2]
            rx0[i] = r00 * xi0 + r01 * xi1 + r02 * xi2
            rx1[i] = r10 * xi0 + r11 * xi1 + r12 * xi2
            rx2[i] = r20 * xi0 + r21 * xi1 + r22 * xi2
        best = math.inf
        best_t = np.int64(-1)
        for a in range(n0):
            ta = t0vals[a]
            for b in range(n1):
                tb = t1vals[b]
                for d in range(n2):
                    td = t2vals[d]
                    total = 0.0
                    for i in range(n):
                        total += _point_best(
                            rx0[i] + ta, rx1[i] + tb, rx2[i] + td,
                            y0, y1, y2, code, param,
                        )
                        if total >= best:
                            break
                    if total < best:
                        best = total
                        best_t = (np.int64(a) * n1 + b) * n2 + d
        err_out[c] = best
        tflat_out[c] = best_t


@njit(cache=True)
def sweep_inlier_best(cands, n, m, half, t0vals, t1vals, t2vals):
    """Max per-source inlier count over a dense translation sweep.

    `cands` holds the n*m pairwise difference vectors (reference minus
    rotated source), row-major by source index. A source point is an inlier
    for translation t when some difference lies within the Chebyshev ball of
    radius `half` around t.
    """
    best = 0
    for a in range(t0vals.shape[0]):
        for b in range(t1vals.shape[0]):
            for c in range(t2vals.shape[0]):
                cnt = 0
                for i in range(n):
                    base = i * m
                    for j in range(base, base + m):
                        if (
                            abs(cands[j, 0] - t0vals[a]) < half
                            and abs(cands[j, 1] - t1vals[b]) < half
                            and abs(cands[j, 2] - t2vals[c]) < half
                        ):
                            cnt += 1
                            break
                if cnt > best:
                    best = cnt
    return best
