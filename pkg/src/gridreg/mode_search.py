"""Inlier-maximizing translation via the mode of discretized pair differences.

For a fixed rotation R, every pair (source point x_i, reference point y_j)
votes for the translation y_j - R x_i. Votes are discretized onto a cubic
lattice with spacing `bin_size` (round-half-away-from-zero per axis) and the
most-voted bin center is the returned translation. Votes are deduplicated per
source index within each bin, so a bin's count equals the number of source
points it would claim as inliers, never more than N.

Ties between equally-voted bins break toward the lexicographically smallest
integer bin index, which keeps results independent of enumeration order and
thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidInputError, NoCandidateError
from .geometry import as_point_cloud, _check_rotation

__all__ = [
    "bin_index",
    "bin_center",
    "TranslationHistogram",
    "ModeResult",
    "translation_histogram",
    "mode_translation",
]

# dense count arrays are capped so a pathological bin size cannot demand
# gigabytes; beyond the cap the sort-based sparse path takes over
_DENSE_MAX_BINS = 4_194_304
_KEY_SPACE_LIMIT = 1 << 62


def bin_index(v, bin_size: float) -> np.ndarray:
    """Integer lattice index of translation vector(s): round-half-away-from-zero
    of v / bin_size per axis. Bin center = index * bin_size."""
    if not (bin_size > 0) or not np.isfinite(bin_size):
        raise InvalidInputError("bin_size must be positive and finite")
    a = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("translation values must be finite")
    q = a * (1.0 / bin_size)
    return np.copysign(np.floor(np.fabs(q) + 0.5), q).astype(np.int64)


def bin_center(index, bin_size: float) -> np.ndarray:
    """Center of the lattice bin with the given integer index triple."""
    return np.asarray(index, dtype=np.float64) * float(bin_size)


@dataclass(frozen=True)
class ModeResult:
    """Winning histogram bin: its center, vote count, and how many bins tied."""

    t_star: np.ndarray
    count: int
    num_tied_bins: int
    index: tuple

    def __post_init__(self):
        t = np.asarray(self.t_star, dtype=np.float64).copy()
        t.flags.writeable = False
        object.__setattr__(self, "t_star", t)
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))


@dataclass(frozen=True)
class TranslationHistogram:
    """Sparse vote map from integer bin-index triples to counts.

    With dedup=True (the default used by the mode search) a count is the
    number of distinct source points voting for the bin and total <= N*M;
    with dedup=False raw pair votes are kept and, absent bounds, total = N*M.
    """

    bin_size: float
    counts: dict
    total: int
    dedup: bool

    def mode(self) -> ModeResult:
        if not self.counts:
            raise NoCandidateError("histogram is empty")
        best = max(self.counts.values())
        winners = sorted(k for k, c in self.counts.items() if c == best)
        idx = winners[0]
        return ModeResult(
            t_star=bin_center(idx, self.bin_size),
            count=int(best),
            num_tied_bins=len(winners),
            index=idx,
        )


def _bounds_to_index_range(t_bounds, bin_size: float):
    """Convert per-axis [lo, hi] meters bounds to inclusive bin-index bounds.

    A bin is admissible when its center lies in [lo, hi]; the epsilon keeps
    bounds that are exact bin multiples from falling out through rounding.
    """
    tb = np.asarray(t_bounds, dtype=np.float64)
    if tb.shape != (2, 3) or not np.all(np.isfinite(tb)):
        raise InvalidInputError("t_bounds must be a finite (2, 3) array [lo; hi]")
    if np.any(tb[1] < tb[0]):
        raise InvalidInputError("t_bounds upper limits below lower limits")
    r_lo = tb[0] / bin_size
    r_hi = tb[1] / bin_size
    ilo = np.ceil(r_lo - 1e-9 * np.maximum(1.0, np.abs(r_lo))).astype(np.int64)
    ihi = np.floor(r_hi + 1e-9 * np.maximum(1.0, np.abs(r_hi))).astype(np.int64)
    if np.any(ihi < ilo):
        raise NoCandidateError("t_bounds contain no bin center on some axis")
    return ilo, ihi


def _data_index_range(x: np.ndarray, y: np.ndarray, bin_size: float):
    """Index range guaranteed to contain every candidate y_j - R x_i for any
    rotation R (|R x| per axis is at most the largest source point norm)."""
    xmax = float(np.linalg.norm(x, axis=1).max())
    lo = y.min(axis=0) - xmax
    hi = y.max(axis=0) + xmax
    ilo = bin_index(lo, bin_size) - 1
    ihi = bin_index(hi, bin_size) + 1
    return ilo, ihi


def _mode_batch(rotations, x, y, bin_size: float, ilo, dims):
    """Histogram mode for a batch of rotations over a fixed bin-index window.

    Returns (counts, flat bin indices, tie counts), one slot per rotation.
    Rotations with no in-bounds vote report count 0 and flat index -1.
    """
    rots = np.ascontiguousarray(rotations, dtype=np.float64).reshape(-1, 3, 3)
    n = x.shape[0]
    m = y.shape[0]
    order = np.argsort(y[:, 0], kind="stable")
    ys = y[order]
    y0 = np.ascontiguousarray(ys[:, 0])
    y1 = np.ascontiguousarray(ys[:, 1])
    y2 = np.ascontiguousarray(ys[:, 2])
    d0, d1, d2 = (int(v) for v in dims)
    l0, l1, l2 = (int(v) for v in ilo)
    nbins = d0 * d1 * d2
    if nbins * max(n, 1) >= _KEY_SPACE_LIMIT:
        raise InvalidInputError(
            "translation lattice too large; pass t_bounds or a larger bin_size"
        )
    nrot = rots.shape[0]
    counts = np.empty(nrot, dtype=np.int64)
    lins = np.empty(nrot, dtype=np.int64)
    ties = np.empty(nrot, dtype=np.int64)
    inv_bin = 1.0 / bin_size
    dense = nbins <= max(65536, min(_DENSE_MAX_BINS, 4 * n * m))
    kernel = _kernels.mode_dense_batch if dense else _kernels.mode_sparse_batch
    kernel(
        rots, x, y0, y1, y2, inv_bin, float(bin_size),
        l0, l1, l2, d0, d1, d2, counts, lins, ties,
    )
    return counts, lins, ties


def _decode_flat(lin: int, ilo, dims):
    d1, d2 = int(dims[1]), int(dims[2])
    a, rem = divmod(int(lin), d1 * d2)
    b, c = divmod(rem, d2)
    return (a + int(ilo[0]), b + int(ilo[1]), c + int(ilo[2]))


def mode_translation(source, reference, rotation, bin_size: float, t_bounds=None) -> ModeResult:
    """Most-voted lattice translation aligning `source` (rotated by `rotation`)
    onto `reference`.

    t_bounds, when given, is a (2, 3) array [per-axis lo; per-axis hi] in
    meters; votes whose bin center falls outside are discarded. Raises
    NoCandidateError when every vote lands out of bounds.
    """
    x = as_point_cloud(source)
    y = as_point_cloud(reference)
    rot = np.asarray(rotation, dtype=np.float64)
    _check_rotation(rot)
    if not (bin_size > 0) or not np.isfinite(bin_size):
        raise InvalidInputError("bin_size must be positive and finite")
    if t_bounds is None:
        ilo, ihi = _data_index_range(x, y, bin_size)
    else:
        ilo, ihi = _bounds_to_index_range(t_bounds, bin_size)
    dims = ihi - ilo + 1
    counts, lins, ties = _mode_batch(rot.reshape(1, 3, 3), x, y, bin_size, ilo, dims)
    if counts[0] <= 0:
        raise NoCandidateError("no translation candidate inside t_bounds")
    idx = _decode_flat(lins[0], ilo, dims)
    return ModeResult(
        t_star=bin_center(idx, bin_size),
        count=int(counts[0]),
        num_tied_bins=int(ties[0]),
        index=idx,
    )


def translation_histogram(
    source, reference, rotation, bin_size: float, t_bounds=None, dedup: bool = True
) -> TranslationHistogram:
    """Full vote map (pure numpy reference path; diagnostic and small-scale use).

    dedup=True counts distinct source indices per bin; dedup=False counts raw
    pair votes.
    """
    x = as_point_cloud(source)
    y = as_point_cloud(reference)
    rot = np.asarray(rotation, dtype=np.float64)
    _check_rotation(rot)
    cand = (y[None, :, :] - (x @ rot.T)[:, None, :]).reshape(-1, 3)
    bins = bin_index(cand, bin_size)
    if t_bounds is not None:
        ilo, ihi = _bounds_to_index_range(t_bounds, bin_size)
        keep = np.all((bins >= ilo) & (bins <= ihi), axis=1)
        bins = bins[keep]
        src = np.repeat(np.arange(x.shape[0]), y.shape[0])[keep]
    else:
        src = np.repeat(np.arange(x.shape[0]), y.shape[0])
    if dedup and bins.shape[0]:
        pairs = np.unique(np.concatenate([bins, src[:, None]], axis=1), axis=0)
        bins = pairs[:, :3]
    if bins.shape[0] == 0:
        return TranslationHistogram(bin_size=float(bin_size), counts={}, total=0, dedup=dedup)
    uniq, cnt = np.unique(bins, axis=0, return_counts=True)
    counts = {tuple(int(v) for v in key): int(c) for key, c in zip(uniq, cnt)}
    return TranslationHistogram(
        bin_size=float(bin_size), counts=counts, total=int(cnt.sum()), dedup=dedup
    )
