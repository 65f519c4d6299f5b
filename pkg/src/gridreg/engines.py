"""Grid-search registration engines.

Two engines over the same pose discretization:

* ``exhaustive_search``: brute force over the full 6-D grid of
  (2*k_rot+1)^3 rotations x (2*k_trans+1)^3 translations; the optimality
  oracle. Cost grows like O(K^6 * M * N), hence the pose-count safety cap.
* ``dses`` (direct semi-exhaustive search): exhaustive over the rotation grid
  only; for each rotation the best translation comes from the vote histogram
  (see mode_search), then the highest-vote candidates are re-scored under the
  configured metric and the minimum-error pose wins.

With the saturated-L0 metric at the histogram bin size the re-scoring pass is
redundant (the top-vote candidate already maximizes the inlier count), so
``dses`` skips it.

Both engines obey one tie-break rule everywhere: lexicographically smallest
grid coordinates (rotation index triple, then translation), making results
reproducible across runs and thread counts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import InvalidInputError, NoCandidateError, SearchSpaceTooLargeError
from .geometry import RigidTransform, as_point_cloud, build_rotation_grid
from .metrics import ErrorMetric, alignment_error, count_inliers
from .mode_search import _decode_flat, _mode_batch, bin_center, bin_index

__all__ = [
    "SearchConfig",
    "PoseCandidate",
    "RegistrationResult",
    "exhaustive_search",
    "dses",
    "refine_candidates",
]

DEFAULT_POSE_CAP = 100_000_000

# integer counts compared against q * M_star: the epsilon forgives the
# half-ulp inflation of products like 0.3 * 10
_CUTOFF_EPS = 1e-9


@dataclass(frozen=True)
class SearchConfig:
    """Pose-grid geometry plus refinement policy.

    k_rot / rot_step: rotation grid half-width (steps) and step (radians).
    k_trans / trans_bin: translation half-width (bins) and bin size (meters).
    q: refinement keeps candidates with vote count >= q * best count.
    metric: refinement metric; defaults to truncated L1 at 5 * trans_bin.
    center: optional initial-guess pose; the rotation grid multiplies its
    rotation on the left and translation bins are taken around its
    translation's bin.
    """

    k_rot: int
    rot_step: float
    k_trans: int
    trans_bin: float
    q: float = 0.5
    metric: ErrorMetric | None = None
    center: RigidTransform | None = None
    pose_cap: int = DEFAULT_POSE_CAP

    def __post_init__(self):
        for name in ("k_rot", "k_trans"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise InvalidInputError(f"{name} must be a non-negative integer")
            object.__setattr__(self, name, int(v))
        for name in ("rot_step", "trans_bin"):
            v = float(getattr(self, name))
            if not (v > 0) or not math.isfinite(v):
                raise InvalidInputError(f"{name} must be positive and finite")
            object.__setattr__(self, name, v)
        if not (0.0 < self.q <= 1.0):
            raise InvalidInputError("q must lie in (0, 1]")
        if self.metric is None:
            object.__setattr__(self, "metric", ErrorMetric.truncated_l1(5.0 * self.trans_bin))
        if self.pose_cap < 1:
            raise InvalidInputError("pose_cap must be positive")

    @property
    def rotation_count(self) -> int:
        return (2 * self.k_rot + 1) ** 3

    @property
    def translation_count(self) -> int:
        return (2 * self.k_trans + 1) ** 3


@dataclass(frozen=True)
class PoseCandidate:
    """One rotation's best-vote pose: transform, vote count, optional refined error."""

    transform: RigidTransform
    inlier_count: int
    refined_error: float | None = None


@dataclass(frozen=True)
class RegistrationResult:
    best: RigidTransform
    best_error: float
    best_inliers: int
    candidates_evaluated: int
    candidates_refined: int
    elapsed: dict


def _prepare(x, y, cfg: SearchConfig):
    grid = build_rotation_grid(cfg.k_rot, cfg.rot_step)
    if cfg.center is not None:
        rots = np.ascontiguousarray(
            np.einsum("ab,lbc->lac", cfg.center.rotation, grid.matrices)
        )
        t_center = cfg.center.translation
    else:
        rots = grid.matrices
        t_center = np.zeros(3)
    return grid, rots, t_center


def _sorted_ref_columns(y):
    order = np.argsort(y[:, 0], kind="stable")
    ys = y[order]
    return (
        np.ascontiguousarray(ys[:, 0]),
        np.ascontiguousarray(ys[:, 1]),
        np.ascontiguousarray(ys[:, 2]),
    )


def _score_poses(rot_stack, t_stack, x, y, metric: ErrorMetric) -> np.ndarray:
    """Alignment error for a stack of poses (deterministic slot-per-pose kernel)."""
    y0, y1, y2 = _sorted_ref_columns(y)
    code, param = metric._code_param()
    out = np.empty(rot_stack.shape[0])
    _kernels.refine_batch(
        np.ascontiguousarray(rot_stack),
        np.ascontiguousarray(t_stack),
        x, y0, y1, y2, code, param, out,
    )
    return out


def exhaustive_search(source, reference, cfg: SearchConfig) -> RegistrationResult:
    """Evaluate the metric at every pose of the 6-D grid; return the minimizer."""
    t0 = time.perf_counter()
    x = as_point_cloud(source)
    y = as_point_cloud(reference)
    total_poses = cfg.rotation_count * cfg.translation_count
    if total_poses > cfg.pose_cap:
        raise SearchSpaceTooLargeError(
            f"{total_poses} poses exceed the cap of {cfg.pose_cap}; exhaustive "
            f"search cost grows as O(K_rot^3 * K_trans^3 * M * N)"
        )
    grid, rots, t_center = _prepare(x, y, cfg)
    side = np.arange(-cfg.k_trans, cfg.k_trans + 1, dtype=np.int64).astype(np.float64)
    tvals = [t_center[a] + side * cfg.trans_bin for a in range(3)]
    y0, y1, y2 = _sorted_ref_columns(y)
    code, param = cfg.metric._code_param()
    errs = np.empty(rots.shape[0])
    tflat = np.empty(rots.shape[0], dtype=np.int64)
    _kernels.exhaustive_batch(
        rots, x, y0, y1, y2, tvals[0], tvals[1], tvals[2], code, param, errs, tflat,
    )
    r_best = int(np.argmin(errs))  # first minimum = lexicographically smallest rotation
    nt = 2 * cfg.k_trans + 1
    a, rem = divmod(int(tflat[r_best]), nt * nt)
    b, c = divmod(rem, nt)
    t_best = np.array([tvals[0][a], tvals[1][b], tvals[2][c]])
    best = RigidTransform(rots[r_best], t_best, grid_coords=tuple(grid.indices[r_best]))
    err = alignment_error(x, y, best, cfg.metric)
    inl = count_inliers(x, y, best, cfg.trans_bin)
    total = time.perf_counter() - t0
    return RegistrationResult(
        best=best,
        best_error=err,
        best_inliers=inl,
        candidates_evaluated=total_poses,
        candidates_refined=0,
        elapsed={"search": total, "total": total},
    )


def _refine_cutoff(counts_desc, q: float) -> int:
    """Length of the scored prefix: all entries >= q * best, never less than 1."""
    mstar = counts_desc[0]
    cutoff = q * mstar - _CUTOFF_EPS
    n = int(np.searchsorted(-np.asarray(counts_desc, dtype=np.float64), -cutoff, side="right"))
    return max(1, n)


def refine_candidates(candidates, source, reference, metric: ErrorMetric, q: float):
    """Re-score the high-vote prefix of a count-sorted candidate list.

    Candidates must arrive sorted by inlier_count descending. Exactly those
    with inlier_count >= q * best count (always at least the first) get
    refined_error set; the rest are returned untouched.
    """
    if not candidates:
        raise InvalidInputError("candidate list is empty")
    if not (0.0 < q <= 1.0):
        raise InvalidInputError("q must lie in (0, 1]")
    counts = [c.inlier_count for c in candidates]
    if any(counts[i] < counts[i + 1] for i in range(len(counts) - 1)):
        raise InvalidInputError("candidates must be sorted by inlier_count descending")
    x = as_point_cloud(source)
    y = as_point_cloud(reference)
    n_score = _refine_cutoff(counts, q)
    rot_stack = np.stack([c.transform.rotation for c in candidates[:n_score]])
    t_stack = np.stack([c.transform.translation for c in candidates[:n_score]])
    errs = _score_poses(rot_stack, t_stack, x, y, metric)
    out = [replace(c, refined_error=float(e)) for c, e in zip(candidates[:n_score], errs)]
    out.extend(candidates[n_score:])
    return out


def dses(source, reference, cfg: SearchConfig) -> RegistrationResult:
    """Direct semi-exhaustive search.

    Phase 1: per grid rotation, histogram vote for the best translation.
    Phase 2: order candidates by vote count (descending; ties keep rotation
    grid order, which is lexicographic).
    Phase 3: re-score the prefix with vote count >= q * best under the
    configured metric; return the minimum-error pose. Skipped when the metric
    is saturated-L0 at exactly the histogram bin size, where the top-vote
    candidate is already optimal.
    """
    t0 = time.perf_counter()
    x = as_point_cloud(source)
    y = as_point_cloud(reference)
    if cfg.rotation_count > cfg.pose_cap:
        raise SearchSpaceTooLargeError(
            f"{cfg.rotation_count} rotations exceed the cap of {cfg.pose_cap}"
        )
    grid, rots, t_center = _prepare(x, y, cfg)
    cbin = bin_index(t_center, cfg.trans_bin)
    ilo = cbin - cfg.k_trans
    dims = np.full(3, 2 * cfg.k_trans + 1, dtype=np.int64)
    counts, lins, ties = _mode_batch(rots, x, y, cfg.trans_bin, ilo, dims)
    t_phase1 = time.perf_counter()

    valid = np.flatnonzero(counts > 0)
    if valid.size == 0:
        raise NoCandidateError(
            "no rotation produced an in-bounds translation vote; widen k_trans "
            "or move the search center"
        )
    # stable sort keeps rotation-grid (lexicographic) order among tied counts
    order = valid[np.argsort(-counts[valid], kind="stable")]
    mstar = int(counts[order[0]])
    t_sort = time.perf_counter()

    skip_refine = cfg.metric.kind == "sat_l0" and cfg.metric.param == cfg.trans_bin
    if skip_refine:
        winner_row = int(order[0])
        n_score = 0
    else:
        n_score = _refine_cutoff(counts[order].astype(np.float64), cfg.q)
        rows = order[:n_score]
        t_stack = np.empty((n_score, 3))
        for k, r in enumerate(rows):
            t_stack[k] = bin_center(_decode_flat(lins[r], ilo, dims), cfg.trans_bin)
        errs = _score_poses(rots[rows], t_stack, x, y, cfg.metric)
        emin = errs.min()
        tied = np.flatnonzero(errs == emin)
        # lexicographic grid order among tied errors
        winner_pos = min(tied, key=lambda p: tuple(grid.indices[rows[p]]))
        winner_row = int(rows[winner_pos])

    t_win = bin_center(_decode_flat(lins[winner_row], ilo, dims), cfg.trans_bin)
    best = RigidTransform(
        rots[winner_row], t_win, grid_coords=tuple(grid.indices[winner_row])
    )
    err = alignment_error(x, y, best, cfg.metric)
    inl = count_inliers(x, y, best, cfg.trans_bin)
    t_end = time.perf_counter()
    return RegistrationResult(
        best=best,
        best_error=err,
        best_inliers=inl,
        candidates_evaluated=int(valid.size),
        candidates_refined=int(n_score),
        elapsed={
            "phase1": t_phase1 - t0,
            "sort": t_sort - t_phase1,
            "refine": t_end - t_sort,
            "total": t_end - t0,
        },
    )
