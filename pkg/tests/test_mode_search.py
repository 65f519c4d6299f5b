import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gridreg.errors import InvalidInputError, NoCandidateError
from gridreg.geometry import random_rotation, rotation_from_euler
from gridreg.mode_search import (
    TranslationHistogram,
    bin_center,
    bin_index,
    mode_translation,
    translation_histogram,
)

# ---------------------------------------------------------------------------
# Dict-based oracle. Pure python loops, no shared code with the library.
# ---------------------------------------------------------------------------


def ref_bin(v, b):
    out = []
    for c in v:
        q = float(c) / b
        out.append(int(math.copysign(math.floor(abs(q) + 0.5), q)))
    return tuple(out)


def ref_votes(x, y, rot, b, t_bounds=None):
    """List of (bin index, source index) votes, bounds applied on bin centers."""
    votes = []
    for i, xi in enumerate(np.asarray(x, dtype=float)):
        rx = np.asarray(rot, dtype=float) @ xi
        for yj in np.asarray(y, dtype=float):
            idx = ref_bin(yj - rx, b)
            if t_bounds is not None:
                lo, hi = np.asarray(t_bounds, dtype=float)
                center = np.array(idx, dtype=float) * b
                if np.any(center < lo) or np.any(center > hi):
                    continue
            votes.append((idx, i))
    return votes


def ref_histogram(x, y, rot, b, dedup=True, t_bounds=None):
    votes = ref_votes(x, y, rot, b, t_bounds)
    counts = {}
    if dedup:
        seen = set()
        for idx, i in votes:
            if (idx, i) not in seen:
                seen.add((idx, i))
                counts[idx] = counts.get(idx, 0) + 1
    else:
        for idx, _ in votes:
            counts[idx] = counts.get(idx, 0) + 1
    return counts


def ref_mode(counts):
    best = max(counts.values())
    winners = sorted(k for k, c in counts.items() if c == best)
    return winners[0], best, len(winners)


def cloud(rng, n, lo=-1.0, hi=1.0):
    return rng.uniform(lo, hi, (n, 3))


class TestBinIndex:
    def test_worked_examples(self):
        assert tuple(bin_index((0.04, -0.04, 0.0), 0.1)) == (0, 0, 0)
        assert tuple(bin_index((0.05, 0.0, 0.0), 0.1)) == (1, 0, 0)
        assert tuple(bin_index((0.26, -0.31, 0.74), 0.1)) == (3, -3, 7)

    def test_half_rounds_away_from_zero(self):
        assert tuple(bin_index((1.5, -1.5, 2.5), 1.0)) == (2, -2, 3)
        assert tuple(bin_index((-0.05, 0.0, 0.0), 0.1)) == (-1, 0, 0)

    def test_vectorized_shape(self):
        out = bin_index(np.zeros((7, 3)), 0.25)
        assert out.shape == (7, 3) and out.dtype == np.int64

    def test_center_roundtrip(self):
        rng = np.random.default_rng(0)
        idx = rng.integers(-50, 50, (100, 3))
        for b in (0.25, 0.1, 0.025):
            centers = bin_center(idx, b)
            assert np.array_equal(bin_index(centers, b), idx)

    def test_center_is_exact_multiple(self):
        assert np.array_equal(bin_center((2, -3, 1), 0.25), [0.5, -0.75, 0.25])

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            bin_index((0.0, 0.0, 0.0), 0.0)
        with pytest.raises(InvalidInputError):
            bin_index((0.0, 0.0, 0.0), -0.1)
        with pytest.raises(InvalidInputError):
            bin_index((np.nan, 0.0, 0.0), 0.1)

    def test_matches_reference_on_random_input(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            v = rng.uniform(-3, 3, 3)
            b = float(rng.uniform(0.05, 0.5))
            q = np.abs(v / b)
            if np.any(np.abs(q - np.floor(q) - 0.5) < 1e-9):
                continue
            assert tuple(bin_index(v, b)) == ref_bin(v, b)


class TestModeExamples:
    def test_single_pair(self):
        res = mode_translation([[0.0, 0.0, 0.0]], [[1.0, 2.0, 3.0]], np.eye(3), 0.5)
        assert np.array_equal(res.t_star, [1.0, 2.0, 3.0])
        assert res.count == 1
        assert res.index == (2, 4, 6)

    def test_cube_corners_identity(self):
        corners = np.array(
            [[i, j, k] for i in (0.0, 1.0) for j in (0.0, 1.0) for k in (0.0, 1.0)]
        )
        res = mode_translation(corners, corners, np.eye(3), 0.1)
        assert np.array_equal(res.t_star, [0.0, 0.0, 0.0])
        assert res.count == 8
        assert res.num_tied_bins == 1

    def test_six_point_exact_match(self):
        rng = np.random.default_rng(5)
        x = cloud(rng, 6, -2, 2)
        # keep pairwise gaps well over a bin so cross votes cannot pile up
        while np.min(
            np.linalg.norm(x[:, None] - x[None, :], axis=2) + np.eye(6) * 99
        ) < 1.0:
            x = cloud(rng, 6, -2, 2)
        t_true = bin_center((2, -3, 1), 0.25)
        res = mode_translation(x, x + t_true, np.eye(3), 0.25)
        assert np.array_equal(res.t_star, t_true)
        assert res.count == 6

    def test_lex_tiebreak(self):
        res = mode_translation(
            [[0.0, 0.0, 0.0]], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], np.eye(3), 0.5
        )
        assert res.num_tied_bins == 2
        assert res.index == (0, 2, 0)
        assert np.array_equal(res.t_star, [0.0, 1.0, 0.0])

    def test_rotation_is_applied(self):
        rot = rotation_from_euler((0.0, 0.0, math.pi / 2))
        # Rz(90) sends (1,0,0) to (0,1,0); the lone vote is y - R x
        res = mode_translation([[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.5]], rot, 0.25)
        assert np.allclose(res.t_star, [0.0, 0.0, 0.5], atol=1e-12)

    def test_dedup_single_source_counts_once(self):
        x = [[0.0, 0.0, 0.0]]
        y = [[1.0, 0.0, 0.0], [1.01, 0.0, 0.0]]
        res = mode_translation(x, y, np.eye(3), 0.1)
        assert res.count == 1
        hist_raw = translation_histogram(x, y, np.eye(3), 0.1, dedup=False)
        assert hist_raw.counts[(10, 0, 0)] == 2
        hist = translation_histogram(x, y, np.eye(3), 0.1)
        assert hist.counts[(10, 0, 0)] == 1


class TestHistogram:
    def test_raw_total_is_pair_count(self):
        rng = np.random.default_rng(2)
        x, y = cloud(rng, 9), cloud(rng, 13)
        hist = translation_histogram(x, y, np.eye(3), 0.2, dedup=False)
        assert hist.total == 9 * 13
        assert sum(hist.counts.values()) == hist.total

    def test_dedup_total_bounded(self):
        rng = np.random.default_rng(3)
        x, y = cloud(rng, 9), cloud(rng, 13)
        hist = translation_histogram(x, y, np.eye(3), 0.2)
        assert hist.total <= 9 * 13
        assert all(1 <= c <= 9 for c in hist.counts.values())

    def test_matches_dict_oracle(self):
        rng = np.random.default_rng(4)
        for trial in range(8):
            x, y = cloud(rng, 7), cloud(rng, 8)
            rot = random_rotation(rng)
            b = 0.17
            for dedup in (True, False):
                got = translation_histogram(x, y, rot, b, dedup=dedup)
                assert got.counts == ref_histogram(x, y, rot, b, dedup=dedup)

    def test_mode_agrees_with_histogram(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            x, y = cloud(rng, 10), cloud(rng, 12)
            rot = random_rotation(rng)
            res = mode_translation(x, y, rot, 0.3)
            hist_mode = translation_histogram(x, y, rot, 0.3).mode()
            assert res.index == hist_mode.index
            assert res.count == hist_mode.count
            assert res.num_tied_bins == hist_mode.num_tied_bins
            assert np.array_equal(res.t_star, hist_mode.t_star)

    def test_empty_mode_raises(self):
        hist = TranslationHistogram(bin_size=0.1, counts={}, total=0, dedup=True)
        with pytest.raises(NoCandidateError):
            hist.mode()


class TestBounds:
    def test_bounds_restrict_search(self):
        rng = np.random.default_rng(7)
        x = cloud(rng, 6)
        t_true = bin_center((4, 0, 0), 0.25)
        y = np.concatenate([x + t_true, cloud(rng, 4) + 10.0])
        free = mode_translation(x, y, np.eye(3), 0.25)
        assert np.array_equal(free.t_star, t_true)
        # window around the far clutter excludes the true cluster
        bounded = mode_translation(
            x, y, np.eye(3), 0.25, t_bounds=[[8.0, 8.0, 8.0], [14.0, 14.0, 14.0]]
        )
        assert np.all(bounded.t_star >= 8.0)
        counts = ref_histogram(x, y, np.eye(3), 0.25,
                               t_bounds=[[8.0, 8.0, 8.0], [14.0, 14.0, 14.0]])
        idx, best, _ = ref_mode(counts)
        assert bounded.count == best

    def test_all_votes_out_of_bounds(self):
        with pytest.raises(NoCandidateError):
            mode_translation(
                [[0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]], np.eye(3), 0.1,
                t_bounds=[[5.0, 5.0, 5.0], [6.0, 6.0, 6.0]],
            )

    def test_bounds_validation(self):
        x = [[0.0, 0.0, 0.0]]
        with pytest.raises(InvalidInputError):
            mode_translation(x, x, np.eye(3), 0.1, t_bounds=[[0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(InvalidInputError):
            mode_translation(
                x, x, np.eye(3), 0.1, t_bounds=[[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]
            )

    def test_window_with_no_center_raises(self):
        x = [[0.0, 0.0, 0.0]]
        with pytest.raises(NoCandidateError):
            mode_translation(
                x, x, np.eye(3), 1.0,
                t_bounds=[[0.2, 0.2, 0.2], [0.4, 0.4, 0.4]],
            )

    def test_exact_multiple_bounds_are_inclusive(self):
        # lo == hi == a bin center must keep that single bin admissible
        res = mode_translation(
            [[0.0, 0.0, 0.0]], [[0.5, 0.0, 0.0]], np.eye(3), 0.25,
            t_bounds=[[0.5, 0.0, 0.0], [0.5, 0.0, 0.0]],
        )
        assert res.index == (2, 0, 0)

    def test_histogram_bounds_match_oracle(self):
        rng = np.random.default_rng(8)
        x, y = cloud(rng, 8), cloud(rng, 9)
        tb = [[-0.6, -0.6, -0.6], [0.9, 0.9, 0.9]]
        got = translation_histogram(x, y, np.eye(3), 0.22, t_bounds=tb)
        assert got.counts == ref_histogram(x, y, np.eye(3), 0.22, t_bounds=tb)


class TestDenseSparseAgreement:
    def test_same_mode_under_forced_sparse(self):
        rng = np.random.default_rng(9)
        x, y = cloud(rng, 12), cloud(rng, 12)
        narrow = mode_translation(
            x, y, np.eye(3), 0.2, t_bounds=[[-3.0, -3.0, -3.0], [3.0, 3.0, 3.0]]
        )
        # 101^3 bins exceed the dense cap for tiny clouds, forcing the sort path
        wide = mode_translation(
            x, y, np.eye(3), 0.2, t_bounds=[[-10.0, -10.0, -10.0], [10.0, 10.0, 10.0]]
        )
        assert wide.index == narrow.index
        assert wide.count == narrow.count
        assert wide.num_tied_bins == narrow.num_tied_bins

    def test_sparse_matches_oracle(self):
        rng = np.random.default_rng(10)
        x, y = cloud(rng, 10), cloud(rng, 11)
        tb = [[-60.0, -60.0, -60.0], [60.0, 60.0, 60.0]]
        res = mode_translation(x, y, np.eye(3), 0.25, t_bounds=tb)
        idx, best, ties = ref_mode(ref_histogram(x, y, np.eye(3), 0.25))
        assert res.index == idx
        assert res.count == best
        assert res.num_tied_bins == ties


class TestInvariances:
    def test_translation_equivariance(self):
        rng = np.random.default_rng(11)
        x, y = cloud(rng, 9), cloud(rng, 9)
        b = 0.25
        base = mode_translation(x, y, np.eye(3), b)
        shift_idx = np.array([3, -2, 5])
        shifted = mode_translation(x, y + bin_center(shift_idx, b), np.eye(3), b)
        assert shifted.index == tuple(np.array(base.index) + shift_idx)
        assert shifted.count == base.count

    def test_result_is_exact_bin_multiple(self):
        rng = np.random.default_rng(12)
        for b in (0.25, 0.1, 0.07):
            x, y = cloud(rng, 8), cloud(rng, 8)
            res = mode_translation(x, y, np.eye(3), b)
            assert np.array_equal(res.t_star, bin_center(res.index, b))

    def test_count_within_bounds(self):
        rng = np.random.default_rng(13)
        x, y = cloud(rng, 14), cloud(rng, 10)
        res = mode_translation(x, y, np.eye(3), 0.4)
        assert 1 <= res.count <= 14

    def test_input_validation(self):
        x = [[0.0, 0.0, 0.0]]
        with pytest.raises(InvalidInputError):
            mode_translation(x, x, np.eye(3) * 2.0, 0.1)
        with pytest.raises(InvalidInputError):
            mode_translation(x, x, np.eye(3), 0.0)

    def test_pathological_lattice_rejected(self):
        rng = np.random.default_rng(14)
        x, y = cloud(rng, 4), cloud(rng, 4)
        with pytest.raises(InvalidInputError):
            mode_translation(x, y, np.eye(3), 1e-9)


fin = st.floats(-1.5, 1.5, allow_nan=False, width=64)
small_cloud = st.lists(st.tuples(fin, fin, fin), min_size=1, max_size=6).map(np.array)


@settings(max_examples=60, deadline=None)
@given(small_cloud, small_cloud)
def test_property_mode_matches_oracle(x, y):
    b = 0.2
    q = (y[None, :, :] - x[:, None, :]).reshape(-1, 3) / b
    assume(np.all(np.abs(np.abs(q - np.round(q)) - 0.5) > 1e-7))
    res = mode_translation(x, y, np.eye(3), b)
    idx, best, ties = ref_mode(ref_histogram(x, y, np.eye(3), b))
    assert res.index == idx
    assert res.count == best
    assert res.num_tied_bins == ties
