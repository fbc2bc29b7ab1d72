from __future__ import annotations

import itertools

import numpy as np
import pytest

from clustem.cluster import MergeStep, agglomerate, kmeans, ward_merge
from clustem.errors import InputError


def set_partitions(items, k):
    """All partitions of ``items`` into exactly k non-empty blocks."""
    if k == 1:
        yield [list(items)]
        return
    if len(items) == k:
        yield [[x] for x in items]
        return
    head, rest = items[0], items[1:]
    for smaller in set_partitions(rest, k - 1):
        yield [[head]] + [list(b) for b in smaller]
    for smaller in set_partitions(rest, k):
        for i in range(len(smaller)):
            yield [b + [head] if i == j else list(b) for j, b in enumerate(smaller)]


def brute_force_inertia(points: np.ndarray, k: int) -> float:
    best = np.inf
    for blocks in set_partitions(list(range(len(points))), k):
        total = 0.0
        for block in blocks:
            sub = points[block]
            total += ((sub - sub.mean(axis=0)) ** 2).sum()
        best = min(best, total)
    return float(best)


def lance_williams_ward(points: np.ndarray) -> list[tuple[int, int]]:
    """Independent greedy Ward sequence via the Lance-Williams recursion."""
    n = len(points)
    sizes = [1] * n
    dist = {}
    for i, j in itertools.combinations(range(n), 2):
        dist[(i, j)] = float(((points[i] - points[j]) ** 2).sum()) / 2.0
    merges = []
    while len(sizes) > 1:
        (i, j) = min(dist, key=lambda p: (dist[p], p))
        merges.append((i, j))
        si, sj = sizes[i], sizes[j]
        new_dist = {}
        for a, b in dist:
            if j in (a, b):
                continue
            if i in (a, b):
                c = b if a == i else a
                d_ic = dist[(min(i, c), max(i, c))]
                d_jc = dist[(min(j, c), max(j, c))]
                d_ij = dist[(i, j)]
                sc = sizes[c]
                merged = (
                    (si + sc) * d_ic + (sj + sc) * d_jc - sc * d_ij
                ) / (si + sj + sc)
                cc = c - 1 if c > j else c
                new_dist[(min(i, cc), max(i, cc))] = merged
            else:
                aa = a - 1 if a > j else a
                bb = b - 1 if b > j else b
                new_dist[(min(aa, bb), max(aa, bb))] = dist[(a, b)]
        sizes[i] = si + sj
        del sizes[j]
        dist = new_dist
    return merges


class TestKmeans:
    def test_each_point_its_own_center(self):
        pts = np.array([[0.0], [3.0], [7.0]])
        res = kmeans(pts, 3, seed=0)
        assert res.inertia == 0.0
        assert sorted(res.centers.ravel()) == [0.0, 3.0, 7.0]

    def test_single_cluster_is_the_mean(self):
        pts = np.array([[0.0, 0.0], [2.0, 4.0], [4.0, 2.0]])
        res = kmeans(pts, 1, seed=0)
        assert np.allclose(res.centers, [[2.0, 2.0]])
        assert set(res.labels) == {0}

    def test_two_separated_pairs(self):
        pts = np.array([[0.0], [1.0], [10.0], [11.0]])
        res = kmeans(pts, 2, seed=0)
        assert abs(res.inertia - brute_force_inertia(pts, 2)) < 1e-9
        assert res.labels[0] == res.labels[1] != res.labels[2] == res.labels[3]
        assert sorted(res.centers.ravel()) == [0.5, 10.5]

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_matches_brute_force_on_small_sets(self, k):
        rng = np.random.default_rng(77)
        pts = rng.normal(size=(7, 2))
        res = kmeans(pts, k, seed=5)
        assert abs(res.inertia - brute_force_inertia(pts, k)) < 1e-9

    def test_inertia_matches_definition(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(20, 3))
        res = kmeans(pts, 4, seed=9)
        recomputed = ((pts - res.centers[res.labels]) ** 2).sum()
        assert abs(res.inertia - recomputed) < 1e-12

    def test_labels_are_argmin_at_convergence(self):
        rng = np.random.default_rng(4)
        pts = rng.normal(size=(30, 2))
        res = kmeans(pts, 5, seed=1)
        dists = ((pts[:, None, :] - res.centers[None, :, :]) ** 2).sum(axis=2)
        best = dists.min(axis=1)
        chosen = dists[np.arange(len(pts)), res.labels]
        assert np.allclose(chosen, best)

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(size=(25, 4))
        a = kmeans(pts, 3, seed=42)
        b = kmeans(pts, 3, seed=42)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.centers, b.centers)
        assert a.inertia == b.inertia

    def test_duplicate_points_still_fill_every_cluster(self):
        pts = np.array([[0.0, 0.0]] * 3 + [[10.0, 0.0]])
        res = kmeans(pts, 3, seed=0)
        assert len(set(res.labels.tolist())) == 3

    def test_argument_errors(self):
        pts = np.array([[0.0], [1.0]])
        with pytest.raises(InputError):
            kmeans(pts, 3, seed=0)
        with pytest.raises(InputError):
            kmeans(pts, 0, seed=0)
        with pytest.raises(InputError):
            kmeans([[0.0], [1.0, 2.0]], 1, seed=0)  # ragged input


class TestWardMerge:
    def test_singletons_cost_half_squared_distance(self):
        step = ward_merge(np.array([[0.0], [3.0]]), [1, 1])
        assert step == MergeStep(0, 1, 4.5)

    def test_three_singletons(self):
        step = ward_merge(np.array([[0.0], [1.0], [10.0]]), [1, 1, 1])
        assert step == MergeStep(0, 1, 0.5)

    def test_identical_points_cost_zero(self):
        step = ward_merge(np.array([[2.0, 2.0], [2.0, 2.0]]), [3, 5])
        assert step.delta == 0.0

    def test_weights_enter_the_cost(self):
        # |A||B|/(|A|+|B|) * d^2 with |A|=2, |B|=1, d=3.
        step = ward_merge(np.array([[0.0], [3.0]]), [2, 1])
        assert step.delta == pytest.approx(2 / 3 * 9.0)

    def test_requires_two_clusters(self):
        with pytest.raises(InputError):
            ward_merge(np.array([[0.0]]), [1])


class TestAgglomerate:
    def test_single_point(self):
        assert agglomerate(np.array([[1.0]])) == []

    def test_two_points(self):
        steps = agglomerate(np.array([[0.0], [2.0]]))
        assert steps == [MergeStep(0, 1, 2.0)]

    def test_collinear_pairs_merge_first(self):
        steps = agglomerate(np.array([[0.0], [1.0], [10.0], [11.0]]))
        assert [(s.left, s.right) for s in steps] == [(0, 1), (1, 2), (0, 1)]
        assert steps[0].delta == 0.5
        assert steps[1].delta == 0.5
        assert steps[2].delta == pytest.approx(100.0)

    @pytest.mark.parametrize("n", [3, 5, 8, 10])
    def test_matches_lance_williams_recursion(self, n):
        rng = np.random.default_rng(n)
        pts = rng.normal(size=(n, 3))
        steps = agglomerate(pts)
        assert [(s.left, s.right) for s in steps] == lance_williams_ward(pts)

    def test_deltas_match_lance_williams_values(self):
        rng = np.random.default_rng(123)
        pts = rng.normal(size=(6, 2))
        ours = agglomerate(pts)
        pairs = lance_williams_ward(pts)
        assert [(s.left, s.right) for s in ours] == pairs
        assert all(s.delta >= 0 for s in ours)
