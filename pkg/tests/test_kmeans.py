import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fasc.errors import ValidationError
from fasc.kmeans import KMeansConfig, assign, hartigan_refine, kmeans, lloyd, objective


def brute_force_2means(points):
    """Global optimum over every 2-coloring with both colors used."""
    n = len(points)
    best = np.inf
    for bits in itertools.product((0, 1), repeat=n - 1):
        y = np.array((0,) + bits)
        if y.min() == y.max():
            continue
        obj = sum(((points[y == c] - points[y == c].mean(axis=0)) ** 2).sum() for c in (0, 1))
        best = min(best, obj)
    return best


def test_two_points_on_a_line():
    res = kmeans(np.array([[0.0], [10.0]]), KMeansConfig(2))
    assert sorted(res.centers[:, 0].tolist()) == [0.0, 10.0]
    assert res.objective == 0.0


def test_k1_is_the_mean():
    P = np.random.default_rng(0).standard_normal((30, 3))
    res = kmeans(P, KMeansConfig(1))
    assert np.allclose(res.centers[0], P.mean(axis=0))
    assert res.objective == pytest.approx(((P - P.mean(axis=0)) ** 2).sum(), rel=1e-12)


def test_matches_brute_force_n7():
    P = np.random.default_rng(1).standard_normal((7, 2))
    assert kmeans(P, KMeansConfig(2)).objective == pytest.approx(brute_force_2means(P), rel=1e-9)


def test_assign_ties_and_exact_hits():
    centers = np.array([[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
    assert assign(np.array([[0.0, 1.0]]), centers[1:3]).tolist() == [0]  # equidistant -> lowest
    assert assign(np.array([[5.0, 5.0]]), centers).tolist() == [3]


def test_assign_matches_naive_scan():
    rng = np.random.default_rng(2)
    P, C = rng.standard_normal((20, 4)), rng.standard_normal((3, 4))
    naive = []
    for p in P:
        dists = [sum((p[j] - c[j]) ** 2 for j in range(4)) for c in C]
        naive.append(min(range(3), key=lambda i: (dists[i], i)))
    assert assign(P, C).tolist() == naive


def test_assign_dimension_mismatch():
    with pytest.raises(ValidationError):
        assign(np.ones((2, 3)), np.ones((2, 2)))


@pytest.mark.parametrize("kw", [{"K": 0}, {"K": 2, "restarts": 0}, {"K": 2, "max_iters": 0}, {"K": 2, "tol": -1.0}])
def test_config_invariants(kw):
    with pytest.raises(ValidationError):
        KMeansConfig(**kw)


def test_input_errors():
    with pytest.raises(ValidationError, match="K=3"):
        kmeans(np.ones((2, 2)), KMeansConfig(3))
    P = np.ones((4, 2))
    P[0, 0] = np.nan
    with pytest.raises(ValidationError):
        kmeans(P, KMeansConfig(2))


def test_result_self_consistency():
    P = np.random.default_rng(3).standard_normal((80, 3))
    res = kmeans(P, KMeansConfig(4, seed=9))
    assert res.objective == pytest.approx(objective(P, res.labels, res.centers), rel=1e-9)
    assert np.array_equal(res.labels, assign(P, res.centers))
    assert 0 <= res.restart_index < 10 and res.iterations_used >= 1


def test_deterministic():
    P = np.random.default_rng(4).standard_normal((50, 2))
    a, b = kmeans(P, KMeansConfig(3, seed=5)), kmeans(P, KMeansConfig(3, seed=5))
    assert np.array_equal(a.labels, b.labels) and a.objective == b.objective


def test_lloyd_monotone():
    rng = np.random.default_rng(5)
    P = rng.standard_normal((200, 2))
    _, _, _, hist = lloyd(P, P[:5].copy(), 300, 0.0)
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_restart_dominance():
    rng = np.random.default_rng(6)
    P = np.vstack([rng.standard_normal((30, 2)) + c for c in ([0, 0], [3, 0], [0, 3], [3, 3], [6, 6])])
    prev = np.inf
    for R in (1, 2, 5, 10):
        obj = kmeans(P, KMeansConfig(5, restarts=R, seed=0)).objective
        assert obj <= prev
        prev = obj


def test_empty_cluster_reseeded():
    # three distinct points, one far away: a starting center with no members must be revived
    P = np.array([[0.0], [0.1], [100.0]])
    labels, centers, _, _ = lloyd(P, np.array([[0.0], [50.0], [1000.0]]), 50, 0.0)
    assert len(set(labels.tolist())) == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 50.0))
def test_permutation_equivariance_and_scaling(seed, c):
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((25, 2))
    cfg = KMeansConfig(3, restarts=3, seed=seed)
    base = kmeans(P, cfg)
    perm = rng.permutation(25)
    shuffled = kmeans(P[perm], cfg)
    assert np.array_equal(shuffled.labels, base.labels[perm])
    assert shuffled.objective == pytest.approx(base.objective, rel=1e-12)
    scaled = kmeans(c * P, cfg)
    assert np.array_equal(scaled.labels, base.labels)
    assert scaled.objective == pytest.approx(c * c * base.objective, rel=1e-9)


def test_brute_force_small_instances():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(3, 10))
        P = rng.standard_normal((n, 2))
        assert kmeans(P, KMeansConfig(2)).objective == pytest.approx(brute_force_2means(P), rel=1e-9)


def test_hartigan_never_worsens_and_is_stable():
    rng = np.random.default_rng(8)
    for _ in range(20):
        P = rng.standard_normal((15, 2))
        y0 = rng.integers(0, 3, 15)
        y0[:3] = [0, 1, 2]
        C0 = np.array([P[y0 == k].mean(axis=0) for k in range(3)])
        y, C = hartigan_refine(P, y0, 3)
        assert objective(P, y, C) <= objective(P, y0, C0) + 1e-12
        counts = np.bincount(y, minlength=3)
        for i, x in enumerate(P):
            a = y[i]
            if counts[a] > 1:
                stay = counts[a] / (counts[a] - 1) * np.sum((x - C[a]) ** 2)
                for b in range(3):
                    if b != a:
                        assert counts[b] / (counts[b] + 1) * np.sum((x - C[b]) ** 2) >= stay * (1 - 1e-9)
