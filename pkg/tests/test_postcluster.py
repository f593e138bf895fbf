import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmscreen.errors import ConfigurationError
from mmscreen.postcluster import adjusted_rand, cluster_selected, hamming_error, kmeans, pca_scores


def brute_hamming(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    K = int(max(pred.max(), truth.max())) + 1
    best = len(pred)
    for perm in itertools.permutations(range(K)):
        best = min(best, int(np.sum(pred != np.array(perm)[truth])))
    return best / len(pred)


def brute_ari(pred, truth):
    """Pair-counting ARI straight from the definition."""
    n = len(pred)
    pairs = list(itertools.combinations(range(n), 2))
    same_p = np.array([pred[i] == pred[j] for i, j in pairs])
    same_t = np.array([truth[i] == truth[j] for i, j in pairs])
    index = np.sum(same_p & same_t)
    a, b = same_p.sum(), same_t.sum()
    expected = a * b / len(pairs)
    return (index - expected) / (0.5 * (a + b) - expected)


def test_pca_rank_one():
    rng = np.random.default_rng(0)
    X = np.outer(rng.normal(size=20), rng.normal(size=5))
    S = pca_scores(X, 5)
    sv = np.linalg.norm(S, axis=0)
    assert np.all(sv[1:] <= 1e-10 * sv[0])


def test_pca_matches_dense_oracle():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 4))
    Xc = X - X.mean(axis=0)
    # eigen-decomposition of the covariance as an independent route
    w, V = np.linalg.eigh(Xc.T @ Xc)
    V = V[:, np.argsort(w)[::-1]]
    V = V * np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(4)])
    np.testing.assert_allclose(pca_scores(X, 4), Xc @ V, atol=1e-8)


def test_pca_rotation_invariance():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 5)) * [5, 3, 2, 1, 0.5]
    Q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    a, b = pca_scores(X, 3), pca_scores(X @ Q, 3)
    np.testing.assert_allclose(np.abs(a), np.abs(b), atol=1e-8)


def test_pca_reduces_d():
    X = np.random.default_rng(3).normal(size=(4, 7))
    assert pca_scores(X, 10).shape == (4, 3)
    with pytest.raises(ConfigurationError):
        pca_scores(np.ones((1, 3)), 2)


def test_kmeans_k_equals_n():
    X = np.random.default_rng(4).normal(size=(7, 2))
    res = kmeans(X, 7, seed=1)
    assert res.inertia == 0.0
    assert len(set(res.labels.tolist())) == 7


def test_kmeans_two_blobs():
    rng = np.random.default_rng(5)
    X = np.vstack([rng.normal(0, 0.3, size=(40, 2)), rng.normal(10, 0.3, size=(40, 2))])
    truth = np.r_[np.zeros(40, int), np.ones(40, int)]
    res = kmeans(X, 2, seed=2)
    assert hamming_error(res.labels, truth) == 0.0


def test_kmeans_errors():
    with pytest.raises(ConfigurationError):
        kmeans(np.zeros((3, 2)), 4)


def test_kmeans_inertia_recomputable_and_monotone():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(60, 3))
    res = kmeans(X, 4, seed=3)
    d2 = ((X - res.centers[res.labels]) ** 2).sum()
    assert res.inertia == pytest.approx(d2, rel=1e-12)
    tr = np.array(res.inertia_trace)
    assert np.all(np.diff(tr) <= 1e-12 * tr[:-1])


def test_kmeans_deterministic_over_threads():
    X = np.random.default_rng(7).normal(size=(50, 2))
    a, b = kmeans(X, 3, seed=4, threads=1), kmeans(X, 3, seed=4, threads=4)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.inertia == b.inertia and a.restart == b.restart


def test_kmeans_matches_exhaustive_enumeration():
    rng = np.random.default_rng(8)
    X = np.vstack([rng.normal(c, 0.8, size=(4, 2)) for c in ([0, 0], [3, 0], [0, 3])])
    # all 3**12 assignments at once; within-cluster SS = sum|x|^2 - |sum x|^2 / count
    A = np.array(list(itertools.product(range(3), repeat=12)), dtype=np.int8)
    sq = (X**2).sum(axis=1)
    cost = np.zeros(A.shape[0])
    full = np.ones(A.shape[0], dtype=bool)
    for k in range(3):
        M = (A == k).astype(float)
        cnt = M.sum(axis=1)
        full &= cnt > 0
        S = M @ X
        cost += M @ sq - (S**2).sum(axis=1) / np.maximum(cnt, 1)
    best = cost[full].min()
    res = kmeans(X, 3, seed=0)
    assert res.inertia == pytest.approx(best, rel=1e-10)


def test_hamming_examples():
    truth = np.array([0, 0, 1, 1, 2, 2])
    assert hamming_error(truth, truth) == 0.0
    assert hamming_error(np.array([2, 2, 0, 0, 1, 1]), truth) == 0.0
    pred = np.array([0, 1, 1, 2, 2, 2])
    assert hamming_error(pred, truth) == pytest.approx(2 / 6)
    assert brute_hamming(pred, truth) == pytest.approx(2 / 6)
    with pytest.raises(ConfigurationError):
        hamming_error([0, 1], [0, 1, 1])


def test_ari_examples():
    assert adjusted_rand([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert adjusted_rand([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0
    # every contingency cell is 1: index 0, a = b = 2, expected 2/3 -> -1/2
    assert adjusted_rand([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(-0.5, abs=1e-15)
    assert brute_ari([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(-0.5, abs=1e-15)
    with pytest.raises(ConfigurationError):
        adjusted_rand([0, 1], [0])


@settings(max_examples=100, deadline=None)
@given(data=st.data(), n=st.integers(2, 25), k=st.integers(1, 5))
def test_ari_matches_pair_definition(data, n, k):
    pred = np.array(data.draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n)))
    truth = np.array(data.draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n)))
    perm = np.random.default_rng(n).permutation(k)
    a = adjusted_rand(pred, truth)
    assert a == pytest.approx(adjusted_rand(perm[pred], truth), abs=1e-12)
    denom_zero = len(set(pred.tolist())) in (1, n) and len(set(truth.tolist())) in (1, n)
    if not denom_zero:
        ref = brute_ari(pred, truth)
        if np.isfinite(ref):
            assert a == pytest.approx(ref, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(data=st.data(), n=st.integers(1, 30), k=st.integers(1, 6))
def test_hamming_symmetric_and_brute(data, n, k):
    pred = np.array(data.draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n)))
    truth = np.array(data.draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n)))
    h = hamming_error(pred, truth)
    assert h == brute_hamming(pred, truth)
    assert h == hamming_error(truth, pred)


def test_cluster_selected_recovers_domains():
    rng = np.random.default_rng(9)
    labels = np.repeat(np.arange(3), 30)
    X = rng.poisson(3, size=(90, 40)).astype(float)
    X[:, :10] += 8 * (labels[:, None] == 0)
    X[:, 10:20] += 8 * (labels[:, None] == 2)
    res = cluster_selected(X, np.arange(20), 3, seed=1)
    assert adjusted_rand(res.labels, labels) == 1.0
    assert res.pcs.shape == (90, 10)
    with pytest.raises(ConfigurationError):
        cluster_selected(X, [], 3)
