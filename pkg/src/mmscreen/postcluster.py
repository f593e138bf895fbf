"""PCA + k-means on selected features, and clustering accuracy metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import comb

from ._streams import stream, thread_map
from .errors import ConfigurationError

DEFAULT_PCS = 10


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    pcs: Optional[np.ndarray] = None
    inertia_trace: tuple = ()
    restart: int = 0


def pca_scores(X_sel, d=DEFAULT_PCS):
    """Scores on the top ``d`` principal directions of the column-centred matrix.

    ``d`` is reduced to ``min(m, n - 1)`` when larger.  Each direction is
    signed so that its largest-magnitude loading is positive.
    """
    X = np.asarray(X_sel, dtype=float)
    if X.ndim != 2:
        raise ConfigurationError("expected a 2-D matrix")
    n, m = X.shape
    if m < 1 or n < 2:
        raise ConfigurationError("PCA needs n >= 2 spots and m >= 1 features")
    d = min(int(d), m, n - 1)
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    vt = vt[:d]
    flip = np.sign(vt[np.arange(d), np.argmax(np.abs(vt), axis=1)])
    flip[flip == 0] = 1.0
    vt = vt * flip[:, None]
    return Xc @ vt.T


def _sqdist(X, C):
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _seed_centers(X, K, rng):
    """Distance-proportional (k-means++) seeding."""
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sqdist(X, X[chosen])[:, 0]
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        d2 = np.minimum(d2, _sqdist(X, X[idx : idx + 1])[:, 0])
    return X[chosen].copy()


def _lloyd(X, C, max_iter):
    K = C.shape[0]
    labels = None
    trace = []
    for _ in range(max_iter):
        d2 = _sqdist(X, C)
        new = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(X.shape[0]), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        C = C.copy()
        for k in range(K):
            members = labels == k
            if members.any():
                C[k] = X[members].mean(axis=0)
        empty = np.flatnonzero(np.bincount(labels, minlength=K) == 0)
        if empty.size:
            # move each empty centre onto the point farthest from its centre
            far = np.argsort(-d2[np.arange(X.shape[0]), labels], kind="stable")
            for k, i in zip(empty, far):
                C[k] = X[i]
    d2 = _sqdist(X, C)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(X.shape[0]), labels].sum())
    return labels, C, inertia, tuple(trace)


def kmeans(scores, K, seed=0, n_init=10, max_iter=300, threads=None):
    """Lloyd k-means, best of ``n_init`` k-means++ restarts by inertia."""
    X = np.asarray(scores, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= K <= n:
        raise ConfigurationError(f"K={K} must lie in [1, n={n}]")

    def restart(r):
        rng = stream(seed, "kmeans", r)
        return _lloyd(X, _seed_centers(X, K, rng), max_iter)

    runs = thread_map(restart, range(n_init), threads)
    best = min(range(n_init), key=lambda r: (runs[r][2], r))
    labels, C, inertia, trace = runs[best]
    return ClusterResult(labels, C, inertia, X, trace, best)


def _encode(labels):
    _, inv = np.unique(np.asarray(labels), return_inverse=True)
    return inv.ravel()


def contingency(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ConfigurationError("label vectors differ in length")
    a, b = _encode(pred), _encode(truth)
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def hamming_error(pred, truth):
    """Misclassification rate minimised over label permutations."""
    table = contingency(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    n = table.sum()
    return float((n - table[rows, cols].sum()) / n)


def adjusted_rand(pred, truth):
    """Adjusted Rand index from the contingency table."""
    table = contingency(pred, truth)
    n = int(table.sum())
    index = comb(table, 2).sum()
    a = comb(table.sum(axis=1), 2).sum()
    b = comb(table.sum(axis=0), 2).sum()
    expected = a * b / comb(n, 2) if n > 1 else 0.0
    best = 0.5 * (a + b)
    if best == expected:
        return 1.0
    return float((index - expected) / (best - expected))


def cluster_selected(X, selected, K, d=DEFAULT_PCS, seed=0, n_init=10, threads=None):
    """PCA on the selected columns of ``X`` followed by k-means."""
    X = np.asarray(X, dtype=float)
    selected = np.asarray(selected, dtype=np.intp)
    if selected.size == 0:
        raise ConfigurationError("no selected features to cluster")
    return kmeans(pca_scores(X[:, selected], d), K, seed, n_init, threads=threads)
