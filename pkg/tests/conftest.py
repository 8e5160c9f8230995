import numpy as np
import pytest

import gspsample as gs


def random_connected_graph(rng, n, p=0.6, w_lo=0.5, w_hi=1.5):
    """Seeded random weighted graph, redrawn until connected."""
    while True:
        upper = np.triu((rng.random((n, n)) < p) * rng.uniform(w_lo, w_hi, (n, n)), 1)
        g = gs.build_graph(upper + upper.T)
        lambdas = np.linalg.eigvalsh(g.L)
        if n == 1 or lambdas[1] > 1e-8:
            return g


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)


@pytest.fixture
def two_node_graph():
    return gs.build_graph([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def path3_graph():
    return gs.build_graph([[0, 1, 0], [1, 0, 1], [0, 1, 0.0]])


@pytest.fixture
def k4_graph():
    W = np.ones((4, 4)) - np.eye(4)
    return gs.build_graph(W)


def planted_two_clusters(seed, noise_rel=0.0, n=12, T=40, gap=4.0):
    """Cluster-constant snapshots on two equal clusters; returns (X, labels)."""
    rng = np.random.default_rng(seed)
    half = n // 2
    labels = np.array([0] * half + [1] * (n - half))
    base = np.stack([rng.normal(0.0, 1.0, T), rng.normal(gap, 1.0, T)])
    X = base[labels].T.copy()
    if noise_rel > 0:
        X = X + noise_rel * X.std() * rng.standard_normal(X.shape)
    return X, labels


def ranking_auc(scores, positive):
    """Area under the ROC curve of scores against boolean labels."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    ranks[order] = np.arange(1, len(scores) + 1)
    # midrank correction for ties
    for value in np.unique(scores):
        idx = scores == value
        ranks[idx] = ranks[idx].mean()
    n_pos = int(positive.sum())
    n_neg = int((~positive).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need both classes")
    return (ranks[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
