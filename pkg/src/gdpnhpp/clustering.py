"""Event clustering from posterior allocations.

Co-allocation counts are kept as integers so that Dahl's least-squares loss
can be compared exactly between draws.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2

EIG_TOL = 1e-10


@dataclass
class SimilarityMatrix:
    counts: np.ndarray  # (N, N) int64, number of draws with z_i == z_j
    n_draws: int

    @property
    def values(self) -> np.ndarray:
        return self.counts / self.n_draws

    @property
    def N(self) -> int:
        return self.counts.shape[0]


def _allocations(draws) -> np.ndarray:
    if hasattr(draws, "allocations"):
        return draws.allocations()
    rows = [np.asarray(getattr(d, "z", d), dtype=np.int64) for d in draws]
    if not rows:
        raise ValueError("no draws")
    if len({r.shape for r in rows}) != 1:
        raise ValueError("inconsistent allocation lengths across draws")
    return np.array(rows, dtype=np.int64)


def similarity_matrix(draws) -> SimilarityMatrix:
    """Fraction of draws in which each pair of events shares a component."""
    Z = _allocations(draws)
    if Z.shape[0] == 0:
        raise ValueError("no draws")
    N = Z.shape[1]
    # float BLAS is exact here: every partial sum is an integer below 2**53
    acc = np.zeros((N, N))
    for z in Z:
        labels = np.unique(z)
        onehot = (z[:, None] == labels[None, :]).astype(float)
        acc += onehot @ onehot.T
    return SimilarityMatrix(np.rint(acc).astype(np.int64), Z.shape[0])


def dahl_losses(draws, similarity: SimilarityMatrix) -> np.ndarray:
    """``n_draws**2`` times the squared-error loss of every draw (exact integers)."""
    Z = _allocations(draws)
    D = similarity.n_draws
    C = similarity.counts
    Cf = C.astype(float)
    sum_c2 = int((C * C).sum())
    out = np.empty(Z.shape[0], dtype=object)
    for d, z in enumerate(Z):
        labels = np.unique(z)
        onehot = (z[:, None] == labels[None, :]).astype(float)
        sizes = onehot.sum(axis=0).astype(np.int64)
        within = int(round(float(((Cf @ onehot) * onehot).sum())))
        out[d] = int((sizes * sizes).sum()) * D * D - 2 * D * within + sum_c2
    return out


def dahl_select(draws, similarity: SimilarityMatrix) -> tuple:
    """Draw allocation closest to the similarity matrix in squared loss.

    Returns ``(allocation, draw_index, loss)``; ties go to the earliest draw.
    """
    Z = _allocations(draws)
    losses = dahl_losses(Z, similarity)
    best = min(range(len(losses)), key=lambda i: (losses[i], i))
    return Z[best].copy(), best, losses[best] / similarity.n_draws**2


def _normalized_laplacian(affinity) -> np.ndarray:
    A = np.asarray(getattr(affinity, "values", affinity), dtype=float)
    A = 0.5 * (A + A.T)
    deg = A.sum(axis=1)
    if np.any(deg <= 0):
        # isolated node: give it unit self-similarity
        A = A.copy()
        zero = deg <= 0
        A[zero, zero] = 1.0
        deg = A.sum(axis=1)
    d = 1.0 / np.sqrt(deg)
    return np.eye(A.shape[0]) - d[:, None] * A * d[None, :]


def laplacian_spectrum(affinity):
    vals, vecs = np.linalg.eigh(_normalized_laplacian(affinity))
    return vals, vecs


def eigengap_k(affinity, k_max: int = 12) -> int:
    """Cluster count at the largest gap among the smallest Laplacian eigenvalues.

    Gaps below ``EIG_TOL`` count as zero and ties go to the smaller ``k``, so
    a Laplacian with no gap at all yields 1.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    vals, _ = laplacian_spectrum(affinity)
    k_max = min(k_max, vals.size)
    if k_max < 2:
        return 1
    gaps = np.diff(vals[:k_max])
    gaps = np.where(gaps > EIG_TOL, gaps, 0.0)
    return int(np.argmax(gaps)) + 1


def _farthest_point_init(X: np.ndarray, k: int) -> np.ndarray:
    """Deterministic farthest-point seeding, starting from the row farthest from the centroid."""
    idx = [int(np.argmax(((X - X.mean(axis=0)) ** 2).sum(axis=1)))]
    d2 = ((X - X[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        idx.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[idx].copy()


def spectral_cluster(affinity, k: int) -> np.ndarray:
    """Normalised spectral clustering (symmetric Laplacian, row-normalised embedding)."""
    vals, vecs = laplacian_spectrum(affinity)
    N = vals.size
    if not 1 <= k <= N:
        raise ValueError(f"k must lie in [1, {N}]")
    if k == 1:
        return np.zeros(N, dtype=np.int64)
    U = vecs[:, :k]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    U = U / np.where(norms > 0, norms, 1.0)
    init = _farthest_point_init(U, k)
    _, labels = kmeans2(U, init, minit="matrix", iter=100, missing="warn")
    return _canonical_labels(labels)


def _canonical_labels(labels) -> np.ndarray:
    """Renumber clusters in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(np.int64)
