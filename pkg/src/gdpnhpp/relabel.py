"""Label-switching correction against a pivot allocation.

Every draw is permuted so that its allocation agrees with the pivot on as
many events as possible; the optimal permutation is an assignment problem on
the label co-occurrence matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .sampler import PosteriorDraws


@dataclass
class Relabeling:
    permutations: np.ndarray  # (D, L); old label a -> permutations[d, a]
    pivot_index: int
    mismatches: np.ndarray  # (D,) events disagreeing with the pivot after relabeling


def select_pivot(draws, log_post=None) -> tuple:
    """Allocation of the highest-posterior draw, and its index (first on ties)."""
    if isinstance(draws, PosteriorDraws):
        log_post = draws.log_post if log_post is None else log_post
        states = draws.draws
    else:
        states = list(draws)
    if not states:
        raise ValueError("cannot select a pivot from zero draws")
    if log_post is None:
        raise ValueError("log posterior values are required to pick the pivot")
    idx = int(np.argmax(np.asarray(log_post, dtype=float)))
    return states[idx].z.copy(), idx


def cooccurrence(z_draw, pivot, L: int) -> np.ndarray:
    z_draw = np.asarray(z_draw, dtype=np.int64)
    pivot = np.asarray(pivot, dtype=np.int64)
    return np.bincount(z_draw * L + pivot, minlength=L * L).reshape(L, L)


def relabel_draw(z_draw, pivot, L: int, tiebreak=None) -> np.ndarray:
    """Permutation ``sigma`` minimising ``#{i : sigma[z_draw[i]] != pivot[i]}``.

    Among optimal permutations the one maximising ``tiebreak`` (an ``(L, L)``
    score in [0, 1]) is preferred; without it, the identity.
    """
    z_draw = np.asarray(z_draw)
    pivot = np.asarray(pivot)
    if z_draw.shape != pivot.shape:
        raise ValueError("allocation vectors differ in length")
    counts = cooccurrence(z_draw, pivot, L).astype(float)
    bonus = np.eye(L) if tiebreak is None else np.clip(np.asarray(tiebreak, dtype=float), 0.0, 1.0)
    # The bonus totals less than one agreement, so it only breaks ties.
    counts += bonus * (0.5 / L)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    perm = np.empty(L, dtype=np.int64)
    perm[rows] = cols
    return perm


def mean_proximity(state, reference) -> np.ndarray:
    """``exp(-|mu_a - mu_ref_b|)`` between components of ``state`` and ``reference``."""
    d = np.linalg.norm(state.mu[:, None, :] - reference.mu[None, :, :], axis=2)
    return np.exp(-d)


def mismatch_count(z_draw, pivot, perm) -> int:
    return int(np.sum(np.asarray(perm)[np.asarray(z_draw)] != np.asarray(pivot)))


def relabel(draws: PosteriorDraws, pivot=None, pivot_state=None) -> Relabeling:
    """Compute one permutation per draw against ``pivot`` (default: the MAP draw).

    Components with the same allocation pattern (typically empty ones) are
    matched by the proximity of their means to those of ``pivot_state``,
    which defaults to the pivot draw.
    """
    if pivot is None:
        pivot, pivot_idx = select_pivot(draws)
        if pivot_state is None:
            pivot_state = draws.draws[pivot_idx]
    else:
        pivot_idx = -1
    L = draws.draws[0].L
    perms = np.array(
        [
            relabel_draw(d.z, pivot, L, None if pivot_state is None else mean_proximity(d, pivot_state))
            for d in draws.draws
        ],
        dtype=np.int64,
    ).reshape(-1, L)
    mism = np.array([mismatch_count(d.z, pivot, p) for d, p in zip(draws.draws, perms)], dtype=np.int64)
    return Relabeling(perms, pivot_idx, mism)


def apply_relabeling(draws: PosteriorDraws, relabeling: Relabeling) -> PosteriorDraws:
    if len(relabeling.permutations) != len(draws):
        raise ValueError("one permutation per draw is required")
    new_states = [s.permuted(p) for s, p in zip(draws.draws, relabeling.permutations)]
    meta = dict(draws.meta)
    meta["relabeling"] = {
        "pivot_index": relabeling.pivot_index,
        "mean_mismatch": float(relabeling.mismatches.mean()) if len(relabeling.mismatches) else 0.0,
    }
    return replace(draws, draws=new_states, meta=meta)


def trace_autocorrelation(draws: PosteriorDraws, max_lag: int = 20) -> np.ndarray:
    """Autocorrelation of the component-mean traces, shape ``(max_lag + 1, L, 2)``.

    Meant for inspecting relabeled chains when choosing a thinning interval.
    """
    mu = np.array([d.mu for d in draws.draws])  # (D, L, 2)
    mu = mu - mu.mean(axis=0)
    var = (mu * mu).mean(axis=0)
    D = mu.shape[0]
    out = np.empty((max_lag + 1,) + mu.shape[1:])
    for lag in range(max_lag + 1):
        if lag >= D:
            out[lag] = np.nan
            continue
        cov = (mu[: D - lag] * mu[lag:]).mean(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[lag] = np.where(var > 0, cov / var, np.nan)
    return out
