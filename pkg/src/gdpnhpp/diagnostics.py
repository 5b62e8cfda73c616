"""Joint-distribution ("getting it right") test of the sampler.

Two simulators of ``(theta, data)`` are compared:

* marginal-conditional: ``theta`` from the prior (with ``gamma`` drawn given
  the fixed per-period counts) and event locations from the likelihood;
* successive-conditional: alternate one sampler sweep with a redraw of the
  event locations given the current state.

Both target the same joint law, so moments of any function of ``theta`` must
agree. Event counts per period are held fixed; only locations are redrawn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Hyperparams, LatentState, ModelData, NIWParams, draw_prior_state, gamma_variate
from .sampler import SamplerConfig, Tuning, sweep


def default_geweke_hyper() -> Hyperparams:
    return Hyperparams(
        niw=NIWParams((0.0, 0.0), 1.0, ((1.0, 0.0), (0.0, 1.0)), 6.0),
        alpha0=4.0,
        gamma0=2.0,
        k=1.0,
        L=2,
        P=2,
    )


def _draw_locations(state: LatentState, rng) -> np.ndarray:
    n = state.z.size
    eps = rng.standard_normal((n, 2))
    chol = np.linalg.cholesky(state.cov[state.z])
    return state.mu[state.z] + np.einsum("nij,nj->ni", chol, eps)


def _features(state: LatentState) -> np.ndarray:
    first = np.concatenate([state.alpha, state.gamma, state.beta[:, 0]])
    return np.concatenate([first, first**2])


def feature_names(P: int) -> list:
    base = [f"alpha[{p}]" for p in range(P)] + [f"gamma[{p}]" for p in range(P)] + [f"beta[{p},0]" for p in range(P)]
    return base + [f"{b}^2" for b in base]


def batch_means_se(x: np.ndarray, n_batches: int = 100) -> np.ndarray:
    """Standard error of the column means of an autocorrelated series."""
    n = (x.shape[0] // n_batches) * n_batches
    b = x[:n].reshape(n_batches, -1, x.shape[1]).mean(axis=1)
    return b.std(axis=0, ddof=1) / math.sqrt(n_batches)


@dataclass
class GewekeResult:
    names: list
    z: np.ndarray
    mc_mean: np.ndarray
    sc_mean: np.ndarray
    acceptance: dict = field(default_factory=dict)

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))


def geweke_test(
    n_iter: int = 100_000,
    mode: str = "exact-mh",
    hyper: Hyperparams = None,
    counts=(3, 2),
    lengths=(1.0, 1.0),
    seed: int = 0,
    alpha_step: float = 0.8,
    beta_step: float = 1.0,
    dirichlet_move: bool = True,
) -> GewekeResult:
    hyper = hyper or default_geweke_hyper()
    counts = np.asarray(counts, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=float)
    period = np.repeat(np.arange(hyper.P), counts)
    rng = np.random.default_rng(seed)
    config = SamplerConfig(
        sweeps=2, burn_in=1, thin=1, seed=seed, interior_beta=mode, adapt=False, dirichlet_move=dirichlet_move,
        alpha_step=alpha_step, beta_step=beta_step, progress_every=0,
    )
    gamma_shape = hyper.gamma0 * hyper.k + counts
    gamma_rate = hyper.k + lengths

    def marginal_draw():
        data = ModelData(np.zeros((period.size, 2)), period, lengths)
        s = draw_prior_state(hyper, data, rng)
        s.gamma = np.asarray(gamma_variate(gamma_shape, gamma_rate, rng), dtype=float)
        data.xy = _draw_locations(s, rng)
        return s, data

    n_feat = 6 * hyper.P
    mc = np.empty((n_iter, n_feat))
    for i in range(n_iter):
        mc[i] = _features(marginal_draw()[0])

    state, data = marginal_draw()
    tuning = Tuning.initial(hyper.P, hyper.L, config)
    sc = np.empty((n_iter, n_feat))
    for i in range(n_iter):
        sweep(state, data, hyper, config, rng, tuning)
        data.xy = _draw_locations(state, rng)
        sc[i] = _features(state)

    se_mc = mc.std(axis=0, ddof=1) / math.sqrt(n_iter)
    se_sc = batch_means_se(sc)
    z = (mc.mean(axis=0) - sc.mean(axis=0)) / np.sqrt(se_mc**2 + se_sc**2)
    return GewekeResult(feature_names(hyper.P), z, mc.mean(axis=0), sc.mean(axis=0), tuning.rates())
