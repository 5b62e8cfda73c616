"""Hybrid Gibbs / Metropolis sampler.

One sweep updates, in order: allocations ``z`` (Gibbs), components ``psi``
(conjugate NIW), rates ``gamma`` (conjugate Gamma), weight rows ``beta``
(Metropolis on the simplex for rows with a downstream row, plus one
Dirichlet-proposal Metropolis move per such row; Dirichlet for the last one) and concentrations ``alpha`` (log-scale random walk).
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .catalog import Catalog, TimePartition
from .errors import ConfigError
from .model import (
    TINY,
    Hyperparams,
    LatentState,
    ModelData,
    SufficientStats,
    component_logpdf,
    draw_prior_state,
    gamma_variate,
    log_unnormalized_posterior,
    niw_posterior_arrays,
    sample_categorical,
    sample_dirichlet,
    sample_niw_arrays,
)

logger = logging.getLogger(__name__)

INTERIOR_MODES = ("exact-mh", "paper-gibbs")
LOG_SCALE_BOUNDS = (-12.0, 4.0)
MOVE_FAMILIES = ("alpha", "beta", "beta_dirichlet")  # the first two are adapted


@dataclass
class SamplerConfig:
    sweeps: int = 20000
    burn_in: int = 10000
    thin: int = 10
    alpha_step: float = 0.5
    beta_step: float = 1.0
    adapt: bool = True
    target_accept: float = 0.44
    seed: int = 0
    interior_beta: str = "exact-mh"
    salt_moves: Optional[int] = None  # simplex moves per row per sweep; None means L
    dirichlet_move: bool = True  # extra independence move per Metropolis row
    checkpoint_every: int = 0
    progress_every: int = 1000

    def __post_init__(self):
        for name in ("sweeps", "burn_in", "thin", "checkpoint_every", "progress_every"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ConfigError(f"sampler.{name} must be a nonnegative integer, got {v!r}")
            setattr(self, name, int(v))
        if self.sweeps < 1:
            raise ConfigError("sampler.sweeps must be >= 1")
        if not self.burn_in < self.sweeps:
            raise ConfigError("sampler.burn_in must be smaller than sampler.sweeps")
        if self.thin < 1:
            raise ConfigError("sampler.thin must be >= 1")
        for name in ("alpha_step", "beta_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"sampler.{name} must be positive")
        if not 0 < self.target_accept < 1:
            raise ConfigError("sampler.target_accept must lie in (0, 1)")
        if self.interior_beta not in INTERIOR_MODES:
            raise ConfigError(f"sampler.interior_beta must be one of {INTERIOR_MODES}")
        if not isinstance(self.dirichlet_move, bool):
            raise ConfigError("sampler.dirichlet_move must be true or false")
        if self.salt_moves is not None and (int(self.salt_moves) != self.salt_moves or self.salt_moves < 1):
            raise ConfigError("sampler.salt_moves must be a positive integer")

    @property
    def n_draws(self) -> int:
        return (self.sweeps - self.burn_in) // self.thin

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown sampler fields {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Tuning:
    """Proposal scales (log scale) and acceptance counters for the Metropolis moves."""

    alpha_log_scale: np.ndarray
    beta_log_scale: np.ndarray
    accepted: dict = field(default_factory=lambda: dict.fromkeys(MOVE_FAMILIES, 0))
    proposed: dict = field(default_factory=lambda: dict.fromkeys(MOVE_FAMILIES, 0))
    last_alpha: np.ndarray = None
    last_beta: np.ndarray = None

    @classmethod
    def initial(cls, P: int, L: int, config: SamplerConfig) -> "Tuning":
        return cls(np.full(P, math.log(config.alpha_step)), np.full((P, L), math.log(config.beta_step)))

    def reset_counts(self):
        self.accepted = dict.fromkeys(MOVE_FAMILIES, 0)
        self.proposed = dict.fromkeys(MOVE_FAMILIES, 0)

    def rates(self) -> dict:
        return {k: (self.accepted[k] / self.proposed[k] if self.proposed[k] else float("nan")) for k in self.accepted}

    def adapt(self, n: int, target: float):
        """Robbins-Monro step on the log proposal scales using the last sweep's acceptances."""
        gain = (n + 1.0) ** -0.6
        lo, hi = LOG_SCALE_BOUNDS
        if self.last_alpha is not None:
            self.alpha_log_scale = np.clip(self.alpha_log_scale + gain * (self.last_alpha - target), lo, hi)
        if self.last_beta is not None:
            mask = ~np.isnan(self.last_beta)
            upd = self.beta_log_scale + gain * (np.nan_to_num(self.last_beta) - target)
            self.beta_log_scale = np.where(mask, np.clip(upd, lo, hi), self.beta_log_scale)

    def to_dict(self):
        return {
            "alpha_log_scale": self.alpha_log_scale.tolist(),
            "beta_log_scale": self.beta_log_scale.tolist(),
            "accepted": dict(self.accepted),
            "proposed": dict(self.proposed),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["alpha_log_scale"], dtype=float),
            np.atleast_2d(np.asarray(d["beta_log_scale"], dtype=float)),
            dict(d["accepted"]),
            dict(d["proposed"]),
        )


# ---------------------------------------------------------------------------
# conjugate moves
# ---------------------------------------------------------------------------


def update_gamma(state: LatentState, data: ModelData, hyper: Hyperparams, rng) -> LatentState:
    shape = hyper.gamma0 * hyper.k + data.counts
    rate = hyper.k + data.lengths
    state.gamma = np.asarray(gamma_variate(shape, rate, rng), dtype=float)
    return state


def psi_conditionals(stats: SufficientStats, hyper: Hyperparams) -> list:
    """Per-component NIW posterior parameters ``(mu_n, eta_n, sigma_n, nu_n)``."""
    niw = hyper.niw
    mu0, sigma0 = niw.mu0_arr, niw.sigma0_arr
    m = stats.m
    return [
        niw_posterior_arrays(mu0, niw.eta, sigma0, niw.nu, int(m[l]), stats.ybar[l], stats.scatter[l])
        for l in range(m.size)
    ]


def update_psi(state: LatentState, stats: SufficientStats, hyper: Hyperparams, rng) -> LatentState:
    for l, (mu_n, eta_n, sigma_n, nu_n) in enumerate(psi_conditionals(stats, hyper)):
        state.mu[l], state.cov[l] = sample_niw_arrays(mu_n, eta_n, sigma_n, nu_n, rng, hyper.mu_domain)
    return state


def allocation_probabilities(state: LatentState, data: ModelData) -> np.ndarray:
    logw = component_logpdf(state, data.xy) + np.log(state.beta[data.period])
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return w / w.sum(axis=1, keepdims=True)


def update_z(state: LatentState, data: ModelData, rng) -> SufficientStats:
    """Redraw every allocation; returns statistics for the new allocation."""
    if data.N:
        logw = component_logpdf(state, data.xy) + np.log(state.beta[data.period])
        state.z = sample_categorical(logw, rng)
    return SufficientStats.compute(data, state.z, state.L)


def _first_row_prior(state: LatentState, p: int) -> np.ndarray:
    if p == 0:
        return np.full(state.L, max(state.alpha[0] / state.L, TINY))
    return np.maximum(state.alpha[p] * state.beta[p - 1], TINY)


def update_beta_terminal(state: LatentState, stats: SufficientStats, rng) -> LatentState:
    p = state.P - 1
    state.beta[p] = sample_dirichlet(stats.counts[p] + _first_row_prior(state, p), rng)
    return state


# ---------------------------------------------------------------------------
# simplex Metropolis
# ---------------------------------------------------------------------------


def salt_move(current: np.ndarray, j: int, step: float):
    """Shift coordinate ``j`` by ``step`` on the logit scale, rescaling the rest.

    Returns the proposal and the log Jacobian correction
    ``log b'_j + (L-1) log(1-b'_j) - log b_j - (L-1) log(1-b_j)``.
    """
    current = np.asarray(current, dtype=float)
    if not current.min() > 0:
        raise ValueError("simplex point must be strictly interior")
    if step == 0:
        return current.copy(), 0.0
    L = current.size
    rest = float(current[:j].sum() + current[j + 1 :].sum())
    log_bj = math.log(current[j])
    log_rest = math.log(rest)
    y = log_bj - log_rest + step
    # log sigmoid(y) and log sigmoid(-y)
    if y > 0:
        log_bj_new = -math.log1p(math.exp(-y))
        log_rest_new = -y + log_bj_new
    else:
        log_rest_new = -math.log1p(math.exp(y))
        log_bj_new = y + log_rest_new
    prop = current * math.exp(log_rest_new - log_rest)
    prop[j] = math.exp(log_bj_new)
    if not prop.min() > 0:
        return prop, -math.inf
    corr = (log_bj_new + (L - 1) * log_rest_new) - (log_bj + (L - 1) * log_rest)
    return prop, corr


def propose_simplex(current: np.ndarray, scale, rng):
    """Random-coordinate logit-scale proposal on the simplex; see :func:`salt_move`.

    ``scale`` is a scalar or one scale per coordinate.
    """
    j = int(rng.integers(current.size))
    s = float(scale) if np.ndim(scale) == 0 else float(scale[j])
    return salt_move(current, j, s * rng.standard_normal())


def _row_target(state: LatentState, counts: np.ndarray, p: int):
    coef = counts[p] + _first_row_prior(state, p) - 1.0
    if p + 1 < state.P:
        a_next = state.alpha[p + 1]
        log_next = np.log(state.beta[p + 1])

        def target(row):
            return float(coef @ np.log(row) - gammaln(np.maximum(a_next * row, TINY)).sum() + a_next * (row @ log_next))

    else:

        def target(row):
            return float(coef @ np.log(row))

    return target


def log_target_beta_row(state: LatentState, counts: np.ndarray, p: int, row: np.ndarray) -> float:
    """Full conditional of ``beta[p]`` up to a constant, including the downstream row."""
    row = np.asarray(row, dtype=float)
    if not row.min() > 0:
        return -math.inf
    return _row_target(state, counts, p)(row)


def update_beta_interior(
    state: LatentState,
    stats: SufficientStats,
    p: int,
    rng,
    mode: str = "exact-mh",
    scale=1.0,
    n_moves: Optional[int] = None,
):
    """Update a row with a downstream neighbour.

    ``exact-mh`` targets the full conditional with simplex Metropolis moves and
    returns per-coordinate ``(accepted, proposed)`` counts. ``paper-gibbs``
    ignores the downstream factor for ``p >= 1`` and draws the Dirichlet
    directly (returns ``None``); row 0 always uses Metropolis.
    """
    if mode not in INTERIOR_MODES:
        raise ValueError(f"unknown interior beta mode {mode!r}")
    if not 0 <= p < state.P - 1:
        raise ValueError(f"row {p} has no downstream neighbour")
    if mode == "paper-gibbs" and p >= 1:
        state.beta[p] = sample_dirichlet(stats.counts[p] + _first_row_prior(state, p), rng)
        return None
    L = state.L
    accepted = np.zeros(L, dtype=np.int64)
    proposed = np.zeros(L, dtype=np.int64)
    if L == 1:
        return accepted, proposed
    scales = np.broadcast_to(np.asarray(scale, dtype=float), (L,))
    n_moves = L if n_moves is None else n_moves
    target = _row_target(state, stats.counts, p)
    row = state.beta[p].copy()
    cur = target(row)
    for _ in range(n_moves):
        j = int(rng.integers(L))
        prop, corr = salt_move(row, j, scales[j] * rng.standard_normal())
        u = rng.uniform()
        proposed[j] += 1
        if corr == -math.inf:
            continue
        new = target(prop)
        if math.log(u) < new - cur + corr:
            row, cur = prop, new
            accepted[j] += 1
    state.beta[p] = row
    return accepted, proposed


def dirichlet_independence_move(state: LatentState, stats: SufficientStats, p: int, rng) -> bool:
    """Metropolis move for ``beta[p]`` proposing from its conditional without the downstream row.

    The proposal matches every factor of the target except
    ``Dir(beta[p+1]; alpha[p+1] beta[p])``, so the acceptance ratio is the ratio
    of that factor alone. Unlike small logit steps it can leave a corner of the
    simplex in one move when the concentrations are tiny.
    """
    if not 0 <= p < state.P - 1:
        raise ValueError(f"row {p} has no downstream neighbour")
    if state.L == 1:
        return True
    a_next = state.alpha[p + 1]
    log_next = np.log(state.beta[p + 1])

    def down(row):
        return float(a_next * (row @ log_next) - gammaln(np.maximum(a_next * row, TINY)).sum())

    prop = sample_dirichlet(stats.counts[p] + _first_row_prior(state, p), rng)
    if math.log(rng.uniform()) < down(prop) - down(state.beta[p]):
        state.beta[p] = prop
        return True
    return False


# ---------------------------------------------------------------------------
# concentration random walk
# ---------------------------------------------------------------------------


def _dirichlet_norm_term(a: np.ndarray, log_w: np.ndarray) -> float:
    return float(gammaln(a.sum()) - gammaln(a).sum() + ((a - 1.0) * log_w).sum())


def log_target_alpha(state: LatentState, alpha0: float, p: int, value: float) -> float:
    """Density of ``log alpha[p]`` given everything else, up to a constant.

    This is the full conditional of ``alpha[p]`` times the Jacobian ``alpha[p]``,
    so a symmetric random walk on ``log alpha[p]`` needs no further correction.
    """
    if not value > 0:
        return -math.inf
    a = value
    la = math.log(a)
    shape = alpha0 if p == 0 else state.alpha[p - 1]
    out = shape * la - a
    if p + 1 < state.P:
        out += (a - 1.0) * math.log(state.alpha[p + 1]) - math.lgamma(a)
    row = state.beta[p]
    if state.L > 1:
        params = np.full(state.L, max(a / state.L, TINY)) if p == 0 else np.maximum(a * state.beta[p - 1], TINY)
        out += _dirichlet_norm_term(params, np.log(row))
    return out


def update_alpha(state: LatentState, hyper: Hyperparams, rng, log_scales) -> np.ndarray:
    """One Metropolis step per ``alpha[p]``; returns per-coordinate acceptance indicators."""
    acc = np.zeros(state.P)
    for p in range(state.P):
        cur = state.alpha[p]
        prop = cur * math.exp(math.exp(log_scales[p]) * rng.standard_normal())
        u = rng.uniform()
        if not (prop > 0 and math.isfinite(prop)):
            continue
        log_ratio = log_target_alpha(state, hyper.alpha0, p, prop) - log_target_alpha(state, hyper.alpha0, p, cur)
        if math.log(u) < log_ratio:
            state.alpha[p] = prop
            acc[p] = 1.0
    return acc


# ---------------------------------------------------------------------------
# sweep and chain
# ---------------------------------------------------------------------------


def sweep(state: LatentState, data: ModelData, hyper: Hyperparams, config: SamplerConfig, rng, tuning: Tuning = None):
    """Apply every move once; returns ``(state, stats)``."""
    if tuning is None:
        tuning = Tuning.initial(state.P, state.L, config)
    stats = update_z(state, data, rng)
    update_psi(state, stats, hyper, rng)
    update_gamma(state, data, hyper, rng)
    beta_rates = np.full((state.P, state.L), np.nan)
    for p in range(state.P - 1):
        res = update_beta_interior(
            state,
            stats,
            p,
            rng,
            config.interior_beta,
            np.exp(tuning.beta_log_scale[p]),
            config.salt_moves,
        )
        if res is not None:
            acc, prop = res
            tuning.accepted["beta"] += int(acc.sum())
            tuning.proposed["beta"] += int(prop.sum())
            hit = prop > 0
            beta_rates[p, hit] = acc[hit] / prop[hit]
            if config.dirichlet_move:
                tuning.accepted["beta_dirichlet"] += dirichlet_independence_move(state, stats, p, rng)
                tuning.proposed["beta_dirichlet"] += 1
    update_beta_terminal(state, stats, rng)
    acc = update_alpha(state, hyper, rng, tuning.alpha_log_scale)
    tuning.accepted["alpha"] += int(acc.sum())
    tuning.proposed["alpha"] += state.P
    tuning.last_alpha = acc
    tuning.last_beta = beta_rates
    return state, stats


@dataclass
class PosteriorDraws:
    draws: list
    log_post: list
    sweep_index: list
    acceptance: dict
    seed: int
    config: Optional[SamplerConfig] = None
    hyper: Optional[Hyperparams] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.draws)

    @property
    def config_hash(self) -> Optional[str]:
        return None if self.config is None else self.config.digest()

    def gamma_matrix(self) -> np.ndarray:
        return np.array([d.gamma for d in self.draws])

    def allocations(self) -> np.ndarray:
        return np.array([d.z for d in self.draws], dtype=np.int64)


@dataclass
class Checkpoint:
    next_sweep: int
    state: LatentState
    tuning: Tuning
    rng_state: dict
    draws: list
    log_post: list
    sweep_index: list
    config: SamplerConfig
    hyper_digest: str

    def save(self, path) -> None:
        blob = {
            "version": 1,
            "next_sweep": self.next_sweep,
            "state": self.state.to_dict(),
            "tuning": self.tuning.to_dict(),
            "rng_state": self.rng_state,
            "draws": [d.to_dict() for d in self.draws],
            "log_post": self.log_post,
            "sweep_index": self.sweep_index,
            "config": self.config.to_dict(),
            "hyper_digest": self.hyper_digest,
        }
        tmp = Path(str(path) + ".tmp")
        tmp.write_text(json.dumps(blob))
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        blob = json.loads(Path(path).read_text())
        return cls(
            next_sweep=blob["next_sweep"],
            state=LatentState.from_dict(blob["state"]),
            tuning=Tuning.from_dict(blob["tuning"]),
            rng_state=blob["rng_state"],
            draws=[LatentState.from_dict(d) for d in blob["draws"]],
            log_post=blob["log_post"],
            sweep_index=blob["sweep_index"],
            config=SamplerConfig.from_dict(blob["config"]),
            hyper_digest=blob["hyper_digest"],
        )


def run_chain(
    catalog: Catalog,
    partition: TimePartition,
    hyper: Hyperparams,
    config: SamplerConfig,
    **kwargs,
) -> PosteriorDraws:
    """Initialise from the prior, burn in (adapting proposal scales) and collect thinned draws."""
    return run_chain_data(ModelData.from_catalog(catalog, partition), hyper, config, **kwargs)


def run_chain_data(
    data: ModelData,
    hyper: Hyperparams,
    config: SamplerConfig,
    checkpoint_path=None,
    resume: Optional[Checkpoint] = None,
    stop_after: Optional[int] = None,
) -> PosteriorDraws:
    """Chain driver on prepared data.

    ``stop_after`` halts (writing a checkpoint) once that many sweeps are done;
    it exists for resumable runs and their tests. Any exception also leaves a
    checkpoint behind when ``checkpoint_path`` is set.
    """
    if data.P != hyper.P:
        raise ConfigError(f"partition has {data.P} periods but hyper.P = {hyper.P}")
    rng = np.random.default_rng(config.seed)
    if resume is not None:
        if resume.hyper_digest != hyper.digest():
            raise ConfigError("checkpoint was written for different hyperparameters")
        rng.bit_generator.state = resume.rng_state
        state = resume.state.copy()
        tuning = resume.tuning
        draws, log_post, sweep_index = list(resume.draws), list(resume.log_post), list(resume.sweep_index)
        start = resume.next_sweep
    else:
        state = draw_prior_state(hyper, data, rng)
        tuning = Tuning.initial(hyper.P, hyper.L, config)
        draws, log_post, sweep_index = [], [], []
        start = 0

    def checkpoint(next_sweep):
        if checkpoint_path is None:
            return
        Checkpoint(
            next_sweep, state, tuning, rng.bit_generator.state, draws, log_post, sweep_index, config, hyper.digest()
        ).save(checkpoint_path)

    # start-of-sweep snapshot, so an interrupted sweep never reaches the checkpoint
    safe = None
    t0 = time.perf_counter()
    try:
        for s in range(start, config.sweeps):
            if stop_after is not None and s >= stop_after:
                checkpoint(s)
                break
            if checkpoint_path is not None:
                safe = (s, state.copy(), copy.deepcopy(tuning), rng.bit_generator.state, len(draws))
            if s == config.burn_in:
                tuning.reset_counts()
            sweep(state, data, hyper, config, rng, tuning)
            if config.adapt and s < config.burn_in:
                tuning.adapt(s, config.target_accept)
            if s >= config.burn_in and (s - config.burn_in + 1) % config.thin == 0:
                draws.append(state.copy())
                log_post.append(log_unnormalized_posterior(state, data, hyper))
                sweep_index.append(s)
            if config.progress_every and (s + 1) % config.progress_every == 0:
                logger.info(
                    "sweep %d/%d (%.1fs) acceptance %s",
                    s + 1,
                    config.sweeps,
                    time.perf_counter() - t0,
                    {k: round(v, 3) for k, v in tuning.rates().items()},
                )
            if config.checkpoint_every and (s + 1) % config.checkpoint_every == 0:
                checkpoint(s + 1)
    except BaseException:
        if safe is not None:
            s0, st, tu, rs, n = safe
            Checkpoint(
                s0, st, tu, rs, draws[:n], log_post[:n], sweep_index[:n], config, hyper.digest()
            ).save(checkpoint_path)
        raise

    return PosteriorDraws(
        draws=draws,
        log_post=log_post,
        sweep_index=sweep_index,
        acceptance=tuning.rates(),
        seed=config.seed,
        config=config,
        hyper=hyper,
        meta={
            "alpha_step": np.exp(tuning.alpha_log_scale).tolist(),
            "beta_step": np.exp(tuning.beta_log_scale).tolist(),
        },
    )
