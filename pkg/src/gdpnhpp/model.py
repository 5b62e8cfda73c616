"""Hierarchical model: parameters, priors, mixture density and likelihoods.

The background intensity is piecewise constant in time,

    mu(x, y, t) = gamma_p * f_p(x, y)   for t in period p,
    f_p(x, y)   = sum_l beta[p, l] * N((x, y); mean_l, cov_l),

with a Gamma chain on the concentrations ``alpha``, a Dirichlet chain on the
weight rows ``beta[p]`` (each row centred on the previous one), a
Normal-Inverse-Wishart base measure for the components and independent Gamma
priors on the rates ``gamma``.

Periods and component labels are zero-based throughout the Python API.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp, multigammaln

from .catalog import Catalog, SpatialWindow, TimePartition, assign_periods
from .errors import CatalogError, ConfigError, NumericalError
from .gaussian import LOG_2PI, det2, inv2, is_spd, logpdf, symmetrize

TINY = 1e-300
MAX_TRUNCATION_TRIES = 100_000


@dataclass(frozen=True)
class NIWParams:
    """``cov ~ InvWishart(sigma0, nu)``, ``mean | cov ~ N(mu0, cov / eta)``."""

    mu0: tuple
    eta: float
    sigma0: tuple
    nu: float

    def __post_init__(self):
        mu0 = np.asarray(self.mu0, dtype=float).reshape(2)
        sigma0 = np.asarray(self.sigma0, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(mu0)):
            raise ConfigError("niw.mu0 must be finite")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ConfigError(f"niw.eta must be positive, got {self.eta}")
        if not is_spd(sigma0):
            raise ConfigError("niw.sigma0 must be symmetric positive definite")
        if not self.nu > 1:
            raise ConfigError(f"niw.nu must exceed 1 (dimension - 1), got {self.nu}")
        object.__setattr__(self, "mu0", tuple(mu0.tolist()))
        object.__setattr__(self, "sigma0", tuple(map(tuple, sigma0.tolist())))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def mu0_arr(self) -> np.ndarray:
        return np.asarray(self.mu0)

    @property
    def sigma0_arr(self) -> np.ndarray:
        return np.asarray(self.sigma0)

    def to_dict(self):
        return {"mu0": list(self.mu0), "eta": self.eta, "sigma0": [list(r) for r in self.sigma0], "nu": self.nu}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["mu0"]), float(d["eta"]), tuple(map(tuple, d["sigma0"])), float(d["nu"]))


@dataclass(frozen=True)
class Hyperparams:
    niw: NIWParams
    alpha0: float
    gamma0: float
    k: float
    L: int
    P: int
    mu_domain: Optional[SpatialWindow] = None

    def __post_init__(self):
        for name in ("alpha0", "gamma0", "k"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
            object.__setattr__(self, name, float(v))
        for name in ("L", "P"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def to_dict(self):
        return {
            "niw": self.niw.to_dict(),
            "alpha0": self.alpha0,
            "gamma0": self.gamma0,
            "k": self.k,
            "L": self.L,
            "P": self.P,
            "mu_domain": None if self.mu_domain is None else self.mu_domain.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        dom = d.get("mu_domain")
        try:
            niw = NIWParams.from_dict(d["niw"])
            return cls(
                niw=niw,
                alpha0=d["alpha0"],
                gamma0=d["gamma0"],
                k=d["k"],
                L=d["L"],
                P=d["P"],
                mu_domain=None if dom is None else SpatialWindow.from_dict(dom),
            )
        except KeyError as e:
            raise ConfigError(f"missing hyperparameter field {e.args[0]!r}") from None
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from None

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class LatentState:
    alpha: np.ndarray  # (P,)
    beta: np.ndarray  # (P, L), rows on the simplex
    gamma: np.ndarray  # (P,) events per day
    mu: np.ndarray  # (L, 2) component means
    cov: np.ndarray  # (L, 2, 2) component covariances
    z: np.ndarray  # (N,) labels in 0..L-1

    @property
    def P(self) -> int:
        return self.beta.shape[0]

    @property
    def L(self) -> int:
        return self.beta.shape[1]

    def copy(self) -> "LatentState":
        return LatentState(
            self.alpha.copy(), self.beta.copy(), self.gamma.copy(), self.mu.copy(), self.cov.copy(), self.z.copy()
        )

    def check(self) -> None:
        """Raise ``AssertionError`` if any state invariant is violated."""
        assert np.all(self.alpha > 0), "alpha must be positive"
        assert np.all(self.gamma > 0), "gamma must be positive"
        assert np.all(self.beta >= 0), "beta entries must be nonnegative"
        assert np.allclose(self.beta.sum(axis=1), 1.0, rtol=0, atol=1e-12), "beta rows must sum to 1"
        assert is_spd(self.cov), "covariances must be SPD"
        assert self.z.size == 0 or (self.z.min() >= 0 and self.z.max() < self.L), "labels out of range"

    def permuted(self, perm) -> "LatentState":
        """Relabel components: old label ``a`` becomes ``perm[a]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        return LatentState(
            self.alpha.copy(),
            self.beta[:, inv].copy(),
            self.gamma.copy(),
            self.mu[inv].copy(),
            self.cov[inv].copy(),
            perm[self.z],
        )

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "mu": self.mu.tolist(),
            "cov": self.cov.tolist(),
            "z": self.z.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "LatentState":
        L = len(d["mu"])
        return cls(
            np.asarray(d["alpha"], dtype=float),
            np.asarray(d["beta"], dtype=float).reshape(-1, L),
            np.asarray(d["gamma"], dtype=float),
            np.asarray(d["mu"], dtype=float).reshape(L, 2),
            np.asarray(d["cov"], dtype=float).reshape(L, 2, 2),
            np.asarray(d["z"], dtype=np.int64),
        )

    def __eq__(self, other):
        if not isinstance(other, LatentState):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("alpha", "beta", "gamma", "mu", "cov", "z")
        )


@dataclass
class ModelData:
    """Events in time order with their period index and per-period exposure."""

    xy: np.ndarray
    period: np.ndarray
    lengths: np.ndarray
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.period = np.asarray(self.period, dtype=np.int64)
        self.lengths = np.asarray(self.lengths, dtype=float)
        if self.period.size and (self.period.min() < 0 or self.period.max() >= self.lengths.size):
            raise ValueError("period index out of range")
        self.counts = np.bincount(self.period, minlength=self.P)

    @property
    def P(self) -> int:
        return self.lengths.size

    @property
    def N(self) -> int:
        return self.xy.shape[0]

    @classmethod
    def from_catalog(cls, catalog: Catalog, partition: TimePartition) -> "ModelData":
        if not math.isclose(partition.horizon, catalog.horizon, rel_tol=1e-12):
            raise CatalogError("partition horizon does not match catalog horizon")
        return cls(catalog.xy, assign_periods(catalog.t, partition), partition.lengths)


def _moments(points: np.ndarray):
    m = points.shape[0]
    if m == 0:
        return 0, np.zeros(2), np.zeros((2, 2))
    ybar = points.mean(axis=0)
    d = points - ybar
    return m, ybar, d.T @ d


class SufficientStats:
    """Allocation counts and per-component moments.

    ``counts[p, l]`` is the number of period-``p`` events on component ``l``;
    ``m``, ``ybar`` and ``scatter`` are pooled over periods.
    """

    def __init__(self, counts, ybar, scatter):
        self.counts = counts
        self.ybar = ybar
        self.scatter = scatter

    @property
    def m(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @classmethod
    def compute(cls, data: ModelData, z: np.ndarray, L: int) -> "SufficientStats":
        P = data.P
        counts = np.bincount(data.period * L + z, minlength=P * L).reshape(P, L)
        ybar = np.zeros((L, 2))
        scatter = np.zeros((L, 2, 2))
        for l in range(L):
            _, ybar[l], scatter[l] = _moments(data.xy[z == l])
        return cls(counts, ybar, scatter)

    def move(self, data: ModelData, z: np.ndarray, i: int, new: int) -> None:
        """Reassign event ``i`` to ``new``, mutating ``z`` and the statistics."""
        old = int(z[i])
        if old == new:
            return
        p = data.period[i]
        self.counts[p, old] -= 1
        self.counts[p, new] += 1
        z[i] = new
        for l in (old, new):
            _, self.ybar[l], self.scatter[l] = _moments(data.xy[z == l])

    def equals(self, other: "SufficientStats") -> bool:
        return (
            np.array_equal(self.counts, other.counts)
            and np.array_equal(self.ybar, other.ybar)
            and np.array_equal(self.scatter, other.scatter)
        )


# ---------------------------------------------------------------------------
# random variates
# ---------------------------------------------------------------------------


def log_gamma_variate(shape, rng) -> np.ndarray:
    """``log`` of standard Gamma variates, stable for shapes far below one."""
    shape = np.asarray(shape, dtype=float)
    small = shape < 1.0
    g = rng.standard_gamma(np.where(small, shape + 1.0, shape))
    out = np.log(g)
    if np.any(small):
        u = rng.uniform(size=shape.shape)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(small, out + np.log(u) / np.where(small, shape, 1.0), out)
    return out


def gamma_variate(shape, rate, rng):
    return np.maximum(np.exp(log_gamma_variate(shape, rng)) / rate, TINY)


def sample_dirichlet(params, rng) -> np.ndarray:
    """Dirichlet draw through normalised log-Gamma variates, floored at ``TINY``."""
    params = np.asarray(params, dtype=float)
    if params.size == 1:
        return np.ones(1)
    lg = log_gamma_variate(params, rng)
    w = np.exp(lg - lg.max())
    w /= w.sum()
    w = np.maximum(w, TINY)
    return w / w.sum()


def sample_categorical(logw: np.ndarray, rng) -> np.ndarray:
    """One draw per row of unnormalised log weights ``(N, L)``."""
    if logw.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    mx = logw.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(mx)):
        raise NumericalError("all allocation weights vanish or are non-finite")
    w = np.exp(logw - mx)
    cum = np.cumsum(w, axis=1)
    u = rng.uniform(size=logw.shape[0]) * cum[:, -1]
    z = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(z, logw.shape[1] - 1).astype(np.int64)


def _chol2(c: np.ndarray) -> np.ndarray:
    l11 = math.sqrt(c[0, 0])
    l21 = c[1, 0] / l11
    return np.array([[l11, 0.0], [l21, math.sqrt(c[1, 1] - l21 * l21)]])


def sample_niw(niw: NIWParams, rng, mu_domain: Optional[SpatialWindow] = None, max_tries=MAX_TRUNCATION_TRIES):
    """Draw ``(mean, cov)``; with ``mu_domain`` redraw until the mean lies inside it."""
    return sample_niw_arrays(niw.mu0_arr, niw.eta, niw.sigma0_arr, niw.nu, rng, mu_domain, max_tries)


def sample_niw_arrays(mu0, eta, sigma0, nu, rng, mu_domain=None, max_tries=MAX_TRUNCATION_TRIES):
    """:func:`sample_niw` on raw parameters (no validation)."""
    prec_chol = _chol2(inv2(sigma0))
    for _ in range(max_tries):
        a11 = math.sqrt(rng.chisquare(nu))
        a22 = math.sqrt(rng.chisquare(nu - 1.0))
        a21 = rng.standard_normal()
        ca = prec_chol @ np.array([[a11, 0.0], [a21, a22]])
        cov = symmetrize(inv2(ca @ ca.T))
        mean = mu0 + _chol2(cov / eta) @ rng.standard_normal(2)
        if mu_domain is None or mu_domain.contains(mean[0], mean[1]):
            return mean, cov
    raise NumericalError(f"truncated NIW draw exceeded {max_tries} rejections")


def niw_posterior_arrays(mu0, eta, sigma0, nu, m: int, ybar, scatter) -> tuple:
    """Conjugate update as raw ``(mu_n, eta_n, sigma_n, nu_n)``."""
    if m == 0:
        return np.array(mu0, dtype=float), float(eta), np.array(sigma0, dtype=float), float(nu)
    eta_n = eta + m
    mu_n = (eta * mu0 + m * ybar) / eta_n
    d = ybar - mu0
    sigma_n = symmetrize(sigma0 + scatter + (eta * m / eta_n) * np.outer(d, d))
    return mu_n, eta_n, sigma_n, nu + m


def niw_posterior(niw: NIWParams, m: int, ybar: np.ndarray, scatter: np.ndarray) -> NIWParams:
    """Conjugate update given ``m`` points with mean ``ybar`` and scatter matrix ``scatter``."""
    if m == 0:
        return niw
    mu_n, eta_n, sigma_n, nu_n = niw_posterior_arrays(niw.mu0_arr, niw.eta, niw.sigma0_arr, niw.nu, m, ybar, scatter)
    return NIWParams(tuple(mu_n), eta_n, tuple(map(tuple, sigma_n)), nu_n)


# ---------------------------------------------------------------------------
# log densities
# ---------------------------------------------------------------------------


def gamma_logpdf(x, shape, rate):
    x = np.asarray(x, dtype=float)
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def dirichlet_logpdf(w, params) -> float:
    w = np.asarray(w, dtype=float)
    params = np.asarray(params, dtype=float)
    if w.size == 1:
        return 0.0
    # exactly rounded sums, so the value does not depend on component order
    fsum = math.fsum
    return float(gammaln(fsum(params))) - fsum(gammaln(params)) + fsum((params - 1.0) * np.log(w))


def niw_logpdf(mean, cov, niw: NIWParams) -> float:
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    psi = niw.sigma0_arr
    nu = niw.nu
    log_det_cov = math.log(float(det2(cov)))
    log_iw = (
        0.5 * nu * math.log(float(det2(psi)))
        - nu * math.log(2.0)
        - float(multigammaln(0.5 * nu, 2))
        - 0.5 * (nu + 3.0) * log_det_cov
        - 0.5 * float(np.trace(psi @ inv2(cov)))
    )
    log_normal = float(logpdf(mean[None, :], niw.mu0_arr[None, :], (cov / niw.eta)[None])[0, 0])
    return log_iw + log_normal


def component_logpdf(state: LatentState, points) -> np.ndarray:
    """``(N, L)`` log densities of ``points`` under each component."""
    return logpdf(points, state.mu, state.cov)


def mixture_density(state: LatentState, p: int, x, y):
    """``f_p(x, y)``; broadcasts over ``x`` and ``y``."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    pts = np.column_stack([x.ravel(), y.ravel()])
    dens = np.exp(component_logpdf(state, pts)) @ state.beta[p]
    return dens.reshape(x.shape)


def _check_gamma(state: LatentState):
    if np.any(state.gamma <= 0):
        raise ValueError("rates gamma must be positive")


def log_likelihood(state: LatentState, data: ModelData) -> float:
    """Poisson process log likelihood with each ``f_p`` marginalised over allocations."""
    _check_gamma(state)
    out = float(np.sum(-state.gamma * data.lengths + data.counts * np.log(state.gamma)))
    if data.N:
        lp = component_logpdf(state, data.xy) + np.log(state.beta[data.period])
        out += float(logsumexp(lp, axis=1).sum())
    return out


def log_likelihood_allocated(state: LatentState, data: ModelData) -> float:
    """Log likelihood with every event evaluated on its allocated component only."""
    _check_gamma(state)
    out = float(np.sum(-state.gamma * data.lengths + data.counts * np.log(state.gamma)))
    if data.N:
        lp = component_logpdf(state, data.xy)
        out += float(lp[np.arange(data.N), state.z].sum())
    return out


def _in_support(state: LatentState, hyper: Hyperparams, data: ModelData) -> bool:
    if state.alpha.shape != (hyper.P,) or state.beta.shape != (hyper.P, hyper.L):
        return False
    if not (np.all(state.alpha > 0) and np.all(state.gamma > 0) and np.all(np.isfinite(state.alpha))):
        return False
    if not np.all(state.beta > 0) or not np.allclose(state.beta.sum(axis=1), 1.0, rtol=0, atol=1e-9):
        return False
    if not is_spd(state.cov):
        return False
    if state.z.shape != (data.N,) or (data.N and (state.z.min() < 0 or state.z.max() >= hyper.L)):
        return False
    if hyper.mu_domain is not None and not np.all(hyper.mu_domain.contains(state.mu[:, 0], state.mu[:, 1])):
        return False
    return True


def log_alpha_chain_prior(alpha, alpha0) -> float:
    out = float(gamma_logpdf(alpha[0], alpha0, 1.0))
    if alpha.size > 1:
        out += float(np.sum(gamma_logpdf(alpha[1:], alpha[:-1], 1.0)))
    return out


def log_beta_chain_prior(alpha, beta) -> float:
    # concentrations are floored at TINY exactly as in the sampler's conditionals
    L = beta.shape[1]
    out = dirichlet_logpdf(beta[0], np.full(L, max(alpha[0] / L, TINY)))
    for p in range(1, beta.shape[0]):
        out += dirichlet_logpdf(beta[p], np.maximum(alpha[p] * beta[p - 1], TINY))
    return out


def log_prior(state: LatentState, data: ModelData, hyper: Hyperparams) -> float:
    """All prior terms, including the categorical allocation term."""
    out = log_alpha_chain_prior(state.alpha, hyper.alpha0)
    out += log_beta_chain_prior(state.alpha, state.beta)
    out += math.fsum(niw_logpdf(state.mu[l], state.cov[l], hyper.niw) for l in range(hyper.L))
    if data.N:
        out += float(np.log(state.beta[data.period, state.z]).sum())
    out += float(np.sum(gamma_logpdf(state.gamma, hyper.gamma0 * hyper.k, hyper.k)))
    return out


def log_unnormalized_posterior(state: LatentState, data: ModelData, hyper: Hyperparams) -> float:
    """Joint log density of all latent variables and the data; ``-inf`` off support."""
    if not _in_support(state, hyper, data):
        return -math.inf
    return log_prior(state, data, hyper) + log_likelihood_allocated(state, data)


def draw_prior_state(hyper: Hyperparams, data: ModelData, rng) -> LatentState:
    """Ancestral draw from the prior (allocations drawn for the events in ``data``)."""
    P, L = hyper.P, hyper.L
    alpha = np.empty(P)
    beta = np.empty((P, L))
    alpha[0] = gamma_variate(hyper.alpha0, 1.0, rng)
    beta[0] = sample_dirichlet(np.full(L, alpha[0] / L), rng)
    for p in range(1, P):
        alpha[p] = gamma_variate(alpha[p - 1], 1.0, rng)
        beta[p] = sample_dirichlet(alpha[p] * beta[p - 1], rng)
    mu = np.empty((L, 2))
    cov = np.empty((L, 2, 2))
    for l in range(L):
        mu[l], cov[l] = sample_niw(hyper.niw, rng, hyper.mu_domain)
    gamma = np.asarray(gamma_variate(np.full(P, hyper.gamma0 * hyper.k), hyper.k, rng), dtype=float)
    z = sample_categorical(np.log(beta[data.period]), rng)
    return LatentState(alpha, beta, gamma, mu, cov, z)


def leaked_mass(state: LatentState, window: SpatialWindow) -> np.ndarray:
    """Per-period mixture mass falling outside ``window``."""
    from scipy.stats import multivariate_normal

    inside = np.empty(state.L)
    for l in range(state.L):
        mvn = multivariate_normal(state.mu[l], state.cov[l])
        f = mvn.cdf
        inside[l] = (
            f([window.x_max, window.y_max])
            - f([window.x_min, window.y_max])
            - f([window.x_max, window.y_min])
            + f([window.x_min, window.y_min])
        )
    return state.beta @ (1.0 - np.clip(inside, 0.0, 1.0))
