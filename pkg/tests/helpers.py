"""Shared builders for small model instances."""
import numpy as np
from scipy import integrate
from scipy.stats import norm

from gdpnhpp.model import Hyperparams, LatentState, ModelData, NIWParams


def random_spd(rng, scale=1.0):
    a = rng.normal(size=(2, 2))
    return scale * (a @ a.T + 0.3 * np.eye(2))


def random_state(rng, P, L, N, period=None):
    alpha = rng.gamma(2.0, 1.0, P) + 0.1
    beta = rng.dirichlet(np.ones(L), P)
    gamma = rng.gamma(3.0, 1.0, P) + 0.1
    mu = rng.uniform(-2, 2, (L, 2))
    cov = np.array([random_spd(rng, 0.5) for _ in range(L)])
    z = rng.integers(0, L, N)
    return LatentState(alpha, beta, gamma, mu, cov, z)


def random_data(rng, P, N, lengths=None):
    lengths = np.full(P, 1.0) if lengths is None else np.asarray(lengths, dtype=float)
    period = np.sort(rng.integers(0, P, N))
    return ModelData(rng.uniform(-3, 3, (N, 2)), period, lengths)


def small_hyper(P, L, **kw):
    niw = kw.pop("niw", NIWParams((0.5, -0.5), 0.7, ((1.5, 0.2), (0.2, 0.9)), 5.0))
    base = dict(niw=niw, alpha0=2.0, gamma0=3.0, k=0.5, L=L, P=P)
    base.update(kw)
    return Hyperparams(**base)


def box_mass(mean, x0, x1, y0, y1):
    """Mass of a unit-covariance Gaussian in a rectangle (independent axes)."""
    return (norm.cdf(x1 - mean[0]) - norm.cdf(x0 - mean[0])) * (norm.cdf(y1 - mean[1]) - norm.cdf(y0 - mean[1]))


def expected_count_in_bin(spec, x0, x1, y0, y1, t0, t1):
    m1 = sum(w * box_mass(c.mean, x0, x1, y0, y1) for w, c in zip(spec.g1.weights, spec.g1.components))
    m2 = sum(w * box_mass(c.mean, x0, x1, y0, y1) for w, c in zip(spec.g2.weights, spec.g2.components))

    def f(t):
        h = float(spec.weight(t))
        return float(spec.rate(np.array([t]))[0]) * (h * m1 + (1 - h) * m2)

    pts = [5.0] if t0 < 5.0 < t1 else None
    val, _ = integrate.quad(f, t0, t1, points=pts, epsabs=1e-12, epsrel=1e-12)
    return val


def oracle_psi(points, niw: NIWParams):
    """Posterior NIW parameters from raw points, written out term by term."""
    mu0 = np.array(niw.mu0, dtype=float)
    m = len(points)
    if m == 0:
        return mu0, niw.eta, np.array(niw.sigma0, dtype=float), niw.nu
    ybar = np.zeros(2)
    for q in points:
        ybar += q
    ybar /= m
    S = np.zeros((2, 2))
    for q in points:
        d = (q - ybar).reshape(2, 1)
        S += d @ d.T
    d0 = (ybar - mu0).reshape(2, 1)
    sigma = np.array(niw.sigma0) + S + (niw.eta * m / (niw.eta + m)) * (d0 @ d0.T)
    return (niw.eta * mu0 + m * ybar) / (niw.eta + m), niw.eta + m, sigma, niw.nu + m
