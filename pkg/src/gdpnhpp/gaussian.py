"""Closed-form bivariate Gaussian helpers.

Everything here is specialised to 2x2 covariances; determinants and inverses
are written out explicitly instead of going through LAPACK.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


def symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


def det2(cov: np.ndarray) -> np.ndarray:
    return cov[..., 0, 0] * cov[..., 1, 1] - cov[..., 0, 1] * cov[..., 1, 0]


def inv2(cov: np.ndarray) -> np.ndarray:
    d = det2(cov)
    out = np.empty_like(cov)
    out[..., 0, 0] = cov[..., 1, 1]
    out[..., 1, 1] = cov[..., 0, 0]
    out[..., 0, 1] = -cov[..., 0, 1]
    out[..., 1, 0] = -cov[..., 1, 0]
    return out / d[..., None, None]


def is_spd(cov: np.ndarray) -> bool:
    cov = np.asarray(cov, dtype=float)
    if cov.shape[-2:] != (2, 2) or not np.all(np.isfinite(cov)):
        return False
    if not np.allclose(cov, np.swapaxes(cov, -1, -2), rtol=1e-10, atol=1e-12):
        return False
    return bool(np.all(cov[..., 0, 0] > 0) and np.all(det2(cov) > 0))


def logpdf(points, means, covs) -> np.ndarray:
    """Log density of every point under every component.

    ``points`` is ``(N, 2)``, ``means`` ``(L, 2)`` and ``covs`` ``(L, 2, 2)``;
    the result is ``(N, L)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    means = np.atleast_2d(np.asarray(means, dtype=float))
    covs = np.asarray(covs, dtype=float).reshape(-1, 2, 2)
    det = det2(covs)
    prec = inv2(covs)
    dx = points[:, None, 0] - means[None, :, 0]
    dy = points[:, None, 1] - means[None, :, 1]
    quad = prec[:, 0, 0] * dx * dx + 2.0 * prec[:, 0, 1] * dx * dy + prec[:, 1, 1] * dy * dy
    return -LOG_2PI - 0.5 * np.log(det) - 0.5 * quad


def peak_density(cov) -> float:
    """Value of the density at its mode."""
    return 1.0 / (2.0 * math.pi * math.sqrt(float(det2(np.asarray(cov, dtype=float)))))


@dataclass(frozen=True)
class GaussianComponent:
    mean: tuple
    cov: tuple

    def __post_init__(self):
        mean = tuple(float(v) for v in np.asarray(self.mean, dtype=float).reshape(2))
        cov_arr = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if not is_spd(cov_arr):
            raise ValueError(f"covariance is not symmetric positive definite: {cov_arr.tolist()}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", tuple(map(tuple, cov_arr.tolist())))

    def pdf(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        pts = np.column_stack([x.ravel(), y.ravel()])
        out = np.exp(logpdf(pts, [self.mean], [self.cov]))[:, 0]
        return out.reshape(x.shape)

    def peak(self) -> float:
        return peak_density(self.cov)
