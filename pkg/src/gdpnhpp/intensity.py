"""Ground-truth space-time intensities and NHPP simulation by thinning.

An intensity has the form

    lambda(x, y, t) = rate(t) * (h(t) g1(x, y) + (1 - h(t)) g2(x, y))

with ``rate`` piecewise constant in time, ``h`` a weight in ``[0, 1]`` and
``g1``, ``g2`` spatial densities.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .catalog import Catalog, SpatialWindow
from .errors import NumericalError
from .gaussian import GaussianComponent, logpdf

__all__ = [
    "PiecewiseRate",
    "LogisticWeight",
    "ConstantWeight",
    "GaussianMixture2D",
    "UniformDensity",
    "SyntheticIntensity",
    "benchmark_intensity",
    "eval_intensity",
    "upper_bound",
    "simulate_thinning",
]

BOUND_SAFETY = 1.05


@dataclass(frozen=True)
class PiecewiseRate:
    """``values[i]`` applies on ``[breakpoints[i], breakpoints[i+1])``; the last piece is closed."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        v = tuple(float(x) for x in self.values)
        if len(b) != len(v) + 1 or len(v) == 0:
            raise ValueError("need len(breakpoints) == len(values) + 1")
        if any(not (hi > lo) for lo, hi in zip(b[:-1], b[1:])):
            raise ValueError("rate breakpoints must be strictly increasing")
        if any(x < 0 or not math.isfinite(x) for x in v):
            raise ValueError("rates must be finite and nonnegative")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.breakpoints[1:-1]), t, side="right")
        return np.asarray(self.values)[idx]

    def max(self) -> float:
        return max(self.values)

    def scaled(self, factor: float) -> "PiecewiseRate":
        return PiecewiseRate(self.breakpoints, tuple(factor * v for v in self.values))

    def to_dict(self):
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}


@dataclass(frozen=True)
class LogisticWeight:
    """``h(t) = 1 / (1 + exp(-(t - midpoint) / scale))``."""

    midpoint: float
    scale: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 * (1.0 + np.tanh(0.5 * (t - self.midpoint) / self.scale))

    def to_dict(self):
        return {"kind": "logistic", "midpoint": self.midpoint, "scale": self.scale}


@dataclass(frozen=True)
class ConstantWeight:
    value: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("constant weight must lie in [0, 1]")

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value))

    def to_dict(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class GaussianMixture2D:
    weights: tuple
    components: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        comps = tuple(
            c if isinstance(c, GaussianComponent) else GaussianComponent(*c) for c in self.components
        )
        if len(w) != len(comps) or not w:
            raise ValueError("one weight per component required")
        if any(v < 0 for v in w) or not math.isclose(sum(w), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"mixture weights must be nonnegative and sum to 1, got {w}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @property
    def covs(self) -> np.ndarray:
        return np.array([c.cov for c in self.components])

    def component_pdfs(self, x, y) -> np.ndarray:
        """Weighted component densities, shape ``(N, K)``."""
        pts = np.column_stack([np.ravel(x), np.ravel(y)])
        return np.exp(logpdf(pts, self.means, self.covs)) * np.asarray(self.weights)

    def pdf(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return self.component_pdfs(x, y).sum(axis=1).reshape(x.shape)

    def peak_bound(self, window: SpatialWindow = None) -> float:
        return sum(w * c.peak() for w, c in zip(self.weights, self.components))

    def to_dict(self):
        return {
            "kind": "gaussian_mixture",
            "weights": list(self.weights),
            "means": [list(c.mean) for c in self.components],
            "covs": [[list(r) for r in c.cov] for c in self.components],
        }


@dataclass(frozen=True)
class UniformDensity:
    """Uniform density on a rectangle (used for homogeneous processes)."""

    window: SpatialWindow

    @property
    def components(self):
        return (self,)

    def component_pdfs(self, x, y) -> np.ndarray:
        return self.pdf(np.ravel(x), np.ravel(y)).reshape(-1, 1)

    def pdf(self, x, y):
        inside = self.window.contains(x, y)
        return np.where(inside, 1.0 / self.window.area, 0.0)

    def peak_bound(self, window: SpatialWindow = None) -> float:
        return 1.0 / self.window.area

    def to_dict(self):
        return {"kind": "uniform", "window": self.window.to_dict()}


SpatialDensity = Union[GaussianMixture2D, UniformDensity]


@dataclass(frozen=True)
class SyntheticIntensity:
    rate: PiecewiseRate
    weight: Union[LogisticWeight, ConstantWeight]
    g1: SpatialDensity
    g2: SpatialDensity = field(default=None)

    def __post_init__(self):
        if self.g2 is None:
            object.__setattr__(self, "g2", self.g1)

    @property
    def horizon(self) -> float:
        return self.rate.breakpoints[-1]

    def with_rate(self, rate: PiecewiseRate) -> "SyntheticIntensity":
        return SyntheticIntensity(rate, self.weight, self.g1, self.g2)

    def to_dict(self) -> dict:
        return {
            "rate": self.rate.to_dict(),
            "weight": self.weight.to_dict(),
            "g1": self.g1.to_dict(),
            "g2": self.g2.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticIntensity":
        rate = PiecewiseRate(tuple(d["rate"]["breakpoints"]), tuple(d["rate"]["values"]))
        w = d.get("weight", {"kind": "constant", "value": 1.0})
        if w["kind"] == "logistic":
            weight = LogisticWeight(float(w["midpoint"]), float(w["scale"]))
        elif w["kind"] == "constant":
            weight = ConstantWeight(float(w.get("value", 1.0)))
        else:
            raise ValueError(f"unknown weight kind {w['kind']!r}")
        g1 = _density_from_dict(d["g1"])
        g2 = _density_from_dict(d["g2"]) if d.get("g2") is not None else None
        return cls(rate, weight, g1, g2)

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _density_from_dict(d: dict) -> SpatialDensity:
    kind = d.get("kind", "gaussian_mixture")
    if kind == "uniform":
        return UniformDensity(SpatialWindow.from_dict(d["window"]))
    if kind == "gaussian_mixture":
        comps = [GaussianComponent(m, c) for m, c in zip(d["means"], d["covs"])]
        return GaussianMixture2D(tuple(d["weights"]), tuple(comps))
    raise ValueError(f"unknown spatial density kind {kind!r}")


def benchmark_intensity(horizon: float = 10.0) -> SyntheticIntensity:
    """Two-regime test intensity: rate 50 then 100 per unit time, drifting between two mixtures."""
    eye = ((1.0, 0.0), (0.0, 1.0))
    g1 = GaussianMixture2D(
        (2 / 3, 1 / 3), (GaussianComponent((0.0, 0.0), eye), GaussianComponent((2.0, 2.0), eye))
    )
    g2 = GaussianMixture2D(
        (2 / 3, 1 / 3), (GaussianComponent((6.0, 2.0), eye), GaussianComponent((4.0, 6.0), eye))
    )
    half = horizon / 2.0
    rate = PiecewiseRate((0.0, half, horizon), (50.0, 100.0))
    return SyntheticIntensity(rate, LogisticWeight(midpoint=horizon, scale=2.0), g1, g2)


def _check_times(spec: SyntheticIntensity, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > spec.horizon)):
        raise ValueError(f"time outside [0, {spec.horizon}]")
    return t


def eval_intensity(spec: SyntheticIntensity, x, y, t):
    """Intensity in events per day per unit area; broadcasts over inputs."""
    x, y, t = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), _check_times(spec, t)
    )
    h = spec.weight(t)
    spatial = h * spec.g1.pdf(x, y) + (1.0 - h) * spec.g2.pdf(x, y)
    return spec.rate(t) * spatial


def upper_bound(spec: SyntheticIntensity, window: SpatialWindow, horizon: float) -> float:
    """Dominating constant for thinning.

    Peak rate times the larger of the two spatial peak bounds (a mixture's
    density never exceeds the weighted sum of its component peaks), padded by
    5%.
    """
    peak = max(spec.g1.peak_bound(window), spec.g2.peak_bound(window))
    return BOUND_SAFETY * spec.rate.max() * peak


def simulate_thinning(
    spec: SyntheticIntensity,
    window: SpatialWindow,
    horizon: float,
    seed,
    return_labels: bool = False,
):
    """Simulate the NHPP restricted to ``window x [0, horizon]``.

    Candidates come from a homogeneous process at the dominating rate and are
    kept with probability ``lambda / B``. With ``return_labels`` every kept
    event is also assigned the mixture component that generated it (indices
    run over ``g1`` components first, then ``g2``).
    """
    if horizon > spec.horizon:
        raise ValueError("simulation horizon exceeds the rate schedule")
    rng = np.random.default_rng(seed)
    bound = upper_bound(spec, window, horizon)
    n_cand = rng.poisson(bound * window.area * horizon) if bound > 0 else 0
    x = rng.uniform(window.x_min, window.x_max, n_cand)
    y = rng.uniform(window.y_min, window.y_max, n_cand)
    t = rng.uniform(0.0, horizon, n_cand)
    u = rng.uniform(0.0, 1.0, n_cand)
    lam = eval_intensity(spec, x, y, t) if n_cand else np.empty(0)
    if np.any(lam > bound):
        raise NumericalError("thinning bound violated by the intensity")
    keep = u * bound < lam
    x, y, t = x[keep], y[keep], t[keep]
    order = np.argsort(t, kind="stable")
    x, y, t = x[order], y[order], t[order]
    catalog = Catalog(np.column_stack([x, y]), t, window, horizon)
    if not return_labels:
        return catalog

    h = spec.weight(t)[:, None]
    contrib = np.hstack([h * spec.g1.component_pdfs(x, y), (1.0 - h) * spec.g2.component_pdfs(x, y)])
    if len(t):
        cum = np.cumsum(contrib, axis=1)
        draws = rng.uniform(0.0, 1.0, len(t)) * cum[:, -1]
        labels = (cum < draws[:, None]).sum(axis=1)
    else:
        labels = np.empty(0, dtype=np.int64)
    return catalog, labels.astype(np.int64)
