"""Posterior intensity maps, coefficient-of-variation transparency and rate summaries."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import SpatialWindow
from .model import LatentState, component_logpdf, leaked_mass, mixture_density

CREDIBLE_LEVELS = (50, 90, 95)


@dataclass(frozen=True)
class GridSpec:
    window: SpatialWindow
    nx: int = 100
    ny: int = 100

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 nodes per axis")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.window.x_min, self.window.x_max, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.window.y_min, self.window.y_max, self.ny)

    def nodes(self) -> np.ndarray:
        """``(ny * nx, 2)`` node coordinates, x varying fastest."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass
class IntensityField:
    """Per-period grids of shape ``(P, ny, nx)`` in events per day per unit area."""

    grid: GridSpec
    mean: np.ndarray
    sd: np.ndarray
    cv: np.ndarray
    transparency: np.ndarray
    n_draws: int

    @property
    def P(self) -> int:
        return self.mean.shape[0]

    def write_csv(self, path) -> None:
        xs, ys = self.grid.xs, self.grid.ys
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["period", "x", "y", "mean", "sd", "cv", "transparency"])
            for p in range(self.P):
                for iy, y in enumerate(ys):
                    for ix, x in enumerate(xs):
                        w.writerow(
                            [
                                p,
                                repr(float(x)),
                                repr(float(y)),
                                repr(float(self.mean[p, iy, ix])),
                                repr(float(self.sd[p, iy, ix])),
                                repr(float(self.cv[p, iy, ix])),
                                repr(float(self.transparency[p, iy, ix])),
                            ]
                        )


def intensity_draw(state: LatentState, p: int, x, y):
    """``gamma_p * f_p(x, y)`` for one posterior draw."""
    return state.gamma[p] * mixture_density(state, p, x, y)


def _grid_intensity(state: LatentState, nodes: np.ndarray) -> np.ndarray:
    dens = np.exp(component_logpdf(state, nodes)) @ state.beta.T  # (G, P)
    return (dens * state.gamma).T


def transparency_from_cv(cv: np.ndarray) -> np.ndarray:
    """``1 - (cv - min cv) / cv`` with the minimum over every node and period; 1 where cv is 0."""
    cv = np.asarray(cv, dtype=float)
    cmin = cv.min()
    out = np.ones_like(cv)
    pos = cv > 0
    out[pos] = 1.0 - (cv[pos] - cmin) / cv[pos]
    return out


def summarize_fields(draws, grid: GridSpec, partition=None) -> IntensityField:
    """Streaming (Welford) posterior mean and standard deviation of the intensity on ``grid``."""
    states = getattr(draws, "draws", draws)
    nodes = grid.nodes()
    n = 0
    mean = None
    m2 = None
    for state in states:
        val = _grid_intensity(state, nodes)
        n += 1
        if mean is None:
            mean = np.zeros_like(val)
            m2 = np.zeros_like(val)
        delta = val - mean
        mean += delta / n
        m2 += delta * (val - mean)
    if n == 0:
        raise ValueError("no draws")
    if partition is not None and mean.shape[0] != partition.P:
        raise ValueError("draws and partition disagree on the number of periods")
    sd = np.sqrt(np.maximum(m2 / n, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        cv = np.where(mean > 0, sd / mean, 0.0)
    shape = (mean.shape[0], grid.ny, grid.nx)
    return IntensityField(
        grid=grid,
        mean=mean.reshape(shape),
        sd=sd.reshape(shape),
        cv=cv.reshape(shape),
        transparency=transparency_from_cv(cv).reshape(shape),
        n_draws=n,
    )


def gamma_summaries(draws, bins: int = 30) -> list:
    """Per-period histogram, mean, sd and central credible intervals of ``gamma``."""
    states = getattr(draws, "draws", draws)
    g = np.array([s.gamma for s in states])
    if g.size == 0:
        raise ValueError("no draws")
    out = []
    for p in range(g.shape[1]):
        col = g[:, p]
        counts, edges = np.histogram(col, bins=bins)
        intervals = {}
        for level in CREDIBLE_LEVELS:
            tail = (100 - level) / 200.0
            lo, hi = np.quantile(col, [tail, 1.0 - tail])
            intervals[str(level)] = [float(lo), float(hi)]
        out.append(
            {
                "period": p,
                "mean": float(col.mean()),
                "sd": float(col.std()),
                "median": float(np.quantile(col, 0.5)),
                "intervals": intervals,
                "histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
            }
        )
    return out


def write_gamma_summaries(summaries: list, path) -> None:
    Path(path).write_text(json.dumps({"gamma": summaries}, indent=2))


def leakage_summary(draws, window: SpatialWindow, max_draws: int = 200) -> list:
    """Mean per-period mixture mass outside ``window`` over (a subsample of) the draws."""
    states = list(getattr(draws, "draws", draws))
    if not states:
        return []
    step = max(1, len(states) // max_draws)
    vals = np.array([leaked_mass(s, window) for s in states[::step]])
    return vals.mean(axis=0).tolist()
