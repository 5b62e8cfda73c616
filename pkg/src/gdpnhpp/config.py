"""Run configuration: a versioned JSON document plus two bundled presets."""
from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .catalog import SpatialWindow, TimePartition, regular_partition
from .errors import ConfigError
from .intensity import SyntheticIntensity
from .model import Hyperparams
from .sampler import SamplerConfig

SCHEMA_VERSION = 1
PRESETS = ("synthetic-paper", "mexico-paper")


@dataclass(frozen=True)
class ClusterSettings:
    k: Optional[int] = None  # None selects k by the eigengap
    k_max: int = 12

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ConfigError(f"clustering.k must be >= 1, got {self.k}")
        if self.k_max < 2:
            raise ConfigError(f"clustering.k_max must be >= 2, got {self.k_max}")


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    window: SpatialWindow
    partition: TimePartition
    hyper: Hyperparams
    sampler: SamplerConfig
    catalog: Optional[str] = None
    synthetic: Optional[SyntheticIntensity] = None
    simulation_seed: int = 0
    grid: tuple = (100, 100)
    clustering: ClusterSettings = field(default_factory=ClusterSettings)
    output_dir: str = "out"
    on_outside: str = "error"
    time_origin: Optional[str] = None  # calendar date of t = 0, informational

    def __post_init__(self):
        if self.catalog is None and self.synthetic is None:
            raise ConfigError("catalog: give a catalog path or a synthetic spec")
        if self.partition.P != self.hyper.P:
            raise ConfigError(f"partition: {self.partition.P} periods but hyper.P = {self.hyper.P}")
        if self.on_outside not in ("error", "drop"):
            raise ConfigError("on_outside must be 'error' or 'drop'")
        nx, ny = self.grid
        if nx < 2 or ny < 2:
            raise ConfigError("grid: need at least 2 nodes per axis")

    @property
    def horizon(self) -> float:
        return self.partition.horizon

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "window": self.window.to_dict(),
            "horizon": self.horizon,
            "time_origin": self.time_origin,
            "partition": {"breakpoints": list(self.partition.breakpoints)},
            "catalog": self.catalog,
            "on_outside": self.on_outside,
            "synthetic": None if self.synthetic is None else self.synthetic.to_dict(),
            "simulation_seed": self.simulation_seed,
            "hyper": self.hyper.to_dict(),
            "sampler": self.sampler.to_dict(),
            "grid": {"nx": self.grid[0], "ny": self.grid[1]},
            "clustering": {"k": self.clustering.k, "k_max": self.clustering.k_max},
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Optional[Path] = None) -> "RunConfig":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
        try:
            window = _section("window", SpatialWindow.from_dict, d)
            horizon = _horizon(d.get("horizon"))
            partition = _partition(d.get("partition"), horizon)
            hyper = d.get("hyper")
            if not isinstance(hyper, dict):
                raise ConfigError("hyper: section missing")
            hyper = dict(hyper)
            hyper.setdefault("P", partition.P)
            try:
                hyper = Hyperparams.from_dict(hyper)
            except ConfigError as e:
                raise ConfigError(f"hyper.{e}") from None
            sampler = _section("sampler", SamplerConfig.from_dict, d, default={})
            synthetic = d.get("synthetic")
            if synthetic is not None:
                synthetic = _section("synthetic", SyntheticIntensity.from_dict, d)
            catalog = d.get("catalog")
            if catalog is not None and base_dir is not None and not Path(catalog).is_absolute():
                catalog = str((base_dir / catalog).resolve())
            g = d.get("grid", {"nx": 100, "ny": 100})
            grid = (int(g["nx"]), int(g["ny"])) if isinstance(g, dict) else tuple(int(v) for v in g)
            c = d.get("clustering") or {}
            clustering = ClusterSettings(k=c.get("k"), k_max=int(c.get("k_max", 12)))
            return cls(
                experiment=str(d.get("experiment", "run")),
                window=window,
                partition=partition,
                hyper=hyper,
                sampler=sampler,
                catalog=catalog,
                synthetic=synthetic,
                simulation_seed=int(d.get("simulation_seed", 0)),
                grid=grid,
                clustering=clustering,
                output_dir=str(d.get("output_dir", "out")),
                on_outside=d.get("on_outside", "error"),
                time_origin=d.get("time_origin"),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid config: {e}") from None

    def with_overrides(
        self, seed=None, simulation_seed=None, k=None, grid=None, output_dir=None, catalog=None, sampler=None
    ) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, sampler=replace(cfg.sampler, seed=int(seed)))
        if simulation_seed is not None:
            cfg = replace(cfg, simulation_seed=int(simulation_seed))
        if sampler:
            try:
                cfg = replace(cfg, sampler=replace(cfg.sampler, **sampler))
            except ConfigError:
                raise
            except TypeError as e:
                raise ConfigError(f"sampler: {e}") from None
        if catalog is not None:
            cfg = replace(cfg, catalog=str(catalog))
        if k is not None:
            cfg = replace(cfg, clustering=ClusterSettings(k=int(k), k_max=cfg.clustering.k_max))
        if grid is not None:
            cfg = replace(cfg, grid=tuple(grid))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _section(name, parse, d, default=None):
    if name not in d or d[name] is None:
        if default is None:
            raise ConfigError(f"{name}: section missing")
        return parse(default)
    try:
        return parse(d[name])
    except ConfigError as e:
        msg = str(e)
        raise ConfigError(msg if msg.startswith(name) else f"{name}: {msg}") from None
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{name}: {e}") from None


def _horizon(h) -> float:
    if isinstance(h, dict):
        try:
            start = _dt.date.fromisoformat(h["start"])
            end = _dt.date.fromisoformat(h["end"])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"horizon: {e}") from None
        h = (end - start).days
    if not isinstance(h, (int, float)) or not h > 0:
        raise ConfigError(f"horizon must be positive, got {h!r}")
    return float(h)


def _partition(p, horizon: float) -> TimePartition:
    if isinstance(p, int):
        p = {"P": p}
    if not isinstance(p, dict):
        raise ConfigError("partition: give P or breakpoints")
    try:
        if "breakpoints" in p:
            part = TimePartition(tuple(p["breakpoints"]))
            if part.horizon != horizon:
                raise ConfigError(f"partition: last breakpoint {part.horizon} != horizon {horizon}")
            return part
        return regular_partition(horizon, int(p["P"]))
    except (KeyError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"partition: {e}") from None


def preset_path(name: str):
    return resources.files("gdpnhpp.presets").joinpath(f"{name}.json")


def load_config(source) -> RunConfig:
    """Load a config from a JSON path or a bundled preset name."""
    src = str(source)
    if src in PRESETS:
        text = preset_path(src).read_text()
        base = None
    else:
        path = Path(src)
        if not path.is_file():
            raise ConfigError(f"config: no such file or preset {src!r}")
        text = path.read_text()
        base = path.parent.resolve()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON ({e})") from None
    return RunConfig.from_dict(d, base_dir=base)
