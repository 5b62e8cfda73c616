"""Command line entry point: ``gdpnhpp {simulate,fit,relabel,summarize,cluster}``.

Every subcommand reads a run config (a JSON file or a bundled preset name),
writes plain-text outputs into ``--out`` and leaves the resolved config next
to them. Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
failure. Log verbosity comes from ``GDPNHPP_LOG_LEVEL`` (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .catalog import assign_periods, load_catalog, write_catalog
from .clustering import dahl_select, eigengap_k, laplacian_spectrum, similarity_matrix, spectral_cluster
from .config import RunConfig, load_config
from .drawsio import catalog_digest, merge_draws, read_draws, write_draws
from .errors import CatalogError, ConfigError, NumericalError
from .intensity import simulate_thinning
from .model import ModelData
from .relabel import apply_relabeling, relabel, trace_autocorrelation
from .sampler import Checkpoint, run_chain_data
from .summaries import GridSpec, gamma_summaries, leakage_summary, summarize_fields, write_gamma_summaries

logger = logging.getLogger("gdpnhpp")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
RESOLVED_CONFIG = "config.resolved.json"
SIMILARITY_DUMP_MAX_N = 5000


def chain_seeds(seed: int, chains: int) -> list:
    """One seed per chain; a single chain keeps ``seed`` itself."""
    if chains == 1:
        return [int(seed)]
    children = np.random.SeedSequence(int(seed)).spawn(chains)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _grid_arg(text: str) -> tuple:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NXxNY, got {text!r}") from None
    return nx, ny


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out if args.out else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_run_catalog(cfg: RunConfig, path=None):
    path = path or cfg.catalog
    if path is None:
        raise ConfigError("catalog: no catalog path given")
    if not Path(path).is_file():
        raise ConfigError(f"catalog: file {path} does not exist")
    return load_catalog(path, cfg.window, cfg.horizon, on_outside=cfg.on_outside), str(Path(path).resolve())


def _read_all_draws(paths):
    parts, heads, extras = [], [], []
    for p in paths:
        d, h, e = read_draws(p)
        parts.append(d)
        heads.append(h)
        extras.append(e)
    draws = merge_draws(parts)
    if len(draws) == 0:
        raise CatalogError("no draws")
    return draws, heads, extras


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    cfg = load_config(args.config).with_overrides(simulation_seed=args.seed)
    if cfg.synthetic is None:
        raise ConfigError("synthetic: simulate needs a synthetic intensity spec")
    out = _out_dir(args, cfg)
    catalog, labels = simulate_thinning(cfg.synthetic, cfg.window, cfg.horizon, cfg.simulation_seed, return_labels=True)
    path = out / "catalog.csv"
    write_catalog(
        catalog,
        path,
        comments=[
            f"experiment={cfg.experiment}",
            f"simulation_seed={cfg.simulation_seed}",
            f"intensity_spec={cfg.synthetic.spec_hash()}",
            f"window={json.dumps(cfg.window.to_dict(), sort_keys=True)}",
            f"horizon={cfg.horizon!r}",
        ],
    )
    with open(out / "catalog_labels.csv", "w") as fh:
        fh.write("event,component\n")
        for i, lab in enumerate(labels.tolist()):
            fh.write(f"{i},{lab}\n")
    cfg.with_overrides(catalog=path.resolve()).write(out / RESOLVED_CONFIG)
    logger.info("simulated %d events into %s", len(catalog), path)
    print(f"{len(catalog)} events -> {path}")
    return EXIT_OK


# --------------------------------------------------------------------- fit


def _fit_worker(payload):
    data, hyper, sampler, ckpt_path = payload
    return run_chain_data(data, hyper, sampler, checkpoint_path=ckpt_path)


def cmd_fit(args) -> int:
    base = load_config(args.config)
    overrides = {k: v for k, v in (("sweeps", args.sweeps), ("burn_in", args.burn_in), ("thin", args.thin)) if v is not None}
    cfg = base.with_overrides(seed=args.seed, sampler=overrides)
    out = _out_dir(args, cfg)
    if args.chains < 1:
        raise ConfigError("chains must be >= 1")

    catalog_path = args.catalog or cfg.catalog
    if catalog_path is None:
        if cfg.synthetic is None:
            raise ConfigError("catalog: give a catalog path or a synthetic spec")
        catalog = simulate_thinning(cfg.synthetic, cfg.window, cfg.horizon, cfg.simulation_seed)
        catalog_path = out / "catalog.csv"
        write_catalog(catalog, catalog_path, comments=[f"simulation_seed={cfg.simulation_seed}"])
    catalog, catalog_path = _load_run_catalog(cfg, catalog_path)
    cfg = cfg.with_overrides(catalog=catalog_path)
    data = ModelData.from_catalog(catalog, cfg.partition)
    header = {
        "experiment": cfg.experiment,
        "catalog_path": catalog_path,
        "catalog_hash": catalog_digest(catalog),
        "partition": list(cfg.partition.breakpoints),
        "window": cfg.window.to_dict(),
    }

    if args.resume:
        if args.chains != 1:
            raise ConfigError("--resume works on one chain at a time")
        ckpt = Checkpoint.load(args.resume)
        draws = run_chain_data(data, cfg.hyper, ckpt.config, checkpoint_path=args.resume, resume=ckpt)
        cfg = cfg.with_overrides(sampler=ckpt.config.to_dict())
        write_draws(out / "draws.jsonl", draws, header)
    elif args.chains == 1:
        draws = run_chain_data(data, cfg.hyper, cfg.sampler, checkpoint_path=out / "checkpoint.json")
        write_draws(out / "draws.jsonl", draws, header)
    else:
        seeds = chain_seeds(cfg.sampler.seed, args.chains)
        payloads = [
            (data, cfg.hyper, replace(cfg.sampler, seed=s), out / f"checkpoint-chain{i}.json")
            for i, s in enumerate(seeds)
        ]
        workers = min(args.chains, os.cpu_count() or 1)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_fit_worker, payloads))
        else:
            results = [_fit_worker(p) for p in payloads]
        for i, draws in enumerate(results):
            write_draws(out / f"draws-chain{i}.jsonl", draws, {**header, "chain": i, "chain_seeds": seeds})
    cfg.write(out / RESOLVED_CONFIG)
    print(f"draws -> {out}")
    return EXIT_OK


# ----------------------------------------------------------------- relabel


def cmd_relabel(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    draws, heads, _ = _read_all_draws(args.draws)
    rel = relabel(draws)
    new = apply_relabeling(draws, rel)
    record = {
        "type": "relabeling",
        "pivot_index": rel.pivot_index,
        "permutations": rel.permutations.tolist(),
        "mismatches": rel.mismatches.tolist(),
        "sources": [str(p) for p in args.draws],
    }
    write_draws(out / "draws-relabeled.jsonl", new, {k: v for k, v in heads[0].items() if k not in ("type", "format", "version")}, [record])
    acf = trace_autocorrelation(new, max_lag=args.max_lag)
    (out / "mu_trace_acf.json").write_text(json.dumps({"max_lag": args.max_lag, "acf": np.nan_to_num(acf, nan=0.0).tolist()}))
    cfg.write(out / RESOLVED_CONFIG)
    print(f"relabeled {len(new)} draws (pivot {rel.pivot_index}) -> {out / 'draws-relabeled.jsonl'}")
    return EXIT_OK


# --------------------------------------------------------------- summarize


def cmd_summarize(args) -> int:
    cfg = load_config(args.config).with_overrides(grid=args.grid)
    out = _out_dir(args, cfg)
    draws, _, _ = _read_all_draws(args.draws)
    grid = GridSpec(cfg.window, *cfg.grid)
    field = summarize_fields(draws, grid, cfg.partition)
    field.write_csv(out / "intensity_grid.csv")
    table = gamma_summaries(draws, bins=args.bins)
    write_gamma_summaries(table, out / "gamma_summary.json")
    leak = leakage_summary(draws, cfg.window)
    (out / "leakage.json").write_text(json.dumps({"mean_mass_outside_window": leak}, indent=2))
    cfg.write(out / RESOLVED_CONFIG)
    print(f"{field.P} period grids ({grid.nx}x{grid.ny}) and {len(table)} rate summaries -> {out}")
    return EXIT_OK


# ----------------------------------------------------------------- cluster


def cmd_cluster(args) -> int:
    cfg = load_config(args.config).with_overrides(k=args.k)
    out = _out_dir(args, cfg)
    draws, heads, _ = _read_all_draws(args.draws)
    catalog, _ = _load_run_catalog(cfg, args.catalog or heads[0].get("catalog_path"))
    expected = heads[0].get("catalog_hash")
    if expected is not None and expected != catalog_digest(catalog):
        raise CatalogError("catalog does not match the one the draws were fitted to")
    sim = similarity_matrix(draws)
    if sim.N != len(catalog):
        raise CatalogError("draws and catalog disagree on the number of events")
    if cfg.clustering.k is not None:
        k, source = cfg.clustering.k, "flag"
    else:
        k, source = eigengap_k(sim, cfg.clustering.k_max), "eigengap"
    k = min(k, sim.N)
    labels = spectral_cluster(sim, k)
    dahl_z, dahl_idx, dahl_loss = dahl_select(draws, sim)
    period = assign_periods(catalog.t, cfg.partition)
    with open(out / "clusters.csv", "w") as fh:
        fh.write("event,x,y,t,period,label\n")
        for i, ((x, y), t) in enumerate(zip(catalog.xy.tolist(), catalog.t.tolist())):
            fh.write(f"{i},{x!r},{y!r},{t!r},{int(period[i])},{int(labels[i])}\n")
    vals, _ = laplacian_spectrum(sim)
    summary = {
        "k": int(k),
        "k_source": source,
        "k_max": cfg.clustering.k_max,
        "laplacian_eigenvalues": vals[: cfg.clustering.k_max + 1].tolist(),
        "dahl_draw_index": int(dahl_idx),
        "dahl_loss": float(dahl_loss),
        "dahl_allocation": dahl_z.tolist(),
        "n_draws": sim.n_draws,
    }
    (out / "clustering.json").write_text(json.dumps(summary, indent=2))
    if args.dump_similarity:
        if sim.N > SIMILARITY_DUMP_MAX_N:
            logger.warning("similarity matrix not dumped: %d events exceed %d", sim.N, SIMILARITY_DUMP_MAX_N)
        else:
            np.savetxt(out / "similarity.txt", sim.values, fmt="%.6g")
    cfg.write(out / RESOLVED_CONFIG)
    print(f"k={k} ({source}) -> {out / 'clusters.csv'}")
    return EXIT_OK


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdpnhpp", description="Spatio-temporal Poisson intensity estimation with a graphical Dirichlet process mixture.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="config JSON path or preset name")
        p.add_argument("--out", help="output directory (default: the config's output_dir)")

    p = sub.add_parser("simulate", help="simulate a catalog by thinning")
    common(p)
    p.add_argument("--seed", type=int, help="simulation seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the MCMC sampler")
    common(p)
    p.add_argument("--seed", type=int, help="sampler seed")
    p.add_argument("--catalog", help="catalog file (overrides the config)")
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--resume", help="checkpoint file to continue from")
    p.add_argument("--sweeps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("relabel", help="undo label switching in a draws file")
    common(p)
    p.add_argument("--draws", nargs="+", required=True)
    p.add_argument("--max-lag", dest="max_lag", type=int, default=20)
    p.set_defaults(func=cmd_relabel)

    p = sub.add_parser("summarize", help="intensity grids and rate summaries")
    common(p)
    p.add_argument("--draws", nargs="+", required=True)
    p.add_argument("--grid", type=_grid_arg, help="grid resolution NXxNY")
    p.add_argument("--bins", type=int, default=30)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("cluster", help="cluster events from posterior allocations")
    common(p)
    p.add_argument("--draws", nargs="+", required=True)
    p.add_argument("--catalog", help="catalog file (default: the one recorded in the draws)")
    p.add_argument("--k", type=int, help="fixed number of clusters (skips the eigengap)")
    p.add_argument("--dump-similarity", dest="dump_similarity", action="store_true")
    p.set_defaults(func=cmd_cluster)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("GDPNHPP_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CatalogError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
