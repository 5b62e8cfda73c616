"""JSON-lines draws files.

Layout: one ``header`` record, one ``draw`` record per retained state, an
``acceptance`` record, and optionally trailing provenance records (for
example ``relabeling``) appended by later pipeline stages.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import CatalogError
from .model import Hyperparams, LatentState
from .sampler import PosteriorDraws, SamplerConfig

FORMAT = "gdpnhpp-draws"
VERSION = 1


def catalog_digest(catalog) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(catalog.xy).tobytes())
    h.update(np.ascontiguousarray(catalog.t).tobytes())
    return h.hexdigest()[:16]


def write_draws(path, draws: PosteriorDraws, header: dict = None, extra_records=()) -> None:
    head = {
        "type": "header",
        "format": FORMAT,
        "version": VERSION,
        "seed": draws.seed,
        "config": None if draws.config is None else draws.config.to_dict(),
        "config_hash": draws.config_hash,
        "hyper": None if draws.hyper is None else draws.hyper.to_dict(),
    }
    head.update(header or {})
    with open(path, "w") as fh:
        fh.write(json.dumps(head) + "\n")
        for state, lp, s in zip(draws.draws, draws.log_post, draws.sweep_index):
            rec = {"type": "draw", "sweep": int(s), "log_post": float(lp)}
            rec.update(state.to_dict())
            fh.write(json.dumps(rec) + "\n")
        fh.write(json.dumps({"type": "acceptance", "rates": draws.acceptance, "meta": draws.meta}) + "\n")
        for rec in extra_records:
            fh.write(json.dumps(rec) + "\n")


def read_draws(path) -> tuple:
    """Return ``(PosteriorDraws, header, extra_records)``."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise CatalogError(f"{path}: no draws (empty file)")
    head = json.loads(lines[0])
    if head.get("type") != "header" or head.get("format") != FORMAT:
        raise CatalogError(f"{path}: not a draws file")
    states, log_post, sweeps = [], [], []
    acceptance, meta, extra = {}, {}, []
    for line in lines[1:]:
        if not line.strip():
            continue
        rec = json.loads(line)
        kind = rec.get("type")
        if kind == "draw":
            states.append(LatentState.from_dict(rec))
            log_post.append(rec["log_post"])
            sweeps.append(rec["sweep"])
        elif kind == "acceptance":
            acceptance = rec.get("rates", {})
            meta = rec.get("meta", {})
        else:
            extra.append(rec)
    draws = PosteriorDraws(
        draws=states,
        log_post=log_post,
        sweep_index=sweeps,
        acceptance=acceptance,
        seed=head.get("seed"),
        config=None if head.get("config") is None else SamplerConfig.from_dict(head["config"]),
        hyper=None if head.get("hyper") is None else Hyperparams.from_dict(head["hyper"]),
        meta=meta,
    )
    return draws, head, extra


def merge_draws(parts) -> PosteriorDraws:
    """Concatenate draws from several chains (in the given order)."""
    parts = list(parts)
    if not parts:
        raise ValueError("no draws")
    first = parts[0]
    return PosteriorDraws(
        draws=[s for p in parts for s in p.draws],
        log_post=[v for p in parts for v in p.log_post],
        sweep_index=[v for p in parts for v in p.sweep_index],
        acceptance=first.acceptance if len(parts) == 1 else {"chains": [p.acceptance for p in parts]},
        seed=first.seed,
        config=first.config,
        hyper=first.hyper,
        meta=first.meta if len(parts) == 1 else {"chains": len(parts)},
    )
