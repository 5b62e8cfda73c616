"""Time-varying background intensity of spatio-temporal Poisson processes.

The intensity is piecewise constant in time, ``gamma_p f_p(x, y)`` on period
``p``, where the densities ``f_p`` are Gaussian mixtures sharing their atoms
and with weights linked along a chain of Dirichlet processes.
"""
from .catalog import (
    Catalog,
    Event,
    SpatialWindow,
    TimePartition,
    assign_periods,
    load_catalog,
    partition_events,
    regular_partition,
    write_catalog,
)
from .clustering import SimilarityMatrix, dahl_select, eigengap_k, similarity_matrix, spectral_cluster
from .config import RunConfig, load_config
from .errors import CatalogError, ConfigError, NumericalError
from .intensity import SyntheticIntensity, eval_intensity, benchmark_intensity, simulate_thinning
from .model import (
    Hyperparams,
    LatentState,
    ModelData,
    NIWParams,
    SufficientStats,
    log_likelihood,
    log_prior,
    log_unnormalized_posterior,
    mixture_density,
)
from .relabel import Relabeling, apply_relabeling, relabel, select_pivot
from .sampler import PosteriorDraws, SamplerConfig, run_chain, sweep
from .summaries import GridSpec, IntensityField, gamma_summaries, intensity_draw, summarize_fields

__version__ = "0.1.0"
