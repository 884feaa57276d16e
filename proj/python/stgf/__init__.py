"""Traffic forecasting with a learned road graph and a graph-convolutional GRU."""

from ._core import (
    DEFAULT_SEED,
    Error,
    Model,
    calibrate_beta,
    fit,
    historical_average,
    learn_graph,
    learn_map_graph,
    load_model,
    metrics,
    normalize,
    normalize_with_self_loops,
    pairwise_distances,
    run_cli,
    sample_dropout_operator,
    smooth_graph_objective,
    synthetic_traffic,
    train_gvae,
    weight_density,
)

__all__ = [
    "DEFAULT_SEED",
    "Error",
    "Model",
    "calibrate_beta",
    "fit",
    "historical_average",
    "learn_graph",
    "learn_map_graph",
    "load_model",
    "metrics",
    "normalize",
    "normalize_with_self_loops",
    "pairwise_distances",
    "run_cli",
    "sample_dropout_operator",
    "smooth_graph_objective",
    "synthetic_traffic",
    "train_gvae",
    "weight_density",
]
