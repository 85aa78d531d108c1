"""Value-maximizing multi-label prediction sets with online conformal cost control."""

from ._core import (
    ABOVE_ALL,
    BELOW_ALL,
    ConfigError,
    DataError,
    EmptyDistributionError,
    KeyNotFoundError,
    OnlineController,
    QuantileTree,
    SetFunction,
    WeightUnderflowError,
    build_universe,
    generate,
    mnist_weights,
    oracle_threshold,
    prepare_sample,
    proxy,
    run_experiment,
)

__all__ = [
    "ABOVE_ALL",
    "BELOW_ALL",
    "ConfigError",
    "DataError",
    "EmptyDistributionError",
    "KeyNotFoundError",
    "OnlineController",
    "QuantileTree",
    "SetFunction",
    "WeightUnderflowError",
    "build_universe",
    "generate",
    "mnist_weights",
    "oracle_threshold",
    "prepare_sample",
    "proxy",
    "run_experiment",
]
