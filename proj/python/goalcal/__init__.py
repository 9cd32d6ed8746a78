"""Goal-oriented error estimates and Bayesian calibration of coarse/fine PDE model pairs."""

from ._goalcal import (
    ConfigError,
    EllipticPair,
    NonconvergenceError,
    NumericError,
    SolverError,
    TumorPair,
    git_blob_hash,
    parse_config,
    run,
)

__all__ = [
    "ConfigError",
    "EllipticPair",
    "NonconvergenceError",
    "NumericError",
    "SolverError",
    "TumorPair",
    "git_blob_hash",
    "parse_config",
    "run",
]
