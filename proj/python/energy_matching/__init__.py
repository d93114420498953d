"""Scalar-potential generative models with Langevin sampling.

Point sets are NumPy arrays of shape (n, d).
"""

from ._core import (
    ConfigError,
    ContractError,
    DimensionError,
    IoError,
    NumericalError,
    PotentialNet,
    config_keys,
    estimate_lid,
    exact_assignment,
    generate,
    hessian_eigenvalues,
    init_net,
    invert,
    landscape,
    load_checkpoint,
    sample,
    save_checkpoint,
    sinkhorn_plan,
    train,
    w2,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "IoError",
    "NumericalError",
    "PotentialNet",
    "config_keys",
    "estimate_lid",
    "exact_assignment",
    "generate",
    "hessian_eigenvalues",
    "init_net",
    "invert",
    "landscape",
    "load_checkpoint",
    "sample",
    "save_checkpoint",
    "sinkhorn_plan",
    "train",
    "w2",
]
