"""Givens-rotation orthogonal fine-tuning.

Thin Python layer over the C++ core. Matrices are numpy float64 arrays with
one sample per column, matching the C++ API.
"""

import json

from ._goft import (
    LAMBDA_GRID,
    PAIRING_RULE,
    Adapter,
    ConfigError,
    DegenerateInput,
    DivergenceError,
    GoftError,
    InvalidDimension,
    PreconditionError,
    ShapeError,
    align,
    apply_chain,
    apply_chain_transpose,
    apply_quasi,
    bench,
    cayley,
    chain_gradient,
    dense_matrix,
    make_task,
    plan,
    quasi_gradient,
    read_weights,
    transport,
    verify,
    write_weights,
)
from ._goft import train_json as _train_json

__version__ = "0.1.0"


def train(config):
    """Train from an experiment config dict (same schema as the CLI)."""
    return _train_json(json.dumps(config))


__all__ = [
    "LAMBDA_GRID",
    "PAIRING_RULE",
    "Adapter",
    "ConfigError",
    "DegenerateInput",
    "DivergenceError",
    "GoftError",
    "InvalidDimension",
    "PreconditionError",
    "ShapeError",
    "align",
    "apply_chain",
    "apply_chain_transpose",
    "apply_quasi",
    "bench",
    "cayley",
    "chain_gradient",
    "dense_matrix",
    "make_task",
    "plan",
    "quasi_gradient",
    "read_weights",
    "train",
    "transport",
    "verify",
    "write_weights",
]
