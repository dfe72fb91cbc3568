"""Transformer classifier for raw vibration signals, gradients written by hand."""

from .errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    ContractError,
    DataError,
    FileFormatError,
    ShapeError,
    ShapeMismatchError,
    TruncatedFileError,
    TsvitError,
)
from .model import TsvitConfig, TsvitModel, init_model, load_checkpoint, save_checkpoint
from .tensor import Rng

__all__ = [
    "BadMagicError",
    "BadVersionError",
    "ConfigError",
    "ContractError",
    "DataError",
    "FileFormatError",
    "Rng",
    "ShapeError",
    "ShapeMismatchError",
    "TruncatedFileError",
    "TsvitConfig",
    "TsvitModel",
    "TsvitError",
    "init_model",
    "load_checkpoint",
    "save_checkpoint",
]
