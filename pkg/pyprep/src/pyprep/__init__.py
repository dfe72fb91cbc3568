"""Corpus conversion and figure rendering companion to the classifier package."""

from .convert import convert_cwru
from .errors import ChannelNotFoundError, MissingFilesError, PrepError, PrepFormatError
from .manifest import CLASS_NAMES, LABEL_SCHEME, MANIFEST, Recording
from .plots import plot_curves, plot_tsne

__all__ = [
    "CLASS_NAMES",
    "ChannelNotFoundError",
    "LABEL_SCHEME",
    "MANIFEST",
    "MissingFilesError",
    "PrepError",
    "PrepFormatError",
    "Recording",
    "convert_cwru",
    "plot_curves",
    "plot_tsne",
]
