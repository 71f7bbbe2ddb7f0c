"""Extract mean-pooled layer representations of a frozen LM into LREP files."""

from .lrep import LrepDataset, read_lrep, write_lrep
from .pooling import masked_mean_layers
from .extract import ExtractionJob, encode_texts, extract

__all__ = [
    "ExtractionJob",
    "LrepDataset",
    "encode_texts",
    "extract",
    "masked_mean_layers",
    "read_lrep",
    "write_lrep",
]
