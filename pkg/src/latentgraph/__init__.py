"""Latent similarity networks over multivariate time series.

Windows of per-entity log returns are embedded by a shared LSTM
autoencoder, averaged per entity, compared by cosine similarity and
thresholded into a graph; Engle-Granger tests are available as a
post-hoc diagnostic on the discovered edges.
"""

__version__ = "0.1.0"

from .autoencoder import ModelParams, TrainConfig, decode, encode, train
from .embedding import aggregate, cosine, similarity_matrix
from .graph import induce, top_edges, topology
from .ingest import OhlcSeries, ReturnSeries, load_csv, log_returns
from .pipeline import discover
from .windowing import build_batch, segment, znorm_window

__all__ = [
    "ModelParams",
    "OhlcSeries",
    "ReturnSeries",
    "TrainConfig",
    "aggregate",
    "build_batch",
    "cosine",
    "decode",
    "discover",
    "encode",
    "induce",
    "load_csv",
    "log_returns",
    "segment",
    "similarity_matrix",
    "top_edges",
    "topology",
    "train",
    "znorm_window",
]
