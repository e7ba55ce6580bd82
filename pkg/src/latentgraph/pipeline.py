"""In-process discovery: windows -> shared autoencoder -> embeddings -> similarity."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autoencoder import ModelParams, TrainConfig, TrainResult, encode_batched, train
from .embedding import EntityEmbedding, SimilarityMatrix, aggregate_batch, similarity_matrix
from .ingest import OhlcSeries, ReturnSeries, log_returns
from .windowing import WindowBatch, build_batch

log = logging.getLogger(__name__)


@dataclass
class Discovery:
    batch: WindowBatch
    fit: TrainResult
    latents: np.ndarray
    embeddings: list[EntityEmbedding]
    similarity: SimilarityMatrix


def embed(batch: WindowBatch, params: ModelParams) -> tuple[np.ndarray, list[EntityEmbedding]]:
    latents = encode_batched(batch.values, params)
    return latents, aggregate_batch(latents, batch.entity_ids)


def discover(
    returns: list[ReturnSeries],
    *,
    L: int = 30,
    stride: int = 1,
    norm: str = "zscore",
    hidden: int = 256,
    latent: int = 64,
    train_cfg: TrainConfig | None = None,
) -> Discovery:
    """Train one shared model on all entities and return the similarity matrix."""
    batch = build_batch(returns, L, stride, norm)
    log.info("training on %d windows from %d entities", len(batch), len(batch.counts))
    fit = train(batch, train_cfg, hidden=hidden, latent=latent)
    latents, embs = embed(batch, fit.params)
    return Discovery(batch, fit, latents, embs, similarity_matrix(embs))


def discover_from_config(returns: list[ReturnSeries], cfg, seed_offset: int = 0) -> Discovery:
    return discover(
        returns,
        L=cfg.window.length,
        stride=cfg.window.stride,
        norm=cfg.window.norm,
        hidden=cfg.model.hidden,
        latent=cfg.model.latent,
        train_cfg=cfg.train_config(seed_offset),
    )


def returns_of(series: list[OhlcSeries]) -> list[ReturnSeries]:
    return [log_returns(s) for s in series]


def log_close(series: list[OhlcSeries]) -> dict[str, np.ndarray]:
    return {s.entity_id: np.log(s.close) for s in series}
