"""Entity embeddings (mean of window latents) and cosine similarity."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionMismatch, EmptyLatentList

log = logging.getLogger(__name__)

NORM_EPS = 1e-12


class DegenerateEmbeddingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EntityEmbedding:
    entity_id: str
    z: np.ndarray
    K: int


@dataclass
class SimilarityMatrix:
    entity_ids: list[str]
    S: np.ndarray
    degenerate: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entity_ids)

    def upper(self) -> np.ndarray:
        """Strict upper-triangle entries in row-major pair order."""
        return self.S[np.triu_indices(len(self), k=1)]


def aggregate(latents, entity_id: str = "") -> EntityEmbedding:
    """Arithmetic mean of one entity's window latents."""
    H = np.asarray(latents, dtype=np.float64)
    if H.size == 0:
        raise EmptyLatentList(f"{entity_id or 'entity'}: no latent vectors to aggregate")
    H = H.reshape(len(H), -1)
    return EntityEmbedding(entity_id, H.mean(axis=0), len(H))


def aggregate_batch(latents: np.ndarray, entity_ids: list[str]) -> list[EntityEmbedding]:
    """Group rows of ``latents`` by ``entity_ids`` and average each group."""
    ids = np.asarray(entity_ids)
    return [aggregate(latents[ids == e], e) for e in sorted(set(entity_ids))]


def cosine(zi, zj) -> tuple[float, bool]:
    """Cosine similarity and a degeneracy flag (either norm below 1e-12 gives 0)."""
    zi = np.asarray(zi, dtype=np.float64)
    zj = np.asarray(zj, dtype=np.float64)
    ni, nj = np.linalg.norm(zi), np.linalg.norm(zj)
    if ni < NORM_EPS or nj < NORM_EPS:
        return 0.0, True
    return float(np.clip(zi @ zj / (ni * nj), -1.0, 1.0)), False


def similarity_matrix(embeddings: list[EntityEmbedding]) -> SimilarityMatrix:
    """Full symmetric cosine matrix. Zero-norm embeddings get similarity 0
    everywhere (diagonal included) and are listed in ``degenerate``."""
    if len(embeddings) < 2:
        raise DataError("similarity_matrix needs at least two embeddings")
    k = {np.shape(e.z) for e in embeddings}
    if len(k) != 1:
        raise DimensionMismatch(f"embeddings have inconsistent shapes {sorted(k)}")
    Z = np.array([e.z for e in embeddings], dtype=np.float64)
    norms = np.linalg.norm(Z, axis=1)
    bad = norms < NORM_EPS
    U = Z / np.where(bad, 1.0, norms)[:, None]
    U[bad] = 0.0
    N = len(embeddings)
    S = np.zeros((N, N))
    iu = np.triu_indices(N, k=1)
    S[iu] = np.clip(np.einsum("ij,ij->i", U[iu[0]], U[iu[1]]), -1.0, 1.0)
    S = S + S.T
    S[np.diag_indices(N)] = np.where(bad, 0.0, 1.0)
    degenerate = [e.entity_id for e, b in zip(embeddings, bad) if b]
    if degenerate:
        warnings.warn(f"zero-norm embeddings: {degenerate}", DegenerateEmbeddingWarning, stacklevel=2)
    return SimilarityMatrix([e.entity_id for e in embeddings], S, degenerate)


def write_embeddings_csv(embeddings: list[EntityEmbedding], path: str | Path) -> None:
    k = len(embeddings[0].z) if embeddings else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity_id", "K"] + [f"z_{i}" for i in range(k)])
        for e in embeddings:
            w.writerow([e.entity_id, e.K] + [repr(float(v)) for v in e.z])


def read_embeddings_csv(path: str | Path) -> list[EntityEmbedding]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return [EntityEmbedding(r[0], np.array([float(v) for v in r[2:]]), int(r[1])) for r in rows[1:]]


def write_similarity_csv(sim: SimilarityMatrix, path: str | Path) -> None:
    """Square matrix with entity ids as first row and first column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + sim.entity_ids)
        for e, row in zip(sim.entity_ids, sim.S):
            w.writerow([e] + [repr(float(v)) for v in row])


def read_similarity_csv(path: str | Path) -> SimilarityMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    ids = rows[0][1:]
    S = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return SimilarityMatrix(ids, S)


def write_similarity_long(sim: SimilarityMatrix, path: str | Path) -> None:
    """Long form ``i,j,s_ij`` over all ordered pairs (heat-map input)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "s_ij"])
        for a, ea in enumerate(sim.entity_ids):
            for b, eb in enumerate(sim.entity_ids):
                w.writerow([ea, eb, repr(float(sim.S[a, b]))])
