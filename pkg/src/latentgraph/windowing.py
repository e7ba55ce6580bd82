"""Rolling-window segmentation and per-window feature normalisation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyBatch, SeriesTooShort
from .ingest import ReturnSeries

log = logging.getLogger(__name__)

EPS = 1e-12


@dataclass(frozen=True)
class Window:
    entity_id: str
    window_index: int
    values: np.ndarray


@dataclass
class WindowBatch:
    """Windows pooled across entities, stored as one ``(n, L, d)`` array.

    ``entity_ids[n]`` and ``window_index[n]`` give the provenance of row ``n``.
    """

    values: np.ndarray
    entity_ids: list[str]
    window_index: np.ndarray
    counts: dict[str, int]
    skipped: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def __iter__(self):
        for n in range(len(self)):
            yield Window(self.entity_ids[n], int(self.window_index[n]), self.values[n])

    @property
    def entities(self) -> list[str]:
        return list(self.counts)

    def rows_for(self, entity_id: str) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.entity_ids) == entity_id)


def segment(values: np.ndarray | ReturnSeries, L: int, stride: int = 1) -> np.ndarray:
    """Overlapping windows starting at 0, stride, 2*stride, ... as ``(n, L, d)``."""
    if isinstance(values, ReturnSeries):
        values = values.values
    values = np.asarray(values, dtype=np.float64)
    if L < 2 or stride < 1:
        raise ConfigError(f"need L >= 2 and stride >= 1, got L={L}, stride={stride}")
    T = values.shape[0]
    if T < L:
        raise SeriesTooShort(f"series of length {T} is shorter than window length {L}")
    starts = np.arange(0, T - L + 1, stride)
    view = np.lib.stride_tricks.sliding_window_view(values, L, axis=0)  # (T-L+1, d, L)
    return np.ascontiguousarray(view[starts].transpose(0, 2, 1))


def znorm_window(raw: np.ndarray) -> np.ndarray:
    """Column-wise z-score with sample std; near-constant columns become zero.

    Accepts a single ``(L, d)`` window or a stack ``(n, L, d)``.
    """
    raw = np.asarray(raw, dtype=np.float64)
    mu = raw.mean(axis=-2, keepdims=True)
    centered = raw - mu
    sd = np.sqrt((centered**2).sum(axis=-2, keepdims=True) / (raw.shape[-2] - 1))
    flat = sd < EPS
    out = centered / np.where(flat, 1.0, sd)
    return np.where(flat, 0.0, out)


def minmax_window(raw: np.ndarray) -> np.ndarray:
    """Column-wise rescale to [0, 1]; constant columns become zero."""
    raw = np.asarray(raw, dtype=np.float64)
    lo = raw.min(axis=-2, keepdims=True)
    span = raw.max(axis=-2, keepdims=True) - lo
    flat = span < EPS
    return np.where(flat, 0.0, (raw - lo) / np.where(flat, 1.0, span))


NORMALISERS = {"zscore": znorm_window, "minmax": minmax_window}


def build_batch(all_series: list[ReturnSeries], L: int = 30, stride: int = 1, norm: str = "zscore") -> WindowBatch:
    """Pool normalised windows from every series long enough to yield one.

    Ordering is entity id (lexicographic) then window index. Series shorter
    than ``L`` are logged and listed in ``WindowBatch.skipped``.
    """
    if norm not in NORMALISERS:
        raise ConfigError(f"unknown normalisation {norm!r}")
    normalise = NORMALISERS[norm]
    chunks, ids, idx, counts, skipped = [], [], [], {}, []
    for s in sorted(all_series, key=lambda s: s.entity_id):
        if len(s) < L:
            log.warning("skipping %s: %d rows < window length %d", s.entity_id, len(s), L)
            skipped.append(s.entity_id)
            continue
        w = normalise(segment(s.values, L, stride))
        chunks.append(w)
        ids.extend([s.entity_id] * len(w))
        idx.append(np.arange(len(w)))
        counts[s.entity_id] = len(w)
    if not chunks:
        raise EmptyBatch("no series long enough to produce a window")
    return WindowBatch(np.concatenate(chunks), ids, np.concatenate(idx), counts, skipped)
