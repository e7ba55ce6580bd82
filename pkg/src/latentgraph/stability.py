"""Robustness checks: block re-estimation, edge overlap, rank agreement, sweeps."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .embedding import SimilarityMatrix
from .errors import BlockTooShort, DegenerateInput, DimensionMismatch
from .graph import SimilarityGraph, induce, top_edges, topology
from .ingest import ReturnSeries
from .pipeline import discover_from_config

log = logging.getLogger(__name__)

Edge = tuple[str, str]


@dataclass
class BlockSpec:
    """Contiguous, ordered, disjoint ``[start, stop)`` row ranges."""

    boundaries: list[tuple[int, int]]

    def __post_init__(self):
        prev = None
        for a, b in self.boundaries:
            if b <= a or (prev is not None and a < prev):
                raise BlockTooShort(len(self.boundaries), f"invalid or overlapping block range ({a}, {b})")
            prev = b

    @property
    def block_count(self) -> int:
        return len(self.boundaries)

    @classmethod
    def equal(cls, T: int, B: int = 4) -> "BlockSpec":
        """``B`` equal contiguous blocks covering ``0..T``."""
        if B < 2:
            raise ValueError("need at least 2 blocks")
        edges = np.linspace(0, T, B + 1).round().astype(int)
        return cls([(int(edges[k]), int(edges[k + 1])) for k in range(B)])


@dataclass
class SweepRow:
    threshold: float
    edge_count: int
    component_count: int
    largest_component_size: int
    top_hub_degrees: list[int]


@dataclass
class StabilityReport:
    blocks: list[tuple[int, int]]
    matched_edges: int
    pairwise_jaccard: np.ndarray
    rank_correlation: np.ndarray
    core_edges: list[Edge]
    sweep: list[SweepRow]
    block_edges: list[list[Edge]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "blocks": [list(b) for b in self.blocks],
            "matched_edges": self.matched_edges,
            "pairwise_jaccard": self.pairwise_jaccard.tolist(),
            "rank_correlation": self.rank_correlation.tolist(),
            "core_edges": [list(e) for e in self.core_edges],
            "block_edges": [[list(e) for e in b] for b in self.block_edges],
            "sweep": [r.__dict__ for r in self.sweep],
        }


def _canon(edges) -> set[Edge]:
    if isinstance(edges, SimilarityGraph):
        return set(edges.edge_set())
    return {tuple(sorted(e[:2])) for e in edges}


def jaccard(E1, E2) -> float:
    """``|E1 & E2| / |E1 | E2|``; two empty sets give 1."""
    a, b = _canon(E1), _canon(E2)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def rank_corr(S1: SimilarityMatrix | np.ndarray, S2: SimilarityMatrix | np.ndarray) -> float:
    """Spearman correlation of the strict upper triangles (average ranks for ties)."""
    ids1 = getattr(S1, "entity_ids", None)
    ids2 = getattr(S2, "entity_ids", None)
    if ids1 is not None and ids2 is not None and list(ids1) != list(ids2):
        raise DimensionMismatch("similarity matrices use different entity orderings")
    A = np.asarray(getattr(S1, "S", S1), dtype=np.float64)
    B = np.asarray(getattr(S2, "S", S2), dtype=np.float64)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    if A.shape[0] < 3:
        raise DimensionMismatch("rank correlation needs N >= 3")
    iu = np.triu_indices(A.shape[0], k=1)
    ra, rb = rankdata(A[iu]), rankdata(B[iu])
    ra -= ra.mean()
    rb -= rb.mean()
    den = np.sqrt((ra @ ra) * (rb @ rb))
    if den == 0:
        raise DegenerateInput("a similarity triangle is constant")
    return float(ra @ rb / den)


def core_edges(graphs: list) -> set[Edge]:
    """Edges present in strictly more than half of the graphs."""
    counts: dict[Edge, int] = {}
    for g in graphs:
        for e in _canon(g):
            counts[e] = counts.get(e, 0) + 1
    return {e for e, c in counts.items() if c > len(graphs) / 2}


def threshold_sweep(sim: SimilarityMatrix, thresholds) -> list[SweepRow]:
    rows = []
    for t in thresholds:
        rep = topology(induce(sim, float(t)))
        hubs = sorted(rep.degree.values(), reverse=True)[:3]
        rows.append(SweepRow(float(t), rep.edge_count, rep.component_count, rep.largest_component_size, hubs))
    return rows


@dataclass
class BlockEstimate:
    spec: BlockSpec
    similarities: list[SimilarityMatrix]
    graphs: list[SimilarityGraph]
    matched_edges: int


def block_reestimate(
    returns: list[ReturnSeries],
    spec: BlockSpec,
    cfg,
    *,
    matched_edges: int | None = None,
    vary_seed: bool | None = None,
) -> BlockEstimate:
    """Re-run the whole discovery pipeline on each time block.

    Block ``b`` trains with seed ``cfg.seed + b`` (or ``cfg.seed`` for every
    block when ``vary_seed`` is false). Graphs are cut at a common edge count:
    ``matched_edges`` if given, else ``cfg.stability.matched_edges``, else
    ``cfg.graph.matched_edges``, else the number of edges block 0 has at
    ``cfg.graph.threshold``.
    """
    if vary_seed is None:
        vary_seed = cfg.stability.vary_seed
    if matched_edges is None:
        matched_edges = cfg.stability.matched_edges
    if matched_edges is None:
        matched_edges = cfg.graph.matched_edges
    L = cfg.window.length
    for b, (start, stop) in enumerate(spec.boundaries):
        for s in returns:
            n = min(stop, len(s)) - start
            if n < L:
                raise BlockTooShort(b, f"{s.entity_id} has {max(n, 0)} rows in [{start}, {stop}), window length is {L}")
    sims = []
    for b, (start, stop) in enumerate(spec.boundaries):
        log.info("block %d: rows [%d, %d)", b, start, stop)
        part = [s.slice(start, stop) for s in returns]
        sims.append(discover_from_config(part, cfg, seed_offset=b if vary_seed else 0).similarity)
    if matched_edges is None:
        matched_edges = len(induce(sims[0], cfg.graph.threshold).edges)
    graphs = [top_edges(s, matched_edges) for s in sims]
    return BlockEstimate(spec, sims, graphs, matched_edges)


def stability_report(
    estimate: BlockEstimate, sweep_on: SimilarityMatrix | None = None, thresholds=None
) -> StabilityReport:
    """Pairwise agreement between blocks plus a threshold sweep.

    The sweep runs on ``sweep_on`` (typically the full-period matrix) or on
    block 0 when none is given.
    """
    B = len(estimate.graphs)
    J = np.ones((B, B))
    R = np.ones((B, B))
    for a in range(B):
        for b in range(a + 1, B):
            J[a, b] = J[b, a] = jaccard(estimate.graphs[a], estimate.graphs[b])
            try:
                R[a, b] = R[b, a] = rank_corr(estimate.similarities[a], estimate.similarities[b])
            except DegenerateInput:
                R[a, b] = R[b, a] = np.nan
    thresholds = thresholds if thresholds is not None else [0.80, 0.85, 0.90, 0.95]
    sweep = threshold_sweep(sweep_on if sweep_on is not None else estimate.similarities[0], sorted(thresholds))
    return StabilityReport(
        blocks=list(estimate.spec.boundaries),
        matched_edges=estimate.matched_edges,
        pairwise_jaccard=J,
        rank_correlation=R,
        core_edges=sorted(core_edges(estimate.graphs)),
        sweep=sweep,
        block_edges=[sorted(g.edge_set()) for g in estimate.graphs],
    )


def write_report_json(report: StabilityReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "edge_count", "component_count", "largest_component_size", "hub1", "hub2", "hub3"])
        for r in rows:
            hubs = (r.top_hub_degrees + [0, 0, 0])[:3]
            w.writerow([repr(r.threshold), r.edge_count, r.component_count, r.largest_component_size] + hubs)
