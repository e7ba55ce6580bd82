"""Thresholded similarity graphs, topology summaries and serialisation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .embedding import SimilarityMatrix
from .errors import ConfigError, DataError

DEFAULT_THRESHOLD = 0.90


@dataclass
class SimilarityGraph:
    """Undirected weighted graph; edges are ``(i, j, w)`` node indices with ``i < j``."""

    nodes: list[str]
    edges: list[tuple[int, int, float]]
    threshold: float | None = None

    def edge_set(self) -> frozenset[tuple[str, str]]:
        return frozenset((self.nodes[i], self.nodes[j]) for i, j, _ in self.edges)

    def __len__(self) -> int:
        return len(self.edges)


@dataclass
class TopologyReport:
    edge_count: int
    component_count: int
    largest_component_size: int
    components: list[list[str]]
    degree: dict[str, int]
    isolated: list[str]
    hubs: list[tuple[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "edge_count": self.edge_count,
            "component_count": self.component_count,
            "largest_component_size": self.largest_component_size,
            "components": self.components,
            "degree": self.degree,
            "isolated": self.isolated,
            "hubs": [list(h) for h in self.hubs],
        }


def induce(sim: SimilarityMatrix, threshold: float = DEFAULT_THRESHOLD) -> SimilarityGraph:
    """Keep every pair with ``s_ij >= threshold`` (inclusive)."""
    if not -1.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must lie in [-1, 1], got {threshold}")
    iu, ju = np.triu_indices(len(sim), k=1)
    w = sim.S[iu, ju]
    keep = w >= threshold
    edges = [(int(i), int(j), float(x)) for i, j, x in zip(iu[keep], ju[keep], w[keep])]
    return SimilarityGraph(list(sim.entity_ids), edges, float(threshold))


def top_edges(sim: SimilarityMatrix, m: int) -> SimilarityGraph:
    """The ``m`` heaviest pairs; ties broken by lexicographic ``(i, j)``."""
    iu, ju = np.triu_indices(len(sim), k=1)
    w = sim.S[iu, ju]
    order = np.lexsort((ju, iu, -w))[: max(0, int(m))]
    order = order[np.lexsort((ju[order], iu[order]))]
    edges = [(int(iu[n]), int(ju[n]), float(w[n])) for n in order]
    return SimilarityGraph(list(sim.entity_ids), edges, None)


def topology(g: SimilarityGraph, n_hubs: int = 3) -> TopologyReport:
    N = len(g.nodes)
    deg = np.zeros(N, dtype=int)
    for i, j, _ in g.edges:
        deg[i] += 1
        deg[j] += 1
    if N:
        rows = [e[0] for e in g.edges]
        cols = [e[1] for e in g.edges]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N))
        n_comp, labels = connected_components(adj, directed=False)
    else:
        n_comp, labels = 0, np.zeros(0, dtype=int)
    groups: dict[int, list[str]] = {}
    for idx, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(g.nodes[idx])
    # largest first, then by first member for a stable order
    comps = sorted(groups.values(), key=lambda c: (-len(c), g.nodes.index(c[0])))
    by_degree = sorted(range(N), key=lambda i: (-deg[i], i))
    return TopologyReport(
        edge_count=len(g.edges),
        component_count=int(n_comp),
        largest_component_size=max((len(c) for c in comps), default=0),
        components=comps,
        degree={n: int(deg[i]) for i, n in enumerate(g.nodes)},
        isolated=[n for i, n in enumerate(g.nodes) if deg[i] == 0],
        hubs=[(g.nodes[i], int(deg[i])) for i in by_degree[:n_hubs] if deg[i] > 0],
    )


# ---------------------------------------------------------------------------
# serialisation


def to_json(g: SimilarityGraph) -> str:
    doc = {
        "nodes": g.nodes,
        "threshold": g.threshold,
        "edges": [{"i": i, "j": j, "w": w} for i, j, w in g.edges],
    }
    return json.dumps(doc, indent=2) + "\n"


def from_json(text: str) -> SimilarityGraph:
    doc = json.loads(text)
    edges = [(int(e["i"]), int(e["j"]), float(e["w"])) for e in doc["edges"]]
    return SimilarityGraph(list(doc["nodes"]), edges, doc.get("threshold"))


def to_dot(g: SimilarityGraph) -> str:
    lines = ["graph similarity {"]
    for n in g.nodes:
        lines.append(f'  "{n}";')
    for i, j, w in g.edges:
        lines.append(f'  "{g.nodes[i]}" -- "{g.nodes[j]}" [weight={w!r}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_edge_csv(g: SimilarityGraph) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "weight"])
    for i, j, x in g.edges:
        w.writerow([g.nodes[i], g.nodes[j], repr(x)])
    return buf.getvalue()


def from_edge_csv(text: str, nodes: list[str], threshold: float | None = None) -> SimilarityGraph:
    """Edge CSV carries names only, so the node universe is supplied."""
    index = {n: k for k, n in enumerate(nodes)}
    rows = list(csv.reader(io.StringIO(text)))
    edges = []
    for r in rows[1:]:
        a, b = index[r[0]], index[r[1]]
        edges.append((min(a, b), max(a, b), float(r[2])))
    return SimilarityGraph(list(nodes), sorted(edges), threshold)


FORMATS = {"json": to_json, "dot": to_dot, "edge-csv": to_edge_csv}


def export(g: SimilarityGraph, path: str | Path, fmt: str = "json") -> Path:
    if fmt not in FORMATS:
        raise DataError(f"unknown graph format {fmt!r}; choose from {sorted(FORMATS)}")
    path = Path(path)
    path.write_text(FORMATS[fmt](g), encoding="utf-8")
    return path


def load_graph(path: str | Path) -> SimilarityGraph:
    return from_json(Path(path).read_text(encoding="utf-8"))
