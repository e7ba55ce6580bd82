"""Synthetic OHLC universes with planted clusters and cointegrated pairs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidRho, SpecInvalid
from .ingest import OhlcSeries, write_csv

BAR_MS = 3_600_000
T0_MS = 1_711_929_600_000  # 2024-04-01T00:00:00Z


@dataclass
class ClusterSpec:
    member_count: int
    loading_range: tuple[float, float] = (0.8, 1.2)
    noise: float = 0.2


@dataclass
class PairSpec:
    rho: float = 0.5
    noise: float = 0.01


@dataclass
class PlantedSpec:
    clusters: list[ClusterSpec] = field(default_factory=list)
    cointegrated_pairs: list[PairSpec] = field(default_factory=list)
    independent_count: int = 0
    T: int = 2000
    seed: int = 0
    vol: float = 0.01
    jitter: float = 0.2
    heavy_tails: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "PlantedSpec":
        doc = dict(doc)
        doc["clusters"] = [ClusterSpec(**{**c, "loading_range": tuple(c.get("loading_range", (0.8, 1.2)))}) for c in doc.get("clusters", [])]
        doc["cointegrated_pairs"] = [PairSpec(**p) for p in doc.get("cointegrated_pairs", [])]
        try:
            return cls(**doc)
        except TypeError as exc:
            raise SpecInvalid(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def n_entities(self) -> int:
        return sum(c.member_count for c in self.clusters) + 2 * len(self.cointegrated_pairs) + self.independent_count


@dataclass
class GroundTruth:
    clusters: list[list[str]]
    cointegrated_pairs: list[tuple[str, str]]
    independent: list[str] = field(default_factory=list)

    def within_cluster_pairs(self) -> set[frozenset[str]]:
        out = set()
        for c in self.clusters:
            for a in range(len(c)):
                for b in range(a + 1, len(c)):
                    out.add(frozenset((c[a], c[b])))
        return out

    def to_dict(self) -> dict:
        return {
            "clusters": self.clusters,
            "cointegrated_pairs": [list(p) for p in self.cointegrated_pairs],
            "independent": self.independent,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        return cls(doc["clusters"], [tuple(p) for p in doc["cointegrated_pairs"]], doc.get("independent", []))


def _shocks(rng: np.random.Generator, size, heavy_tails: bool) -> np.ndarray:
    if heavy_tails:
        # unit-variance Student t with 4 degrees of freedom
        return rng.standard_t(4, size=size) / np.sqrt(2.0)
    return rng.standard_normal(size)


def ohlc_from_log_close(
    entity_id: str, log_close: np.ndarray, rng: np.random.Generator, jitter: float = 0.2, t0: int = T0_MS
) -> OhlcSeries:
    """Wrap a log-close path in bars with bounded intra-bar jitter.

    Jitter scale is ``jitter`` times the std of the close-to-close log returns;
    high/low enclose open and close by construction.
    """
    log_close = np.asarray(log_close, dtype=np.float64)
    T = len(log_close)
    step_sd = float(np.std(np.diff(log_close))) if T > 2 else 0.0
    s = jitter * step_sd
    prev = np.concatenate([[log_close[0]], log_close[:-1]])
    log_open = prev + s * np.clip(rng.standard_normal(T), -3, 3)
    hi = np.maximum(log_open, log_close) + s * np.abs(np.clip(rng.standard_normal(T), -3, 3))
    lo = np.minimum(log_open, log_close) - s * np.abs(np.clip(rng.standard_normal(T), -3, 3))
    ts = t0 + BAR_MS * np.arange(T, dtype=np.int64)
    prices = np.exp(np.column_stack([log_open, hi, lo, log_close]))
    return OhlcSeries.from_matrix(entity_id, ts, prices)


def gen_cointegrated_pair(
    rho: float,
    noise: float,
    T: int,
    seed,
    *,
    vol: float = 0.01,
    jitter: float = 0.2,
    names: tuple[str, str] = ("x", "y"),
    heavy_tails: bool = False,
) -> tuple[OhlcSeries, OhlcSeries, tuple[str, str]]:
    """``log x`` is a random walk; ``log y = log x + u`` with AR(1) spread ``u``."""
    if not 0.0 < rho < 1.0:
        raise InvalidRho(f"rho must lie strictly inside (0, 1), got {rho}")
    if T < 500:
        raise SpecInvalid(f"cointegrated pair needs T >= 500, got {T}")
    rng = np.random.default_rng(seed)
    lx = np.log(100.0) + np.cumsum(vol * _shocks(rng, T, heavy_tails))
    eps = noise * _shocks(rng, T, heavy_tails)
    u = np.empty(T)
    u[0] = eps[0] / np.sqrt(1.0 - rho**2)
    for t in range(1, T):
        u[t] = rho * u[t - 1] + eps[t]
    ly = lx + u
    return ohlc_from_log_close(names[0], lx, rng, jitter), ohlc_from_log_close(names[1], ly, rng, jitter), names


def gen_factor_cluster(
    members: int,
    loadings: tuple[float, float] = (0.8, 1.2),
    noise: float = 0.2,
    T: int = 2000,
    seed=None,
    *,
    vol: float = 0.01,
    jitter: float = 0.2,
    prefix: str = "c",
    heavy_tails: bool = False,
) -> list[OhlcSeries]:
    """Members share one factor: ``r_i = vol * (loading_i * f + noise * e_i)``.

    ``T`` is the number of bars (``T - 1`` returns).
    """
    if members < 2:
        raise SpecInvalid(f"a cluster needs at least 2 members, got {members}")
    rng = np.random.default_rng(seed)
    f = _shocks(rng, T - 1, heavy_tails)
    lo, hi = loadings
    load = rng.uniform(lo, hi, size=members)
    out = []
    for m in range(members):
        r = vol * (load[m] * f + noise * _shocks(rng, T - 1, heavy_tails))
        lc = np.log(100.0) + np.concatenate([[0.0], np.cumsum(r)])
        out.append(ohlc_from_log_close(f"{prefix}_{m:02d}", lc, rng, jitter))
    return out


def gen_universe(spec: PlantedSpec) -> tuple[list[OhlcSeries], GroundTruth]:
    """Clusters, cointegrated pairs and independent random walks with unique ids.

    Every component draws from its own child seed of ``spec.seed``.
    """
    if spec.n_entities < 2 or spec.independent_count < 0 or spec.T < 2:
        raise SpecInvalid(f"spec must describe at least 2 entities over T >= 2 bars ({spec.n_entities} given)")
    for p in spec.cointegrated_pairs:
        if not 0.0 < p.rho < 1.0:
            raise InvalidRho(f"rho must lie strictly inside (0, 1), got {p.rho}")
    children = np.random.SeedSequence(spec.seed).spawn(len(spec.clusters) + len(spec.cointegrated_pairs) + 1)
    series: list[OhlcSeries] = []
    clusters, pairs = [], []
    k = 0
    for ci, c in enumerate(spec.clusters):
        members = gen_factor_cluster(
            c.member_count, c.loading_range, c.noise, spec.T, children[k],
            vol=spec.vol, jitter=spec.jitter, prefix=f"clu{ci}", heavy_tails=spec.heavy_tails,
        )
        k += 1
        series += members
        clusters.append([s.entity_id for s in members])
    for pi, p in enumerate(spec.cointegrated_pairs):
        names = (f"pair{pi}_a", f"pair{pi}_b")
        a, b, _ = gen_cointegrated_pair(
            p.rho, p.noise, spec.T, children[k], vol=spec.vol, jitter=spec.jitter, names=names, heavy_tails=spec.heavy_tails
        )
        k += 1
        series += [a, b]
        pairs.append(names)
    rng = np.random.default_rng(children[k])
    independent = []
    for n in range(spec.independent_count):
        name = f"ind_{n:02d}"
        lc = np.log(100.0) + np.concatenate([[0.0], np.cumsum(spec.vol * _shocks(rng, spec.T - 1, spec.heavy_tails))])
        series.append(ohlc_from_log_close(name, lc, rng, spec.jitter))
        independent.append(name)
    return series, GroundTruth(clusters, pairs, independent)


def write_universe(series: list[OhlcSeries], truth: GroundTruth, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in series:
        write_csv(s, out / f"{s.entity_id}.csv")
    (out / "truth.json").write_text(json.dumps(truth.to_dict(), indent=2) + "\n", encoding="utf-8")
