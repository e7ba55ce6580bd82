"""Engle-Granger cointegration diagnostics for candidate pairs.

Two-step procedure: OLS of one log-price series on the other (with
intercept), then an augmented Dickey-Fuller regression without
deterministic terms on the residuals. Critical values are not taken from
published tables; :func:`calibrate_critical_values` simulates the null
distribution of the exact statistic computed here and caches the result.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConstantRegressor,
    DataError,
    LengthMismatch,
    MissingSeries,
    SeriesTooShort,
    SingularDesign,
)
from .graph import SimilarityGraph

log = logging.getLogger(__name__)

LEVELS = (0.90, 0.95, 0.99)


@dataclass
class OlsFit:
    alpha: float
    beta: float
    residuals: np.ndarray
    r_squared: float


@dataclass
class AdfResult:
    statistic: float
    lags_used: int
    n_obs: int
    regression: str = "constant"


@dataclass
class EgResult:
    pair: tuple[str, str]
    direction: str
    statistic: float
    critical_value_95: float
    cointegrated: bool
    degenerate: bool = False
    statistics: dict[str, float] = field(default_factory=dict)
    critical_value: float | None = None
    confidence: float = 0.95


@dataclass
class DiagnosticsSummary:
    tested: int
    passed: int
    proportion: float
    empty: bool = False
    degenerate: int = 0


def ols(y, x) -> OlsFit:
    """Least-squares fit of ``y = alpha + beta * x``."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape != x.shape or y.ndim != 1:
        raise LengthMismatch(f"ols needs equal-length vectors, got {y.shape} and {x.shape}")
    if len(y) < 3:
        raise SeriesTooShort("ols needs at least 3 observations")
    xc = x - x.mean()
    sxx = xc @ xc
    if sxx <= 1e-14 * max(1.0, float(np.abs(x).max()) ** 2) * len(x):
        raise ConstantRegressor("regressor is constant")
    yc = y - y.mean()
    beta = float(xc @ yc / sxx)
    alpha = float(y.mean() - beta * x.mean())
    resid = yc - beta * xc
    syy = yc @ yc
    r2 = 1.0 - float(resid @ resid) / syy if syy > 0 else 1.0
    return OlsFit(alpha, beta, resid, r2)


def default_max_lags(T: int) -> int:
    """Schwert bound ``floor(12 * (T / 100) ** 0.25)``."""
    return int(math.floor(12.0 * (T / 100.0) ** 0.25))


def _lag_design(y: np.ndarray, p: int, regression: str, start: int):
    """ADF regression rows for t = start .. T-1 (indices into the difference series).

    Columns: lagged level, ``p`` lagged differences, optional constant.
    """
    dy = np.diff(y)
    rows = np.arange(start, len(dy))
    # dy[r] = y[r+1] - y[r], so y[r] is the lagged level for that row
    cols = [y[rows]]
    cols += [dy[rows - l] for l in range(1, p + 1)]
    if regression == "constant":
        cols.append(np.ones(len(rows)))
    return dy[rows], np.column_stack(cols)


def _tstat(yv: np.ndarray, X: np.ndarray) -> float:
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        raise SingularDesign("ADF design matrix is rank deficient")
    coef = np.linalg.solve(r, q.T @ yv)
    resid = yv - X @ coef
    dof = len(yv) - X.shape[1]
    s2 = resid @ resid / dof
    rinv = np.linalg.solve(r, np.eye(r.shape[0]))
    var0 = s2 * (rinv[0] @ rinv[0])
    if not var0 > 0:
        raise SingularDesign("zero residual variance in ADF regression")
    return float(coef[0] / math.sqrt(var0))


def adf(series, max_lags: int | None = None, regression: str = "constant", autolag: bool = True) -> AdfResult:
    """Augmented Dickey-Fuller t-ratio on the lagged level.

    The lag order is chosen by AIC over ``0..max_lags`` on a common sample,
    then the chosen model is refitted on all rows it can use.
    """
    y = np.asarray(series, dtype=np.float64)
    if regression not in ("none", "constant"):
        raise DataError(f"regression must be 'none' or 'constant', got {regression!r}")
    T = len(y)
    if max_lags is None:
        max_lags = min(default_max_lags(T), max(0, T // 2 - 12))
    if T <= max_lags + 10:
        raise SeriesTooShort(f"ADF needs more than max_lags + 10 = {max_lags + 10} points, got {T}")
    p = max_lags
    if autolag and max_lags > 0:
        dep, X = _lag_design(y, max_lags, regression, max_lags)
        n = len(dep)
        # nested models share one QR: RSS_j = |dep|^2 - sum_{i<j} (Q^T dep)_i^2
        order = [0] + ([X.shape[1] - 1] if regression == "constant" else []) + list(range(1, max_lags + 1))
        q, r = np.linalg.qr(X[:, order])
        qty = q.T @ dep
        base = 2 if regression == "constant" else 1
        rss = dep @ dep - np.cumsum(qty**2)
        best, best_aic = 0, np.inf
        for lag in range(max_lags + 1):
            k = base + lag
            r_k = max(float(rss[k - 1]), 1e-300)
            aic = n * math.log(r_k / n) + 2 * k
            if aic < best_aic - 1e-12:
                best, best_aic = lag, aic
        p = best
    dep, X = _lag_design(y, p, regression, p)
    stat = _tstat(dep, X)
    return AdfResult(stat, p, len(dep), regression)


def _eg_statistic(y: np.ndarray, x: np.ndarray, max_lags: int | None) -> tuple[float, OlsFit]:
    fit = ols(y, x)
    return adf(fit.residuals, max_lags=max_lags, regression="none").statistic, fit


def simulate_eg_null(T: int, trials: int, seed: int, max_lags: int | None = None) -> np.ndarray:
    """EG statistics for ``trials`` pairs of independent Gaussian random walks."""
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    for n in range(trials):
        walks = np.cumsum(rng.standard_normal((2, T)), axis=1)
        out[n] = _eg_statistic(walks[0], walks[1], max_lags)[0]
    return out


def simulate_adf_null(T: int, trials: int, seed: int, regression: str = "constant", max_lags: int | None = None) -> np.ndarray:
    """ADF statistics for ``trials`` independent Gaussian random walks."""
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    for n in range(trials):
        out[n] = adf(np.cumsum(rng.standard_normal(T)), max_lags, regression).statistic
    return out


def _quantiles(stats: np.ndarray) -> dict[str, float]:
    return {f"{lvl:.2f}": float(np.quantile(stats, 1.0 - lvl)) for lvl in LEVELS}


def _cached(path: Path | None, key: dict, compute) -> dict[str, float]:
    if path is not None and path.exists():
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("key") == key:
            return {k: float(v) for k, v in doc["critical_values"].items()}
    cv = compute()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"key": key, "critical_values": cv}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return cv


def calibrate_critical_values(
    T: int,
    trials: int = 10_000,
    seed: int = 0,
    *,
    cache_dir: str | Path | None = None,
    max_lags: int | None = None,
) -> dict[str, float]:
    """Left-tail EG critical values keyed ``"0.90"``, ``"0.95"``, ``"0.99"``.

    Cached as JSON under ``cache_dir`` keyed by ``(T, trials, seed)``.
    """
    key = {"test": "engle-granger", "T": int(T), "trials": int(trials), "seed": int(seed), "max_lags": max_lags}
    path = Path(cache_dir) / f"eg_T{T}_n{trials}_s{seed}.json" if cache_dir is not None else None
    return _cached(path, key, lambda: _quantiles(simulate_eg_null(T, trials, seed, max_lags)))


def calibrate_adf_critical_values(
    T: int,
    trials: int = 10_000,
    seed: int = 0,
    regression: str = "constant",
    *,
    cache_dir: str | Path | None = None,
    max_lags: int | None = None,
) -> dict[str, float]:
    key = {"test": "adf", "regression": regression, "T": int(T), "trials": int(trials), "seed": int(seed), "max_lags": max_lags}
    path = Path(cache_dir) / f"adf_{regression}_T{T}_n{trials}_s{seed}.json" if cache_dir is not None else None
    return _cached(path, key, lambda: _quantiles(simulate_adf_null(T, trials, seed, regression, max_lags)))


def engle_granger(
    x,
    y,
    confidence: float = 0.95,
    *,
    critical_values: dict[str, float] | None = None,
    names: tuple[str, str] = ("x", "y"),
    trials: int = 10_000,
    seed: int = 0,
    cache_dir: str | Path | None = None,
    max_lags: int | None = None,
) -> EgResult:
    """Two-direction Engle-Granger test on a pair of log-price series.

    Both ``y ~ x`` and ``x ~ y`` are fitted; the pair counts as cointegrated
    when the more negative residual ADF statistic falls below the calibrated
    critical value. An exact linear relation (zero residuals) is reported as
    degenerate and never as cointegrated.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"series lengths differ: {x.shape} vs {y.shape}")
    if len(x) < 100:
        raise SeriesTooShort(f"Engle-Granger needs at least 100 points, got {len(x)}")
    if critical_values is None:
        critical_values = calibrate_critical_values(len(x), trials, seed, cache_dir=cache_dir, max_lags=max_lags)
    level = f"{confidence:.2f}"
    if level not in critical_values:
        raise DataError(f"no critical value for confidence {confidence}")
    cv = critical_values[level]
    cv95 = critical_values.get("0.95", cv)
    a, b = names
    stats: dict[str, float] = {}
    for label, dep, reg in ((f"{b}~{a}", y, x), (f"{a}~{b}", x, y)):
        fit = ols(dep, reg)
        scale = max(float(np.abs(dep - dep.mean()).max()), 1e-300)
        if float(np.abs(fit.residuals).max()) <= 1e-10 * scale:
            return EgResult((a, b), label, float("nan"), cv95, False, True, {}, cv, confidence)
        stats[label] = adf(fit.residuals, max_lags=max_lags, regression="none").statistic
    direction = min(stats, key=lambda k: (stats[k], k))
    stat = stats[direction]
    return EgResult((a, b), direction, stat, cv95, bool(stat < cv), False, stats, cv, confidence)


def diagnose_graph(
    g: SimilarityGraph,
    log_prices: dict[str, np.ndarray],
    confidence: float = 0.95,
    *,
    critical_values: dict[str, float] | None = None,
    trials: int = 10_000,
    seed: int = 0,
    cache_dir: str | Path | None = None,
) -> tuple[DiagnosticsSummary, list[EgResult]]:
    """Run :func:`engle_granger` on exactly the graph's edges."""
    for n in g.nodes:
        if any(n in (g.nodes[i], g.nodes[j]) for i, j, _ in g.edges) and n not in log_prices:
            raise MissingSeries(n)
    if not g.edges:
        return DiagnosticsSummary(0, 0, 0.0, empty=True), []
    lengths = {len(log_prices[g.nodes[k]]) for e in g.edges for k in e[:2]}
    if critical_values is None:
        if len(lengths) != 1:
            raise LengthMismatch(f"candidate series have different lengths {sorted(lengths)}")
        critical_values = calibrate_critical_values(lengths.pop(), trials, seed, cache_dir=cache_dir)
    results = []
    for i, j, _ in g.edges:
        a, b = g.nodes[i], g.nodes[j]
        results.append(
            engle_granger(log_prices[a], log_prices[b], confidence, critical_values=critical_values, names=(a, b))
        )
    passed = sum(r.cointegrated for r in results)
    degenerate = sum(r.degenerate for r in results)
    return DiagnosticsSummary(len(results), passed, passed / len(results), False, degenerate), results


def write_results_csv(results: list[EgResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "direction", "stat", "cv95", "cointegrated"])
        for r in results:
            w.writerow([r.pair[0], r.pair[1], r.direction, repr(r.statistic), repr(r.critical_value_95), int(r.cointegrated)])


def summary_dict(summary: DiagnosticsSummary) -> dict:
    return asdict(summary)
