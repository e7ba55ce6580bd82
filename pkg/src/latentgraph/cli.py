"""Command-line driver. Every stage reads and writes files under ``--out-dir``.

Run directory layout::

    data/<entity>.csv        validated OHLC bars (ingest, fetch, synth)
    data/truth.json          planted structure (synth only)
    train/checkpoint.lgae    model weights + training config
    train/loss.csv           per-epoch loss
    embed/embeddings.csv     entity_id,K,z_0..z_{k-1}
    embed/similarity.csv     square cosine matrix
    embed/similarity_long.csv  i,j,s_ij
    graph/graph.json|graph.dot|edges.csv|topology.json
    stability/stability.json, stability/sweep.csv
    diagnose/eg_results.csv, diagnose/summary.json
    report/report.json, report/heatmap.csv, report/edges.csv
    cache/                   critical-value tables
    manifests/<stage>.json   config, seed and sha256 of inputs/outputs

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .autoencoder import load_checkpoint, save_checkpoint, train
from .config import PipelineConfig, load_config
from .diagnostics import calibrate_critical_values, default_max_lags, diagnose_graph, summary_dict, write_results_csv
from .embedding import (
    SimilarityMatrix,
    read_embeddings_csv,
    read_similarity_csv,
    similarity_matrix,
    write_embeddings_csv,
    write_similarity_csv,
    write_similarity_long,
)
from .errors import ConfigError, DataError, LatentGraphError
from .graph import export, induce, load_graph, top_edges, topology
from .ingest import OhlcSeries, fetch_klines, forward_fill, load_csv, log_returns, write_csv
from .pipeline import embed
from .stability import BlockSpec, block_reestimate, stability_report, write_report_json, write_sweep_csv
from .synth import PlantedSpec, gen_universe, write_universe
from .windowing import build_batch

log = logging.getLogger("latentgraph")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(run: Path, stage: str, cfg: PipelineConfig, inputs: list[Path], outputs: list[Path]) -> Path:
    doc = {
        "stage": stage,
        "tool_version": __version__,
        "seed": cfg.seed,
        "deterministic": cfg.deterministic,
        "config": cfg.to_dict(),
        "inputs": {str(p.relative_to(run)): _sha256(p) for p in sorted(inputs)},
        "outputs": {str(p.relative_to(run)): _sha256(p) for p in sorted(outputs)},
    }
    path = run / "manifests" / f"{stage}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _data_files(run: Path) -> list[Path]:
    files = sorted((run / "data").glob("*.csv"))
    if not files:
        raise DataError(f"no OHLC files in {run / 'data'}; run ingest, fetch or synth first")
    return files


def _load_series(run: Path) -> tuple[list[OhlcSeries], list[Path]]:
    files = _data_files(run)
    return [load_csv(f, f.stem) for f in files], files


def _aligned(series: list[OhlcSeries]) -> list[OhlcSeries]:
    """Restrict every series to the timestamps they all share."""
    common = series[0].timestamps
    for s in series[1:]:
        common = np.intersect1d(common, s.timestamps)
    out = []
    for s in series:
        idx = np.searchsorted(s.timestamps, common)
        out.append(OhlcSeries.from_matrix(s.entity_id, common, s.prices()[idx]))
    return out


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise DataError(f"missing {what}: {path}")
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args, cfg: PipelineConfig, run: Path) -> None:
    out = run / "data"
    out.mkdir(parents=True, exist_ok=True)
    inputs = []
    for item in args.inputs:
        p = Path(item)
        inputs += sorted(p.glob("*.csv")) if p.is_dir() else [p]
    if not inputs:
        raise DataError("no input CSV files given")
    written = []
    for f in inputs:
        s = load_csv(_require(f, "input file"), f.stem)
        if cfg.data.forward_fill and len(s) > 1:
            s = forward_fill(s, int(np.median(np.diff(s.timestamps))))
        write_csv(s, out / f"{s.entity_id}.csv")
        written.append(out / f"{s.entity_id}.csv")
    _write_manifest(run, "ingest", cfg, [], written)
    print(f"ingested {len(written)} series into {out}")


def cmd_fetch(args, cfg: PipelineConfig, run: Path) -> None:
    symbols = args.symbols or cfg.data.symbols
    if not symbols:
        raise ConfigError("no symbols given (use --symbols or data.symbols)")
    start = args.start if args.start is not None else cfg.data.start
    end = args.end if args.end is not None else cfg.data.end
    out = run / "data"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for sym in symbols:
        s = fetch_klines(
            args.endpoint or cfg.data.endpoint, sym, cfg.data.interval, start, end,
            limit=cfg.data.page_limit, gap_tolerance=cfg.data.gap_tolerance, fill=cfg.data.forward_fill,
        )
        write_csv(s, out / f"{sym}.csv")
        written.append(out / f"{sym}.csv")
    _write_manifest(run, "fetch", cfg, [], written)
    print(f"fetched {len(written)} series into {out}")


def cmd_synth(args, cfg: PipelineConfig, run: Path) -> None:
    if args.spec:
        spec = PlantedSpec.from_dict(json.loads(Path(_require(Path(args.spec), "spec file")).read_text()))
    else:
        spec = PlantedSpec.from_dict(
            {
                "clusters": [{"member_count": args.cluster_size, "noise": args.noise}] * args.clusters,
                "cointegrated_pairs": [{"rho": args.rho}] * args.pairs,
                "independent_count": args.independent,
                "T": args.bars,
                "seed": cfg.seed,
            }
        )
    series, truth = gen_universe(spec)
    write_universe(series, truth, run / "data")
    outputs = [run / "data" / f"{s.entity_id}.csv" for s in series] + [run / "data" / "truth.json"]
    _write_manifest(run, "synth", cfg, [], outputs)
    print(f"generated {len(series)} series into {run / 'data'}")


def cmd_train(args, cfg: PipelineConfig, run: Path) -> None:
    series, files = _load_series(run)
    batch = build_batch([log_returns(s) for s in series], cfg.window.length, cfg.window.stride, cfg.window.norm)
    for e in batch.skipped:
        print(f"warning: skipped {e} (too short)", file=sys.stderr)
    fit = train(batch, cfg.train_config(), hidden=cfg.model.hidden, latent=cfg.model.latent)
    out = run / "train"
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.lgae", fit)
    with open(out / "loss.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for k, v in enumerate(fit.losses, start=1):
            w.writerow([k, repr(v)])
    _write_manifest(run, "train", cfg, files, [out / "checkpoint.lgae", out / "loss.csv"])
    print(f"trained on {len(batch)} windows; final loss {fit.losses[-1]:.6g}")


def cmd_embed(args, cfg: PipelineConfig, run: Path) -> None:
    ckpt = _require(run / "train" / "checkpoint.lgae", "checkpoint")
    fit = load_checkpoint(ckpt)
    series, files = _load_series(run)
    batch = build_batch([log_returns(s) for s in series], cfg.window.length, cfg.window.stride, cfg.window.norm)
    _, embs = embed(batch, fit.params)
    sim = similarity_matrix(embs)
    out = run / "embed"
    out.mkdir(parents=True, exist_ok=True)
    write_embeddings_csv(embs, out / "embeddings.csv")
    write_similarity_csv(sim, out / "similarity.csv")
    write_similarity_long(sim, out / "similarity_long.csv")
    outputs = [out / "embeddings.csv", out / "similarity.csv", out / "similarity_long.csv"]
    _write_manifest(run, "embed", cfg, files + [ckpt], outputs)
    print(f"embedded {len(embs)} entities")


def _graph_from(sim: SimilarityMatrix, cfg: PipelineConfig, matched: int | None):
    m = matched if matched is not None else cfg.graph.matched_edges
    if m is not None:
        return top_edges(sim, m)
    return induce(sim, cfg.graph.threshold)


def cmd_graph(args, cfg: PipelineConfig, run: Path) -> None:
    src = _require(run / "embed" / "similarity.csv", "similarity matrix")
    if args.threshold is not None:
        cfg.graph.threshold = args.threshold
    g = _graph_from(read_similarity_csv(src), cfg, args.matched_edges)
    out = run / "graph"
    out.mkdir(parents=True, exist_ok=True)
    outputs = [
        export(g, out / "graph.json", "json"),
        export(g, out / "graph.dot", "dot"),
        export(g, out / "edges.csv", "edge-csv"),
    ]
    (out / "topology.json").write_text(json.dumps(topology(g).to_dict(), indent=2) + "\n", encoding="utf-8")
    outputs.append(out / "topology.json")
    _write_manifest(run, "graph", cfg, [src], outputs)
    print(f"graph with {len(g.edges)} edges over {len(g.nodes)} nodes")


def cmd_stability(args, cfg: PipelineConfig, run: Path) -> None:
    series, files = _load_series(run)
    returns = [log_returns(s) for s in _aligned(series)]
    blocks = args.blocks or cfg.stability.blocks
    spec = BlockSpec.equal(len(returns[0]), blocks)
    est = block_reestimate(returns, spec, cfg, matched_edges=args.matched_edges)
    sim_path = run / "embed" / "similarity.csv"
    full = read_similarity_csv(sim_path) if sim_path.exists() else None
    rep = stability_report(est, full, cfg.stability.sweep)
    out = run / "stability"
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(rep, out / "stability.json")
    write_sweep_csv(rep.sweep, out / "sweep.csv")
    inputs = files + ([sim_path] if full is not None else [])
    _write_manifest(run, "stability", cfg, inputs, [out / "stability.json", out / "sweep.csv"])
    print(f"{blocks} blocks, {len(rep.core_edges)} core edges at {rep.matched_edges} edges per block")


def cmd_diagnose(args, cfg: PipelineConfig, run: Path) -> None:
    gpath = _require(run / "graph" / "graph.json", "graph")
    g = load_graph(gpath)
    series, files = _load_series(run)
    aligned = _aligned([s for s in series if s.entity_id in set(g.nodes)])
    prices = {s.entity_id: np.log(s.close) for s in aligned}
    max_lags = None if cfg.diag.max_lags_policy == "schwert" else int(cfg.diag.max_lags_policy)
    cv = None
    if g.edges:
        T = len(aligned[0])
        cv = calibrate_critical_values(T, cfg.diag.trials, cfg.diag.seed, cache_dir=run / "cache", max_lags=max_lags)
    summary, results = diagnose_graph(g, prices, cfg.diag.confidence, critical_values=cv)
    out = run / "diagnose"
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, out / "eg_results.csv")
    doc = summary_dict(summary)
    doc["critical_values"] = cv
    doc["max_lags"] = default_max_lags(len(aligned[0])) if max_lags is None and aligned else max_lags
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(run, "diagnose", cfg, files + [gpath], [out / "eg_results.csv", out / "summary.json"])
    print(f"{summary.passed}/{summary.tested} candidate pairs cointegrated")


def cmd_report(args, cfg: PipelineConfig, run: Path) -> None:
    sim_path = _require(run / "embed" / "similarity.csv", "similarity matrix")
    gpath = _require(run / "graph" / "graph.json", "graph")
    sim = read_similarity_csv(sim_path)
    g = load_graph(gpath)
    doc: dict = {
        "tool_version": __version__,
        "seed": cfg.seed,
        "entities": sim.entity_ids,
        "similarity": sim.S.tolist(),
        "graph": {"threshold": g.threshold, "edges": [[g.nodes[i], g.nodes[j], w] for i, j, w in g.edges]},
        "topology": topology(g).to_dict(),
    }
    inputs = [sim_path, gpath]
    emb_path = run / "embed" / "embeddings.csv"
    if emb_path.exists():
        doc["embeddings"] = {e.entity_id: {"K": e.K, "z": e.z.tolist()} for e in read_embeddings_csv(emb_path)}
        inputs.append(emb_path)
    for key, rel in (("stability", "stability/stability.json"), ("diagnostics", "diagnose/summary.json")):
        p = run / rel
        if p.exists():
            doc[key] = json.loads(p.read_text(encoding="utf-8"))
            inputs.append(p)
    loss = run / "train" / "loss.csv"
    if loss.exists():
        with open(loss, newline="") as fh:
            doc["train_loss"] = [float(r["loss"]) for r in csv.DictReader(fh)]
        inputs.append(loss)
    out = run / "report"
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    write_similarity_long(sim, out / "heatmap.csv")
    export(g, out / "edges.csv", "edge-csv")
    outputs = [out / "report.json", out / "heatmap.csv", out / "edges.csv"]
    _write_manifest(run, "report", cfg, inputs, outputs)
    print(f"report written to {out}")


COMMANDS = {
    "ingest": cmd_ingest,
    "fetch": cmd_fetch,
    "synth": cmd_synth,
    "train": cmd_train,
    "embed": cmd_embed,
    "graph": cmd_graph,
    "stability": cmd_stability,
    "diagnose": cmd_diagnose,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand from resetting a flag given before it
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
    common.add_argument("--deterministic", action="store_true", help="bit-reproducible mode")
    common.add_argument("--out-dir", help="run directory (default: run)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="latentgraph", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="validate OHLC CSVs into the run directory")
    p.add_argument("inputs", nargs="+", help="CSV files or directories")
    p = sub.add_parser("fetch", parents=[common], help="download klines from a REST endpoint")
    p.add_argument("--symbols", nargs="*")
    p.add_argument("--endpoint")
    p.add_argument("--start", type=int)
    p.add_argument("--end", type=int)
    p = sub.add_parser("synth", parents=[common], help="generate a planted synthetic universe")
    p.add_argument("--spec", help="JSON PlantedSpec file")
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--cluster-size", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--pairs", type=int, default=2)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--independent", type=int, default=4)
    p.add_argument("--bars", type=int, default=2000)
    sub.add_parser("train", parents=[common], help="fit the shared autoencoder")
    sub.add_parser("embed", parents=[common], help="entity embeddings and similarity matrix")
    p = sub.add_parser("graph", parents=[common], help="threshold graph, exports and topology")
    p.add_argument("--threshold", type=float)
    p.add_argument("--matched-edges", type=int)
    p = sub.add_parser("stability", parents=[common], help="block re-estimation and threshold sweep")
    p.add_argument("--blocks", type=int)
    p.add_argument("--matched-edges", type=int)
    sub.add_parser("diagnose", parents=[common], help="Engle-Granger test of graph edges")
    sub.add_parser("report", parents=[common], help="consolidated JSON and plot data")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        logging.basicConfig(
            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        cfg = load_config(getattr(args, "config", None))
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if getattr(args, "deterministic", False):
            cfg.deterministic = True
        run = Path(getattr(args, "out_dir", "run"))
        run.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, run)
        return 0
    except LatentGraphError as exc:
        print(f"error: {type(exc).__name__}: {exc}".replace("\n", " "), file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}".replace("\n", " "), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
