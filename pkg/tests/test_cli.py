import json

import pytest

from latentgraph import cli
from latentgraph.errors import NonFiniteLoss

TINY = """
[run]
seed = 3

[window]
length = 8
stride = 4

[model]
hidden = 6
latent = 3

[train]
batch_size = 32
epochs = 2

[graph]
matched_edges = 4

[stability]
blocks = 2
sweep = 0.5, 0.9

[diag]
trials = 200
"""

STAGES = ["train", "embed", "graph", "stability", "diagnose", "report"]


def run_pipeline(run, cfg_path):
    base = ["--config", str(cfg_path), "--out-dir", str(run)]
    assert cli.main(["synth", *base, "--clusters", "1", "--cluster-size", "3", "--pairs", "1",
                     "--independent", "1", "--bars", "600"]) == 0
    for stage in STAGES:
        assert cli.main([stage, *base]) == 0, stage


def snapshot(run):
    return {str(p.relative_to(run)): p.read_bytes() for p in sorted(run.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.ini"
    cfg.write_text(TINY)
    run_pipeline(root / "a", cfg)
    run_pipeline(root / "b", cfg)
    return root / "a", root / "b"


def test_pipeline_outputs(pipeline_runs):
    run, _ = pipeline_runs
    files = snapshot(run)
    for rel in [
        "train/checkpoint.lgae", "train/loss.csv", "embed/embeddings.csv", "embed/similarity.csv",
        "embed/similarity_long.csv", "graph/graph.json", "graph/graph.dot", "graph/edges.csv",
        "graph/topology.json", "stability/stability.json", "stability/sweep.csv",
        "diagnose/eg_results.csv", "diagnose/summary.json", "report/report.json", "report/heatmap.csv",
    ]:
        assert rel in files, rel
    for stage in ["synth"] + STAGES:
        m = json.loads(files[f"manifests/{stage}.json"])
        assert m["stage"] == stage and m["seed"] == 3 and m["deterministic"] is True
        assert m["config"]["window"]["length"] == 8
        assert all(len(h) == 64 for h in m["outputs"].values())
    graph = json.loads(files["graph/graph.json"])
    assert len(graph["edges"]) == 4 and len(graph["nodes"]) == 6
    summary = json.loads(files["diagnose/summary.json"])
    assert summary["tested"] == 4
    report = json.loads(files["report/report.json"])
    assert {"similarity", "graph", "topology", "stability", "diagnostics", "train_loss"} <= set(report)


def test_reruns_byte_identical(pipeline_runs):
    a, b = pipeline_runs
    sa, sb = snapshot(a), snapshot(b)
    assert sa.keys() == sb.keys()
    differing = [k for k in sa if sa[k] != sb[k]]
    assert differing == []


def test_seed_flag_before_or_after_command(tmp_path):
    for n, argv in enumerate([["--seed", "5", "synth"], ["synth", "--seed", "5"]]):
        run = tmp_path / f"r{n}"
        assert cli.main(argv + ["--out-dir", str(run), "--bars", "600", "--pairs", "1",
                                "--clusters", "0", "--independent", "0"]) == 0
        assert json.loads((run / "manifests/synth.json").read_text())["seed"] == 5


def test_graph_threshold_flag(pipeline_runs, tmp_path):
    import shutil

    run = tmp_path / "g"
    shutil.copytree(pipeline_runs[0], run)
    assert cli.main(["graph", "--out-dir", str(run), "--threshold", "-1"]) == 0
    graph = json.loads((run / "graph/graph.json").read_text())
    assert len(graph["edges"]) == 15 and graph["threshold"] == -1


def test_ingest_command(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    (src / "AAA.csv").write_text("timestamp,open,high,low,close\n1,1,2,0.5,1.5\n2,1.5,2,1,1.8\n")
    assert cli.main(["ingest", str(src), "--out-dir", str(tmp_path / "run")]) == 0
    assert (tmp_path / "run/data/AAA.csv").exists()
    (src / "BAD.csv").write_text("timestamp,open,high,low,close\n1,1,2,0,1.5\n")
    assert cli.main(["ingest", str(src / "BAD.csv"), "--out-dir", str(tmp_path / "run")]) == 2


def test_exit_codes(tmp_path, capsys, monkeypatch):
    run = str(tmp_path / "empty")
    assert cli.main([]) == 1
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["graph", "--threshold", "x"]) == 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[window]\nbogus = 1\n")
    assert cli.main(["train", "--config", str(bad), "--out-dir", run]) == 1
    assert cli.main(["train", "--out-dir", run]) == 2
    assert cli.main(["embed", "--out-dir", run]) == 2
    assert cli.main(["fetch", "--out-dir", run]) == 1
    err = capsys.readouterr().err
    assert "error: " in err

    def boom(*a, **k):
        raise NonFiniteLoss(1, float("nan"))

    assert cli.main(["synth", "--out-dir", run, "--bars", "600"]) == 0
    monkeypatch.setattr(cli, "train", boom)
    assert cli.main(["train", "--out-dir", run]) == 3
