import pytest
from hypothesis import given, settings, strategies as st

from latentgraph.config import PipelineConfig, dump_config, load_config
from latentgraph.errors import ConfigError


def test_defaults_match_paper():
    cfg = load_config()
    assert cfg.window.length == 30 and cfg.window.stride == 1 and cfg.window.norm == "zscore"
    assert cfg.model.hidden == 256 and cfg.model.latent == 64
    assert cfg.train.batch_size == 64 and cfg.train.epochs == 20
    assert cfg.graph.threshold == 0.90
    assert cfg.stability.blocks == 4
    assert cfg.diag.confidence == 0.95


def test_load_overrides(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(
        "[run]\nseed = 7\n\n[window]\nlength = 20\nnorm = minmax\n\n[graph]\nmatched_edges = 12\n"
        "[stability]\nsweep = 0.5, 0.7\nvary_seed = false\n[train]\nlearning_rate = 0.01\n"
    )
    cfg = load_config(p)
    assert cfg.seed == 7 and cfg.window.length == 20 and cfg.window.norm == "minmax"
    assert cfg.graph.matched_edges == 12
    assert cfg.stability.sweep == [0.5, 0.7] and cfg.stability.vary_seed is False
    assert cfg.train.learning_rate == 0.01
    assert cfg.train_config(3).seed == 10


@pytest.mark.parametrize(
    "text",
    [
        "[window]\nwidth = 3\n",
        "[nonsense]\na = 1\n",
        "[window]\nlength = abc\n",
        "[window]\nlength = 1\n",
        "[window]\nnorm = rank\n",
        "[graph]\nthreshold = 2\n",
        "[diag]\nconfidence = 0.8\n",
        "[train]\nbatch_size = 0\n",
        "[run]\ndeterministic = maybe\n",
        "not an ini file",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        load_config(text=text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    length=st.integers(2, 100),
    thr=st.floats(-1, 1),
    m=st.one_of(st.none(), st.integers(0, 500)),
    lr=st.floats(1e-6, 1.0),
)
def test_dump_load_round_trip(seed, length, thr, m, lr):
    cfg = PipelineConfig(seed=seed)
    cfg.window.length = length
    cfg.graph.threshold = thr
    cfg.graph.matched_edges = m
    cfg.train.learning_rate = lr
    assert load_config(text=dump_config(cfg)) == cfg


def test_inline_comments():
    cfg = load_config(text="[window]\nlength = 12   ; shorter windows\nnorm = minmax ; or zscore\n")
    assert cfg.window.length == 12 and cfg.window.norm == "minmax"
