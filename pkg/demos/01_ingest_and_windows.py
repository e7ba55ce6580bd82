"""
From OHLC bars to normalised windows
====================================

Write a synthetic OHLC file, read it back through the validating loader,
turn prices into log returns and cut the returns into z-scored windows.
"""

import tempfile
from pathlib import Path

import numpy as np

from latentgraph.ingest import load_csv, log_returns, write_csv
from latentgraph.synth import gen_factor_cluster
from latentgraph.windowing import build_batch, segment, znorm_window

# two members of one factor cluster, 300 hourly bars each
members = gen_factor_cluster(2, T=300, seed=7, prefix="demo")
tmp = Path(tempfile.mkdtemp())
for s in members:
    write_csv(s, tmp / f"{s.entity_id}.csv")
print("files:", sorted(p.name for p in tmp.iterdir()))

# the loader checks the header, ordering and price positivity
bars = [load_csv(tmp / f"{s.entity_id}.csv", s.entity_id) for s in members]
print("bars per entity:", [len(b) for b in bars])

# log returns drop the first bar; channels stay in O, H, L, C order
returns = [log_returns(b) for b in bars]
print("returns shape:", returns[0].values.shape)

# overlapping windows of length 30 with stride 1
raw = segment(returns[0], L=30, stride=1)
print("windows:", raw.shape, "expected", 299 - 30 + 1)

# each column of each window gets mean 0 and sample std 1
z = znorm_window(raw[0])
print("column means:", np.round(z.mean(axis=0), 12))
print("column sample std:", np.round(z.std(axis=0, ddof=1), 12))

# pooled batch across entities, ordered by entity id then window index
batch = build_batch(returns, L=30, stride=5)
print("pooled batch:", batch.values.shape, "counts:", batch.counts)
