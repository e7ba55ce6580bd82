"""
Training the sequence-to-sequence LSTM autoencoder
==================================================

The model is written directly in numpy. First check the hand-written
backpropagation against finite differences on a tiny network, then fit a
small model on sinusoid windows and save a checkpoint.
"""

import tempfile
from pathlib import Path

import numpy as np

from latentgraph.autoencoder import (
    ModelParams,
    TrainConfig,
    encode,
    load_checkpoint,
    loss_and_grad,
    reconstruction_loss,
    save_checkpoint,
    train,
)
from latentgraph.windowing import segment

rng = np.random.default_rng(0)

# gradient check on H=5, k=3, L=4, d=2
p = ModelParams.init(2, hidden=5, latent=3, rng=rng)
p["proj.b"] += 0.5  # keep the ReLU awake
x = rng.normal(size=(3, 4, 2))
_, grads = loss_and_grad(x, p)
key = "enc1.U"
idx = (2, 1)
orig = p[key][idx]
p[key][idx] = orig + 1e-5
up = reconstruction_loss(x, p)
p[key][idx] = orig - 1e-5
down = reconstruction_loss(x, p)
p[key][idx] = orig
print(f"d loss / d {key}{idx}: analytic {grads[key][idx]:.8f}, numeric {(up - down) / 2e-5:.8f}")

# sinusoid windows: two tones per channel
t = np.arange(600)[:, None]
signal = np.sin(2 * np.pi * t / np.array([24, 30, 36, 48])) + 0.5 * np.sin(2 * np.pi * t / np.array([10, 12, 15, 9]))
windows = segment(signal, L=30, stride=2)
print("training windows:", windows.shape)

fit = train(windows, TrainConfig(epochs=15, batch_size=32, seed=1), hidden=32, latent=8)
print("loss trace:", " ".join(f"{v:.3f}" for v in fit.losses))

# latent vectors are non-negative because of the ReLU projection
z = encode(windows[:5], fit.params)
print("latent block:\n", np.round(z, 3))

# the checkpoint is a small self-describing binary container
path = Path(tempfile.mkdtemp()) / "model.lgae"
save_checkpoint(path, fit)
back = load_checkpoint(path)
print("checkpoint bytes:", path.stat().st_size, "round trip equal:",
      all(np.array_equal(back.params[k], fit.params[k]) for k in fit.params.keys()))
