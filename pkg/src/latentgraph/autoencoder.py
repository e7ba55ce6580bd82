"""Sequence-to-sequence LSTM autoencoder written directly against numpy.

Architecture (shapes for a batch of ``B`` windows of ``L`` steps, ``d`` channels)::

    x (B, L, d) -> LSTM enc1 (H) -> LSTM enc2 (H) -> last hidden (B, H)
                -> dense + ReLU -> latent (B, k)
    latent      -> dense (H) -> repeated L times -> LSTM dec1 (H) -> LSTM dec2 (H)
                -> per-step linear head -> reconstruction (B, L, d)

Gate blocks inside every ``4H`` weight matrix are ordered input, forget,
cell candidate, output. Initial hidden and cell states are zero for every
layer. Gradients are exact (backpropagation through time) and are checked
against finite differences in the test suite.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyBatch, NonFiniteLoss, ShapeMismatch

log = logging.getLogger(__name__)

LSTM_LAYERS = ("enc1", "enc2", "dec1", "dec2")
DENSE_LAYERS = ("proj", "expand", "head")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmLayerParams:
    W: np.ndarray  # (4H, D_in)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.U.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


@dataclass
class ModelParams:
    """All trainable tensors, keyed ``"<layer>.<W|U|b>"``."""

    d: int
    hidden: int
    latent: int
    tensors: dict[str, np.ndarray]

    @classmethod
    def init(cls, d: int, hidden: int = 256, latent: int = 64, rng=None) -> "ModelParams":
        """Glorot-uniform weights, zero biases except forget-gate bias 1."""
        rng = np.random.default_rng(rng)
        H = hidden
        t: dict[str, np.ndarray] = {}
        for name, d_in in (("enc1", d), ("enc2", H), ("dec1", H), ("dec2", H)):
            t[f"{name}.W"] = _glorot(rng, 4 * H, d_in)
            t[f"{name}.U"] = _glorot(rng, 4 * H, H)
            b = np.zeros(4 * H)
            b[H : 2 * H] = 1.0
            t[f"{name}.b"] = b
        for name, (n_out, n_in) in (("proj", (latent, H)), ("expand", (H, latent)), ("head", (d, H))):
            t[f"{name}.W"] = _glorot(rng, n_out, n_in)
            t[f"{name}.b"] = np.zeros(n_out)
        return cls(d, hidden, latent, t)

    @classmethod
    def zeros(cls, d: int, hidden: int, latent: int) -> "ModelParams":
        p = cls.init(d, hidden, latent, rng=0)
        return cls(d, hidden, latent, {k: np.zeros_like(v) for k, v in p.tensors.items()})

    def __getitem__(self, key: str) -> np.ndarray:
        return self.tensors[key]

    def __setitem__(self, key: str, value: np.ndarray) -> None:
        self.tensors[key] = value

    def keys(self):
        return self.tensors.keys()

    def layer(self, name: str) -> LstmLayerParams:
        return LstmLayerParams(self.tensors[f"{name}.W"], self.tensors[f"{name}.U"], self.tensors[f"{name}.b"])

    def copy(self) -> "ModelParams":
        return ModelParams(self.d, self.hidden, self.latent, {k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    @property
    def dtype(self) -> np.dtype:
        return self.tensors["enc1.W"].dtype

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.d, self.hidden, self.latent, {k: v.astype(dtype) for k, v in self.tensors.items()})

    def n_params(self) -> int:
        return sum(v.size for v in self.tensors.values())


# ---------------------------------------------------------------------------
# LSTM primitives


def _activate(z: np.ndarray, H: int) -> np.ndarray:
    a = np.empty_like(z)
    a[..., : 2 * H] = sigmoid(z[..., : 2 * H])
    a[..., 2 * H : 3 * H] = np.tanh(z[..., 2 * H : 3 * H])
    a[..., 3 * H :] = sigmoid(z[..., 3 * H :])
    return a


def lstm_cell_forward(x, h_prev, c_prev, params: LstmLayerParams):
    """One LSTM step. Works on single vectors or on a leading batch axis.

    Returns ``(h, c, cache)`` where ``cache`` holds the pre-activations and
    gate values needed for the backward pass.
    """
    x, h_prev, c_prev = (np.asarray(v, dtype=np.float64) for v in (x, h_prev, c_prev))
    H = params.hidden
    if x.shape[-1] != params.input_dim or h_prev.shape[-1] != H or c_prev.shape[-1] != H:
        raise ShapeMismatch(
            f"cell expects x[..., {params.input_dim}], h/c[..., {H}]; "
            f"got {x.shape}, {h_prev.shape}, {c_prev.shape}"
        )
    z = x @ params.W.T + h_prev @ params.U.T + params.b
    a = _activate(z, H)
    i, f, g, o = a[..., :H], a[..., H : 2 * H], a[..., 2 * H : 3 * H], a[..., 3 * H :]
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, {"z": z, "gates": a, "x": x, "h_prev": h_prev, "c_prev": c_prev, "c": c}


def lstm_forward(X: np.ndarray, p: LstmLayerParams, steps: int | None = None):
    """Run a layer over a time-major sequence from zero state.

    ``X`` is ``(T, B, D)``; alternatively pass ``(B, D)`` with ``steps=T`` to
    feed the same input at every step (the repeat-vector decoder input).
    Returns the hidden sequence ``(T, B, H)`` and a cache for
    :func:`lstm_backward`.
    """
    H = p.hidden
    if X.shape[-1] != p.input_dim:
        raise ShapeMismatch(f"layer expects input dim {p.input_dim}, got {X.shape[-1]}")
    if steps is None:
        T, B = X.shape[:2]
        xw = X @ p.W.T
        xw += p.b
    else:
        T, B = steps, X.shape[0]
        xw_const = X @ p.W.T + p.b
    dt = p.W.dtype
    gates = np.empty((T, B, 4 * H), dtype=dt)
    cs = np.empty((T, B, H), dtype=dt)
    tcs = np.empty((T, B, H), dtype=dt)
    hs = np.empty((T, B, H), dtype=dt)
    UT = p.U.T
    for t in range(T):
        a = gates[t]
        if t == 0:
            a[...] = xw[0] if steps is None else xw_const
        else:
            np.matmul(hs[t - 1], UT, out=a)
            a += xw[t] if steps is None else xw_const
        # sigmoid(x) = (1 + tanh(x/2)) / 2 on the i, f, o blocks
        a[:, : 2 * H] *= 0.5
        a[:, 3 * H :] *= 0.5
        np.tanh(a, out=a)
        for blk in (slice(0, 2 * H), slice(3 * H, 4 * H)):
            a[:, blk] += 1.0
            a[:, blk] *= 0.5
        c = cs[t]
        np.multiply(a[:, :H], a[:, 2 * H : 3 * H], out=c)
        if t > 0:
            c += a[:, H : 2 * H] * cs[t - 1]
        np.tanh(c, out=tcs[t])
        np.multiply(a[:, 3 * H :], tcs[t], out=hs[t])
    return hs, (X, gates, cs, tcs, hs, steps)


def lstm_backward(dhs: np.ndarray, cache, p: LstmLayerParams):
    """Backpropagate ``dL/dh_t`` (time-major) for every step; returns ``(dX, dW, dU, db)``."""
    X, gates, cs, tcs, hs, steps = cache
    T, B, H4 = gates.shape
    H = H4 // 4
    dZ = np.empty_like(gates)
    dh = np.zeros((B, H), dtype=gates.dtype)
    dc = np.zeros((B, H), dtype=gates.dtype)
    tmp = np.empty((B, H), dtype=gates.dtype)
    U = p.U
    for t in range(T - 1, -1, -1):
        a = gates[t]
        i, f, g, o = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        dh += dhs[t]
        tc = tcs[t]
        dz = dZ[t]
        # output gate
        np.multiply(dh, tc, out=tmp)
        np.multiply(o, 1.0 - o, out=dz[:, 3 * H :])
        dz[:, 3 * H :] *= tmp
        # cell state
        np.multiply(tc, tc, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= o
        tmp *= dh
        dc += tmp
        np.multiply(dc, g, out=dz[:, :H])
        dz[:, :H] *= i * (1.0 - i)
        if t > 0:
            np.multiply(dc, cs[t - 1], out=dz[:, H : 2 * H])
            dz[:, H : 2 * H] *= f * (1.0 - f)
        else:
            dz[:, H : 2 * H] = 0.0
        np.multiply(dc, i, out=dz[:, 2 * H : 3 * H])
        dz[:, 2 * H : 3 * H] *= 1.0 - g * g
        dc *= f
        np.matmul(dz, U, out=dh)
    flat = dZ.reshape(-1, H4)
    dU = flat[B:].T @ hs[:-1].reshape(-1, H)
    db = flat.sum(axis=0)
    if steps is None:
        dW = flat.T @ X.reshape(-1, X.shape[-1])
        dX = dZ @ p.W
    else:
        dZs = dZ.sum(axis=0)
        dW = dZs.T @ X
        dX = dZs @ p.W
    return dX, dW, dU, db


# ---------------------------------------------------------------------------
# model


def _as_batch(windows, params: ModelParams) -> tuple[np.ndarray, bool]:
    x = np.asarray(windows, dtype=params.dtype)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != params.d:
        raise ShapeMismatch(f"expected windows of shape (L, {params.d}) or (B, L, {params.d}), got {x.shape}")
    return x, single


def _encode(x: np.ndarray, params: ModelParams):
    xt = np.ascontiguousarray(x.transpose(1, 0, 2))
    h1, c1 = lstm_forward(xt, params.layer("enc1"))
    h2, c2 = lstm_forward(h1, params.layer("enc2"))
    last = h2[-1]
    pre = last @ params["proj.W"].T + params["proj.b"]
    return np.maximum(pre, 0.0), (c1, c2, last, pre)


def _decode(z: np.ndarray, params: ModelParams, L: int):
    e = z @ params["expand.W"].T + params["expand.b"]
    h3, c3 = lstm_forward(e, params.layer("dec1"), steps=L)
    h4, c4 = lstm_forward(h3, params.layer("dec2"))
    out = (h4 @ params["head.W"].T + params["head.b"]).transpose(1, 0, 2)
    return out, (z, c3, c4, h4)


def encode(windows, params: ModelParams) -> np.ndarray:
    """Latent vector(s): ``(L, d) -> (k,)`` or ``(B, L, d) -> (B, k)``."""
    x, single = _as_batch(windows, params)
    z, _ = _encode(x, params)
    return z[0] if single else z


def encode_batched(windows: np.ndarray, params: ModelParams, chunk: int = 512) -> np.ndarray:
    """Encode a large stack in fixed-size chunks (same result as :func:`encode`)."""
    out = [encode(windows[s : s + chunk], params) for s in range(0, len(windows), chunk)]
    return np.concatenate(out) if out else np.zeros((0, params.latent))


def decode(latent, params: ModelParams, L: int) -> np.ndarray:
    """Reconstruction(s): ``(k,) -> (L, d)`` or ``(B, k) -> (B, L, d)``."""
    z = np.asarray(latent, dtype=params.dtype)
    single = z.ndim == 1
    if single:
        z = z[None]
    if z.shape[-1] != params.latent:
        raise ShapeMismatch(f"latent must have length {params.latent}, got {z.shape[-1]}")
    out, _ = _decode(z, params, L)
    return out[0] if single else out


def reconstruct(windows, params: ModelParams) -> np.ndarray:
    x, single = _as_batch(windows, params)
    out, _ = _decode(_encode(x, params)[0], params, x.shape[1])
    return out[0] if single else out


def reconstruction_loss(windows, params: ModelParams) -> float:
    """Mean squared error over windows, timesteps and channels."""
    x = np.asarray(windows, dtype=params.dtype)
    if x.size == 0:
        raise EmptyBatch("reconstruction_loss needs at least one window")
    return float(np.mean((reconstruct(x, params) - x) ** 2))


def loss_and_grad(windows, params: ModelParams) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared reconstruction error and its exact gradient."""
    x, _ = _as_batch(windows, params)
    if x.shape[0] == 0:
        raise EmptyBatch("backward needs at least one window")
    B, L, d = x.shape
    z, (c1, c2, last, pre) = _encode(x, params)
    out, (_, c3, c4, h4) = _decode(z, params, L)
    diff = out - x
    loss = float(np.mean(diff**2))

    g: dict[str, np.ndarray] = {}
    dout = np.ascontiguousarray(((2.0 / diff.size) * diff).transpose(1, 0, 2))
    g["head.W"] = dout.reshape(-1, d).T @ h4.reshape(-1, params.hidden)
    g["head.b"] = dout.sum(axis=(0, 1))
    dh4 = dout @ params["head.W"]
    dh3, g["dec2.W"], g["dec2.U"], g["dec2.b"] = lstm_backward(dh4, c4, params.layer("dec2"))
    de, g["dec1.W"], g["dec1.U"], g["dec1.b"] = lstm_backward(dh3, c3, params.layer("dec1"))
    g["expand.W"] = de.T @ z
    g["expand.b"] = de.sum(axis=0)
    dz = de @ params["expand.W"]
    dpre = dz * (pre > 0)
    g["proj.W"] = dpre.T @ last
    g["proj.b"] = dpre.sum(axis=0)
    dlast = dpre @ params["proj.W"]
    dh2 = np.zeros((L, B, params.hidden), dtype=params.dtype)
    dh2[-1] = dlast
    dh1, g["enc2.W"], g["enc2.U"], g["enc2.b"] = lstm_backward(dh2, c2, params.layer("enc2"))
    _, g["enc1.W"], g["enc1.U"], g["enc1.b"] = lstm_backward(dh1, c1, params.layer("enc1"))
    return loss, g


def backward(windows, params: ModelParams) -> dict[str, np.ndarray]:
    return loss_and_grad(windows, params)[1]


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 20
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    clip_norm: float | None = None
    deterministic: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise DataError(f"batch_size and epochs must be >= 1, got {self.batch_size}, {self.epochs}")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise DataError("Adam betas must lie in (0, 1)")
        if self.learning_rate < 0:
            raise DataError("learning_rate must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise DataError(f"dtype must be float32 or float64, got {self.dtype!r}")


class Adam:
    """Bias-corrected Adam over a dict of named tensors (updated in place)."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, gk in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(gk)
                self.v[k] = np.zeros_like(gk)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * gk
            v *= self.beta2
            v += (1.0 - self.beta2) * gk * gk
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _clip(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale


@dataclass
class TrainResult:
    params: ModelParams
    losses: list[float] = field(default_factory=list)
    config: TrainConfig = field(default_factory=TrainConfig)


def train(
    windows,
    cfg: TrainConfig | None = None,
    *,
    hidden: int = 256,
    latent: int = 64,
    params: ModelParams | None = None,
    callback=None,
) -> TrainResult:
    """Fit one shared autoencoder on all windows with mini-batch Adam.

    ``windows`` is a :class:`~latentgraph.windowing.WindowBatch` or an
    ``(n, L, d)`` array. A single generator seeded with ``cfg.seed`` drives
    initialisation and then the per-epoch shuffles, so a run is a pure
    function of its inputs. The last partial mini-batch is kept. The reported
    loss for an epoch is the size-weighted mean of its mini-batch losses.

    Arithmetic runs in ``cfg.dtype``; the returned parameters are float64.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(getattr(windows, "values", windows), dtype=cfg.dtype)
    if x.ndim != 3 or x.shape[0] == 0:
        raise EmptyBatch("training needs a non-empty (n, L, d) window stack")
    n, L, d = x.shape
    if latent >= L * d:
        log.warning("latent size %d is not smaller than L*d = %d", latent, L * d)
    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = ModelParams.init(d, hidden, latent, rng)
    params = params.astype(cfg.dtype)
    opt = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    losses: list[float] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, grads = loss_and_grad(x[idx], params)
            if not np.isfinite(loss):
                raise NonFiniteLoss(epoch, loss)
            if cfg.clip_norm:
                _clip(grads, cfg.clip_norm)
            opt.step(params.tensors, grads)
            total += loss * len(idx)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss) or not all(np.all(np.isfinite(v)) for v in params.tensors.values()):
            raise NonFiniteLoss(epoch, epoch_loss)
        losses.append(float(epoch_loss))
        log.info("epoch %d/%d loss %.6g", epoch, cfg.epochs, epoch_loss)
        if callback is not None:
            callback(epoch, epoch_loss)
    return TrainResult(params.astype(np.float64), losses, cfg)


# ---------------------------------------------------------------------------
# checkpoint container
#
#   bytes 0..7    magic b"LGAECKPT"
#   bytes 8..11   uint32 little-endian format version (1)
#   bytes 12..19  uint64 little-endian header length n
#   next n bytes  UTF-8 JSON header (sorted keys): dims, train_config, seed,
#                 loss_trace, dtype "<f8", tensors [{name, shape, offset, count}]
#   remainder     tensors as little-endian float64, row-major, in header order

MAGIC = b"LGAECKPT"
FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, result: TrainResult | ModelParams, cfg: TrainConfig | None = None) -> None:
    if isinstance(result, ModelParams):
        result = TrainResult(result, [], cfg or TrainConfig())
    p = result.params
    tensors, offset = [], 0
    for name in sorted(p.keys()):
        arr = p[name]
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": int(arr.size)})
        offset += arr.size
    header = {
        "dims": {"d": p.d, "hidden": p.hidden, "latent": p.latent},
        "train_config": asdict(result.config),
        "seed": result.config.seed,
        "loss_trace": [float(v) for v in result.losses],
        "dtype": "<f8",
        "tensors": tensors,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for t in tensors:
            fh.write(np.ascontiguousarray(p[t["name"]], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> TrainResult:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    version, n = struct.unpack("<IQ", raw[8:20])
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[20 : 20 + n].decode("utf-8"))
    data = np.frombuffer(raw, dtype="<f8", offset=20 + n)
    tensors = {
        t["name"]: data[t["offset"] : t["offset"] + t["count"]].reshape(t["shape"]).astype(np.float64)
        for t in header["tensors"]
    }
    dims = header["dims"]
    params = ModelParams(dims["d"], dims["hidden"], dims["latent"], tensors)
    return TrainResult(params, header["loss_trace"], TrainConfig(**header["train_config"]))
