"""Encoder-classifier with exact analytic gradients, implemented on numpy.

Architecture: optional per-channel batch normalization of the frontend
features, a single-layer GRU that aggregates the (u, n) feature sequence
into one time-independent hidden vector h of size m, and a linear head
mapping h to class logits.

GRU convention, for t = 1..u:

    r_t = sigmoid(W_r z_t + U_r h_{t-1} + b_r)
    u_t = sigmoid(W_u z_t + U_u h_{t-1} + b_u)
    c_t = tanh(W_c z_t + U_c (r_t * h_{t-1}) + b_c)
    h_t = (1 - u_t) * h_{t-1} + u_t * c_t

Checkpoint container (SCKP): magic "SCKP", format version u32 LE, a
u32-LE-length-prefixed JSON metadata blob, then every tensor as float64 LE
in the order W_r, W_u, W_c, U_r, U_u, U_c, b_r, b_u, b_c,
[gamma, beta, running_mean, running_var when batch norm is on], W_o, b_o.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, FormatError, NumericError, ShapeError

SCKP_MAGIC = b"SCKP"
SCKP_VERSION = 1

GRU_WEIGHTS = ("W_r", "W_u", "W_c", "U_r", "U_u", "U_c")
GRU_BIASES = ("b_r", "b_u", "b_c")


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    epsilon: float = 1e-5


@dataclass
class ModelParams:
    """All weights of the encoder-classifier.

    Shapes: W_* are (m, n), U_* are (m, m), b_* are (m,); the head W_o is
    (C, m) with bias b_o (C,). class_set fixes C and the logit order;
    frontend records which feature source the model was trained on.
    """

    W_r: np.ndarray
    W_u: np.ndarray
    W_c: np.ndarray
    U_r: np.ndarray
    U_u: np.ndarray
    U_c: np.ndarray
    b_r: np.ndarray
    b_u: np.ndarray
    b_c: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray
    class_set: tuple[str, ...]
    frontend: str = "mel"
    seed: int = 42
    bn: BatchNormParams | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_channels(self) -> int:
        return self.W_r.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W_r.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W_o.shape[0]

    def trainable(self) -> list[tuple[str, np.ndarray]]:
        """Trainable tensors in the fixed update order (running stats are
        tracked, not optimized)."""
        out = [(name, getattr(self, name)) for name in GRU_WEIGHTS + GRU_BIASES]
        if self.bn is not None:
            out.append(("gamma", self.bn.gamma))
            out.append(("beta", self.bn.beta))
        out.append(("W_o", self.W_o))
        out.append(("b_o", self.b_o))
        return out

    def copy(self) -> "ModelParams":
        bn = None
        if self.bn is not None:
            bn = BatchNormParams(
                gamma=self.bn.gamma.copy(), beta=self.bn.beta.copy(),
                running_mean=self.bn.running_mean.copy(),
                running_var=self.bn.running_var.copy(),
                momentum=self.bn.momentum, epsilon=self.bn.epsilon)
        return ModelParams(
            W_r=self.W_r.copy(), W_u=self.W_u.copy(), W_c=self.W_c.copy(),
            U_r=self.U_r.copy(), U_u=self.U_u.copy(), U_c=self.U_c.copy(),
            b_r=self.b_r.copy(), b_u=self.b_u.copy(), b_c=self.b_c.copy(),
            W_o=self.W_o.copy(), b_o=self.b_o.copy(),
            class_set=tuple(self.class_set), frontend=self.frontend,
            seed=self.seed, bn=bn, extra=dict(self.extra))


def init_model(n_channels: int, hidden_size: int, class_set,
               use_batchnorm: bool = False, seed: int = 42,
               frontend: str = "mel") -> ModelParams:
    """Fresh parameters: weights uniform(-1/sqrt(m), +1/sqrt(m)) drawn in
    checkpoint tensor order, zero biases, identity batch norm."""
    class_set = tuple(class_set)
    if len(class_set) < 2:
        raise ArgumentError("a classifier needs at least 2 classes")
    m, n, C = hidden_size, n_channels, len(class_set)
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(m)

    def draw(*shape):
        return rng.uniform(-bound, bound, size=shape)

    bn = None
    if use_batchnorm:
        bn = BatchNormParams(
            gamma=np.ones(n), beta=np.zeros(n),
            running_mean=np.zeros(n), running_var=np.ones(n))
    return ModelParams(
        W_r=draw(m, n), W_u=draw(m, n), W_c=draw(m, n),
        U_r=draw(m, m), U_u=draw(m, m), U_c=draw(m, m),
        b_r=np.zeros(m), b_u=np.zeros(m), b_c=np.zeros(m),
        W_o=draw(C, m), b_o=np.zeros(C),
        class_set=class_set, frontend=frontend, seed=seed, bn=bn)


# ---------------------------------------------------------------------------
# batch normalization

def batchnorm_forward(batch: np.ndarray, bn: BatchNormParams, mode: str = "train"):
    """Normalize each channel over all B*u positions of a (B, u, n) batch.

    Train mode uses batch statistics (biased variance) and folds them into
    the running statistics in place:
    running <- (1 - momentum) * running + momentum * batch_stat.
    Eval mode is a deterministic affine map using the running statistics.
    """
    if batch.ndim != 3:
        raise ShapeError("batch norm expects a (B, u, n) batch")
    B, u, n = batch.shape
    if n != bn.gamma.shape[0]:
        raise ShapeError("batch has %d channels, batch norm has %d" % (n, bn.gamma.shape[0]))
    flat = batch.reshape(B * u, n)

    if mode == "train":
        if B * u < 2:
            raise ArgumentError("train-mode batch norm needs at least 2 positions, got %d" % (B * u))
        mean = flat.mean(axis=0)
        var = flat.var(axis=0)  # biased
        bn.running_mean *= 1.0 - bn.momentum
        bn.running_mean += bn.momentum * mean
        bn.running_var *= 1.0 - bn.momentum
        bn.running_var += bn.momentum * var
    elif mode == "eval":
        mean = bn.running_mean
        var = bn.running_var
    else:
        raise ArgumentError("mode must be 'train' or 'eval'")

    inv_std = 1.0 / np.sqrt(var + bn.epsilon)
    xhat = (flat - mean) * inv_std
    out = (bn.gamma * xhat + bn.beta).reshape(B, u, n)
    cache = (xhat, inv_std, bn.gamma, mode, (B, u, n))
    return out, cache


def batchnorm_backward(dout: np.ndarray, cache):
    """Gradients of a scalar loss through batchnorm_forward.

    Returns (dx, dgamma, dbeta). Train mode differentiates through the
    batch statistics; eval mode treats them as constants.
    """
    xhat, inv_std, gamma, mode, shape = cache
    B, u, n = shape
    dflat = dout.reshape(B * u, n)
    dgamma = np.sum(dflat * xhat, axis=0)
    dbeta = np.sum(dflat, axis=0)
    if mode == "train":
        N = B * u
        dx = (gamma * inv_std) * (dflat - dbeta / N - xhat * (dgamma / N))
    else:
        dx = dflat * (gamma * inv_std)
    return dx.reshape(B, u, n), dgamma, dbeta


# ---------------------------------------------------------------------------
# GRU

def gru_forward_batch(Z: np.ndarray, params: ModelParams, h0: np.ndarray | None = None):
    """Run the recurrence over a (B, u, n) batch; returns (h_final, cache)
    with h_final of shape (B, m)."""
    if Z.ndim != 3:
        raise ShapeError("expected a (B, u, n) batch")
    B, u, n = Z.shape
    m = params.hidden_size
    if n != params.n_channels:
        raise ShapeError("sequence has %d channels, model expects %d" % (n, params.n_channels))
    h = np.zeros((B, m)) if h0 is None else np.array(h0, dtype=np.float64)
    if h.shape != (B, m):
        raise ShapeError("h0 must have shape (B, m)")

    hs = np.empty((u + 1, B, m))
    rs = np.empty((u, B, m))
    us = np.empty((u, B, m))
    cs = np.empty((u, B, m))
    hs[0] = h
    for t in range(u):
        z = Z[:, t, :]
        r = _sigmoid(z @ params.W_r.T + h @ params.U_r.T + params.b_r)
        ug = _sigmoid(z @ params.W_u.T + h @ params.U_u.T + params.b_u)
        c = np.tanh(z @ params.W_c.T + (r * h) @ params.U_c.T + params.b_c)
        h = (1.0 - ug) * h + ug * c
        rs[t], us[t], cs[t], hs[t + 1] = r, ug, c, h
    cache = (Z, hs, rs, us, cs, params)
    return h, cache


def gru_forward(z, params: ModelParams, h0: np.ndarray | None = None):
    """Single-sequence wrapper over the batched recurrence: z is a (u, n)
    matrix (or FeatureSequence); returns (h_final (m,), cache)."""
    frames = np.asarray(getattr(z, "frames", z), dtype=np.float64)
    if frames.ndim != 2:
        raise ShapeError("expected a (u, n) feature matrix")
    h0b = None if h0 is None else np.asarray(h0, dtype=np.float64)[None, :]
    h, cache = gru_forward_batch(frames[None, :, :], params, h0b)
    return h[0], cache


def gru_backward(dh: np.ndarray, cache):
    """Backpropagation through time. dh is the gradient at h_final (B, m);
    returns (grads dict over GRU tensors, dZ)."""
    Z, hs, rs, us, cs, params = cache
    B, u, n = Z.shape
    m = params.hidden_size
    grads = {name: np.zeros_like(getattr(params, name)) for name in GRU_WEIGHTS + GRU_BIASES}
    dZ = np.empty_like(Z)
    dh = dh.copy()
    for t in range(u - 1, -1, -1):
        z = Z[:, t, :]
        h_prev, r, ug, c = hs[t], rs[t], us[t], cs[t]

        du = dh * (c - h_prev)
        dc = dh * ug
        dh_prev = dh * (1.0 - ug)

        da_c = dc * (1.0 - c * c)
        grads["W_c"] += da_c.T @ z
        grads["U_c"] += da_c.T @ (r * h_prev)
        grads["b_c"] += da_c.sum(axis=0)
        drh = da_c @ params.U_c
        dh_prev += drh * r

        da_r = (drh * h_prev) * r * (1.0 - r)
        grads["W_r"] += da_r.T @ z
        grads["U_r"] += da_r.T @ h_prev
        grads["b_r"] += da_r.sum(axis=0)
        dh_prev += da_r @ params.U_r

        da_u = du * ug * (1.0 - ug)
        grads["W_u"] += da_u.T @ z
        grads["U_u"] += da_u.T @ h_prev
        grads["b_u"] += da_u.sum(axis=0)
        dh_prev += da_u @ params.U_u

        dZ[:, t, :] = da_r @ params.W_r + da_u @ params.W_u + da_c @ params.W_c
        dh = dh_prev
    return grads, dZ


# ---------------------------------------------------------------------------
# head and loss

def head_forward(h: np.ndarray, params: ModelParams) -> np.ndarray:
    """logits = W_o h + b_o, for a single (m,) vector or a (B, m) batch."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params.hidden_size:
        raise ShapeError("h has size %d, head expects %d" % (h.shape[-1], params.hidden_size))
    return h @ params.W_o.T + params.b_o


def cross_entropy(logits: np.ndarray, label: int):
    """Softmax cross-entropy for one sample, stabilized by max subtraction.

    Returns (loss, dlogits) with dlogits = softmax(logits) - onehot(label).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    if not 0 <= label < logits.shape[-1]:
        raise ArgumentError("label %d out of range for %d classes" % (label, logits.shape[-1]))
    shifted = logits - logits.max()
    log_z = np.log(np.sum(np.exp(shifted)))
    loss = float(log_z - shifted[label])
    dlogits = np.exp(shifted - log_z)
    dlogits[label] -= 1.0
    return loss, dlogits


def cross_entropy_batch(logits: np.ndarray, labels: np.ndarray):
    """Mean softmax cross-entropy over a (B, C) batch; dlogits already
    carries the 1/B factor."""
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    B = logits.shape[0]
    labels = np.asarray(labels)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1))
    losses = log_z - shifted[np.arange(B), labels]
    dlogits = np.exp(shifted - log_z[:, None])
    dlogits[np.arange(B), labels] -= 1.0
    return float(losses.mean()), dlogits / B


# ---------------------------------------------------------------------------
# whole pipeline

@dataclass
class ForwardCache:
    params: ModelParams
    bn_cache: object
    gru_cache: tuple
    h: np.ndarray
    dlogits: np.ndarray
    losses_sum: float


def forward(params: ModelParams, batch: np.ndarray, labels, mode: str = "train"):
    """Full pipeline on a (B, u, n) batch: [batch norm ->] GRU -> head ->
    mean cross-entropy. Returns (loss, cache) for backward()."""
    batch = np.asarray(batch, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    Z = batch
    bn_cache = None
    if params.bn is not None:
        Z, bn_cache = batchnorm_forward(batch, params.bn, mode)
    h, gru_cache = gru_forward_batch(Z, params)
    logits = head_forward(h, params)
    loss, dlogits = cross_entropy_batch(logits, labels)
    cache = ForwardCache(params=params, bn_cache=bn_cache, gru_cache=gru_cache,
                         h=h, dlogits=dlogits, losses_sum=loss * batch.shape[0])
    return loss, cache


def backward(cache: ForwardCache, dloss: float = 1.0) -> dict[str, np.ndarray]:
    """Gradient of dloss * mean_loss w.r.t. every trainable tensor."""
    if not isinstance(cache, ForwardCache):
        raise ArgumentError("backward needs the cache returned by forward()")
    params = cache.params
    dlogits = cache.dlogits * dloss
    grads = {}
    grads["W_o"] = dlogits.T @ cache.h
    grads["b_o"] = dlogits.sum(axis=0)
    dh = dlogits @ params.W_o
    gru_grads, dZ = gru_backward(dh, cache.gru_cache)
    grads.update(gru_grads)
    if cache.bn_cache is not None:
        _dx, dgamma, dbeta = batchnorm_backward(dZ, cache.bn_cache)
        grads["gamma"] = dgamma
        grads["beta"] = dbeta
    return grads


def predict_logits(params: ModelParams, frames: np.ndarray) -> np.ndarray:
    """Eval-mode logits for one full (u, n) feature sequence."""
    frames = np.asarray(frames, dtype=np.float64)
    return head_forward(embed_sequence(params, frames), params)


def embed_sequence(params: ModelParams, frames: np.ndarray) -> np.ndarray:
    """Eval-mode final hidden state h (the utterance embedding)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ShapeError("expected a (u, n) feature matrix")
    Z = frames[None, :, :]
    if params.bn is not None:
        Z, _ = batchnorm_forward(Z, params.bn, mode="eval")
    h, _ = gru_forward_batch(Z, params)
    return h[0]


# ---------------------------------------------------------------------------
# checkpoints

def _tensor_list(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    out = [(name, getattr(params, name)) for name in GRU_WEIGHTS + GRU_BIASES]
    if params.bn is not None:
        out += [("gamma", params.bn.gamma), ("beta", params.bn.beta),
                ("running_mean", params.bn.running_mean),
                ("running_var", params.bn.running_var)]
    out += [("W_o", params.W_o), ("b_o", params.b_o)]
    return out


def save_checkpoint(params: ModelParams, path) -> None:
    from . import __version__

    meta = {
        "m": params.hidden_size,
        "n": params.n_channels,
        "classes": list(params.class_set),
        "frontend": params.frontend,
        "batchnorm": params.bn is not None,
        "seed": params.seed,
        "toolkit_version": __version__,
    }
    if params.bn is not None:
        meta["bn_momentum"] = params.bn.momentum
        meta["bn_epsilon"] = params.bn.epsilon
    meta.update(params.extra)
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(SCKP_MAGIC)
        fh.write(struct.pack("<I", SCKP_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _name, tensor in _tensor_list(params):
            fh.write(tensor.astype("<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != SCKP_MAGIC:
        raise FormatError("not an SCKP checkpoint: %s" % path)
    version, meta_len = struct.unpack_from("<II", data, 4)
    if version != SCKP_VERSION:
        raise FormatError("unsupported checkpoint version %d" % version)
    try:
        meta = json.loads(data[12:12 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError("corrupt checkpoint metadata") from exc

    m, n = int(meta["m"]), int(meta["n"])
    classes = tuple(meta["classes"])
    C = len(classes)
    shapes = [("W_r", (m, n)), ("W_u", (m, n)), ("W_c", (m, n)),
              ("U_r", (m, m)), ("U_u", (m, m)), ("U_c", (m, m)),
              ("b_r", (m,)), ("b_u", (m,)), ("b_c", (m,))]
    if meta["batchnorm"]:
        shapes += [("gamma", (n,)), ("beta", (n,)),
                   ("running_mean", (n,)), ("running_var", (n,))]
    shapes += [("W_o", (C, m)), ("b_o", (C,))]

    pos = 12 + meta_len
    tensors = {}
    for name, shape in shapes:
        count = int(np.prod(shape))
        end = pos + 8 * count
        if end > len(data):
            raise FormatError("checkpoint truncated in tensor %s" % name)
        tensors[name] = np.frombuffer(data[pos:end], dtype="<f8").reshape(shape).copy()
        pos = end
    if pos != len(data):
        raise FormatError("checkpoint has %d trailing bytes" % (len(data) - pos))

    bn = None
    if meta["batchnorm"]:
        bn = BatchNormParams(
            gamma=tensors["gamma"], beta=tensors["beta"],
            running_mean=tensors["running_mean"], running_var=tensors["running_var"],
            momentum=float(meta.get("bn_momentum", 0.1)),
            epsilon=float(meta.get("bn_epsilon", 1e-5)))
    known = {"m", "n", "classes", "frontend", "batchnorm", "seed",
             "toolkit_version", "bn_momentum", "bn_epsilon"}
    extra = {k: v for k, v in meta.items() if k not in known}
    return ModelParams(
        W_r=tensors["W_r"], W_u=tensors["W_u"], W_c=tensors["W_c"],
        U_r=tensors["U_r"], U_u=tensors["U_u"], U_c=tensors["U_c"],
        b_r=tensors["b_r"], b_u=tensors["b_u"], b_c=tensors["b_c"],
        W_o=tensors["W_o"], b_o=tensors["b_o"],
        class_set=classes, frontend=str(meta.get("frontend", "mel")),
        seed=int(meta.get("seed", 42)), bn=bn, extra=extra)
