"""Optimization loop: Adam on cross-entropy over random 3-second chunks,
one fresh chunk per utterance per epoch, best-development checkpointing.

Determinism contract: for a fixed (datasets, config) the run consumes a
single seeded random stream in a fixed order, so the per-epoch log and the
best checkpoint are bit-identical across reruns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, NumericError
from .model import (
    ModelParams,
    backward,
    forward,
    init_model,
    save_checkpoint,
)


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 50
    chunk_seconds: float = 3.0
    seed: int = 42
    hidden_size: int = 128
    use_batchnorm: bool = False
    frontend: str = "mel"
    grad_clip: float = 0.0  # max global gradient norm; 0 disables

    def validate(self):
        # lr = 0 is allowed deliberately: it freezes the model, which is
        # useful for smoke-testing the loop itself.
        if self.lr < 0:
            raise ArgumentError("lr must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ArgumentError("betas must lie in [0, 1)")
        if self.adam_epsilon <= 0:
            raise ArgumentError("adam_epsilon must be positive")
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")
        min_batch = 2 if self.use_batchnorm else 1
        if self.batch_size < min_batch:
            raise ArgumentError("batch_size must be >= %d" % min_batch)
        if self.chunk_seconds <= 0:
            raise ArgumentError("chunk_seconds must be positive")
        if self.hidden_size < 1:
            raise ArgumentError("hidden_size must be >= 1")
        if self.frontend not in ("mel", "external"):
            raise ArgumentError("frontend must be 'mel' or 'external'")
        if self.grad_clip < 0:
            raise ArgumentError("grad_clip must be >= 0")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        state = cls()
        for name, tensor in params.trainable():
            state.m[name] = np.zeros_like(tensor)
            state.v[name] = np.zeros_like(tensor)
        return state


def adam_step(params: ModelParams, grads: dict, state: AdamState,
              config: TrainConfig) -> None:
    """One Adam update with bias correction, in place:

        m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
        p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
    """
    if config.grad_clip > 0:
        sq = 0.0
        for name, _ in params.trainable():
            sq += float(np.sum(grads[name] ** 2))
        norm = np.sqrt(sq)
        if norm > config.grad_clip:
            scale = config.grad_clip / norm
            grads = {name: g * scale for name, g in grads.items()}

    state.step += 1
    t = state.step
    bc1 = 1.0 - config.beta1 ** t
    bc2 = 1.0 - config.beta2 ** t
    for name, tensor in params.trainable():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient in tensor %s at step %d" % (name, t))
        m = state.m[name]
        v = state.v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        tensor -= config.lr * (m / bc1) / (np.sqrt(v / bc2) + config.adam_epsilon)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_loss: float
    dev_accuracy: float


def write_log(log, path) -> None:
    """CSV log with header epoch,train_loss,dev_loss,dev_accuracy; floats
    are written with repr so identical runs serialize identically."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,dev_loss,dev_accuracy\n")
        for row in log:
            fh.write("%d,%r,%r,%r\n"
                     % (row.epoch, row.train_loss, row.dev_loss, row.dev_accuracy))


def _score_dev(params, dev_set, config):
    """Mean loss and accuracy on deterministic offset-0 dev chunks, scored
    in eval mode in batches of config.batch_size."""
    n = len(dev_set)
    total_loss = 0.0
    correct = 0
    for start in range(0, n, config.batch_size):
        idx = range(start, min(start + config.batch_size, n))
        feats = np.stack([dev_set.eval_features(i, config.chunk_seconds) for i in idx])
        labels = dev_set.labels[list(idx)]
        loss, cache = forward(params, feats, labels, mode="eval")
        total_loss += loss * len(labels)
        preds = np.argmax(cache.h @ params.W_o.T + params.b_o, axis=1)
        correct += int(np.sum(preds == labels))
    return total_loss / n, correct / n


def train(train_set, dev_set, config: TrainConfig, checkpoint_path=None):
    """Run the full optimization and return (best_params, log).

    Per epoch: shuffle the training records with the seeded stream, draw
    one fresh chunk per record, sweep batches of config.batch_size (the
    final partial batch is kept), and update with Adam. The development
    split is scored on deterministic chunks after every epoch; the model
    is snapshotted (and written to checkpoint_path, when given) whenever
    its dev loss strictly improves.
    """
    config.validate()
    if len(train_set) == 0 or len(dev_set) == 0:
        raise ArgumentError("train and dev splits must be non-empty")
    if tuple(train_set.class_set) != tuple(dev_set.class_set):
        raise ArgumentError("train and dev class sets differ")
    overlap = set(train_set.speakers) & set(dev_set.speakers)
    if overlap:
        raise ArgumentError("train and dev share speakers: %s" % sorted(overlap)[:5])

    params = init_model(
        n_channels=train_set.n_channels, hidden_size=config.hidden_size,
        class_set=train_set.class_set, use_batchnorm=config.use_batchnorm,
        seed=config.seed, frontend=config.frontend)
    state = AdamState.for_params(params)
    # the epoch stream is separate from the seed used for weight init
    rng = np.random.default_rng([config.seed, 1])

    best_loss = np.inf
    best_params = None
    log = []
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            feats = np.stack(
                [train_set.chunk_features(i, config.chunk_seconds, rng) for i in idx])
            labels = train_set.labels[idx]
            loss, cache = forward(params, feats, labels, mode="train")
            grads = backward(cache)
            adam_step(params, grads, state, config)
            loss_sum += loss * len(idx)

        dev_loss, dev_acc = _score_dev(params, dev_set, config)
        if not np.isfinite(dev_loss):
            raise NumericError("dev loss diverged at epoch %d" % epoch)
        log.append(EpochStats(epoch, loss_sum / n, dev_loss, dev_acc))
        if dev_loss < best_loss:
            best_loss = dev_loss
            best_params = params.copy()
            if checkpoint_path is not None:
                save_checkpoint(best_params, checkpoint_path)
    return best_params, log
