"""Loss, optimizer, and the 10-epoch / batch-16 training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentConfig, Image, augment_sample
from .errors import ShapeError
from .network import Network
from .tensor import FLOAT, Tensor

LOG_CLAMP = 1e-12


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 0.001
    seed: int = 42
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_accuracy: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    test_accuracy: float | None = None


def format_history(history: TrainHistory) -> str:
    """Line-oriented `epoch,loss,train_acc` serialization."""
    lines = [f"{e.epoch},{e.loss:.6f},{e.train_accuracy:.6f}" for e in history.epochs]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_history(text: str) -> TrainHistory:
    history = TrainHistory()
    for line in text.splitlines():
        if not line.strip():
            continue
        epoch, loss, acc = line.split(",")
        history.epochs.append(EpochStats(int(epoch), float(loss), float(acc)))
    return history


def cross_entropy_loss(probs: Tensor, labels: Tensor) -> tuple[float, Tensor]:
    """Mean negative log-likelihood plus the fused gradient w.r.t. logits.

    The returned gradient is (probs - labels) / batch, the exact derivative
    of the loss through the softmax, so callers feed it to
    ``Network.backward_from_logits``.
    """
    if probs.shape != labels.shape:
        raise ShapeError(f"probs {probs.shape} vs labels {labels.shape}")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("probability rows must sum to 1")
    one_hot = (labels == 1.0) | (labels == 0.0)
    if not (one_hot.all() and (labels.sum(axis=1) == 1.0).all()):
        raise ValueError("labels must be one-hot rows")
    b = probs.shape[0]
    p_true = (probs * labels).sum(axis=1)
    loss = float(-np.log(np.maximum(p_true, LOG_CLAMP)).mean())
    return loss, (probs - labels) / b


def one_hot(labels: np.ndarray, num_classes: int) -> Tensor:
    out = np.zeros((len(labels), num_classes), dtype=FLOAT)
    out[np.arange(len(labels)), labels] = 1.0
    return out


class AdamState:
    """Bias-corrected adaptive-moment accumulators, one pair per parameter."""

    def __init__(self, net: Network):
        self.m = [np.zeros_like(p) for _, _, p in net.parameters()]
        self.v = [np.zeros_like(p) for _, _, p in net.parameters()]
        self.t = 0


def adam_step(net: Network, state: AdamState, cfg: TrainConfig) -> None:
    """Apply one in-place update from the gradients currently held by the net."""
    state.t += 1
    t = state.t
    lr_t = cfg.learning_rate * np.sqrt(1 - cfg.beta2 ** t) / (1 - cfg.beta1 ** t)
    for i, (param, grad) in enumerate(zip(
            (p for _, _, p in net.parameters()),
            (g for _, _, g in net.gradients()))):
        if param.shape != grad.shape or param.shape != state.m[i].shape:
            raise ShapeError("optimizer state does not match parameter shapes")
        m, v = state.m[i], state.v[i]
        m *= cfg.beta1
        m += (1 - cfg.beta1) * grad
        v *= cfg.beta2
        v += (1 - cfg.beta2) * grad * grad
        param -= lr_t * m / (np.sqrt(v) + cfg.eps)


Sample = tuple[np.ndarray, int]  # (H,W,3) raw uint8 pixels, class ordinal


def _sample_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    # one pre-split stream per (epoch, dataset index): schedule independent
    return np.random.default_rng([seed, epoch, index])


def _clean_batchify(samples: list[Sample], batch_size: int):
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        x = np.stack([px for px, _ in chunk]).astype(FLOAT) / 255.0
        y = np.array([label for _, label in chunk])
        yield x, y


def dataset_accuracy(net: Network, samples: list[Sample], batch_size: int = 32) -> float:
    """Full-pass accuracy with rescale-only preprocessing (no augmentation)."""
    if not samples:
        raise ValueError("empty dataset")
    correct = 0
    for x, y in _clean_batchify(samples, batch_size):
        probs = net.forward(x)
        correct += int((probs.argmax(axis=1) == y).sum())
    return correct / len(samples)


def train(
    net: Network,
    train_samples: list[Sample],
    cfg: TrainConfig,
    augment: AugmentConfig | None = None,
    test_samples: list[Sample] | None = None,
    progress=None,
) -> TrainHistory:
    """Train in place: seeded shuffle, per-sample augmentation, Adam per batch.

    ``augment=None`` trains on rescale-only inputs. The final short batch
    is trained on. All randomness flows from ``cfg.seed`` and
    ``augment.seed``, so identical calls produce bitwise-identical
    parameters. Reported accuracy is a clean full pass over the training
    set after each epoch.
    """
    if not train_samples:
        raise ValueError("empty dataset")
    num_classes = net.layers[-1].params["bias"].shape[0]
    state = AdamState(net)
    history = TrainHistory()

    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(train_samples))
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = np.empty((len(idx), *train_samples[0][0].shape), dtype=FLOAT)
            for row, i in enumerate(idx):
                pixels, _ = train_samples[i]
                if augment is None:
                    batch[row] = pixels.astype(FLOAT) / 255.0
                else:
                    img = augment_sample(Image(pixels.astype(FLOAT), "raw"), augment,
                                         _sample_rng(augment.seed, epoch, int(i)))
                    batch[row] = img.pixels
            labels = one_hot(np.array([train_samples[i][1] for i in idx]), num_classes)
            probs = net.forward(batch, training=True)
            loss, dlogits = cross_entropy_loss(probs, labels)
            net.backward_from_logits(dlogits)
            adam_step(net, state, cfg)
            loss_sum += loss * len(idx)
        stats = EpochStats(
            epoch=epoch + 1,
            loss=loss_sum / len(order),
            train_accuracy=dataset_accuracy(net, train_samples),
        )
        history.epochs.append(stats)
        if progress is not None:
            progress(stats)

    if test_samples:
        history.test_accuracy = dataset_accuracy(net, test_samples)
    return history
