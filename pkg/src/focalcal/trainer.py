"""Deterministic desk-scale training with full per-epoch instrumentation.

Two model kinds are supported: a bias-free two-parameter logistic model
(single logit, two classes) and a one-hidden-layer rectifier MLP with
manual backpropagation. Training is plain minibatch SGD with momentum
under any loss kind and gamma policy, single-threaded and
bit-deterministic for a given seed.

Every epoch records train/test NLL split by correctly and incorrectly
classified samples, errors, the binned test calibration gap, test
entropies split by correctness, and weight/feature/logit norms, so the
miscalibration dynamics (rising wrong-sample NLL, shrinking entropy,
growing weight norm) can be inspected or exported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gamma import GammaPolicy, fixed_gamma, gammas_for_batch
from .losses import LOSS_KINDS, batch_loss_grad
from .metrics import DEFAULT_BINS, EvalSet, bin_equal_width, ece
from .numerics import PROB_FLOOR, RandomStream, gaussian, softmax


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-cluster-per-class Gaussian data on the vertices of a square.

    Each class owns two clusters whose means sit on vertices of a 2-D
    square of the given side length, arranged so the classes are linearly
    separable by their means. Samples are isotropic Gaussians optionally
    passed through one random 2x2 mixing matrix per cluster (adding
    covariance), and a fraction of labels is flipped.
    """

    n_train: int = 4000
    n_test: int = 1000
    side: float = 4.0
    cluster_std: float = 1.0
    flip_rate: float = 0.10
    mixing: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_train <= 0 or self.n_test <= 0:
            raise ValueError("counts must be positive")
        if not (0.0 <= self.flip_rate < 1.0):
            raise ValueError("flip rate must lie in [0, 1)")


@dataclass
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray


def generate_two_cluster(spec: SyntheticSpec,
                         stream: RandomStream | None = None) -> Dataset:
    """Draw the synthetic two-cluster-per-class dataset.

    Deterministic for a given (spec, stream); when ``stream`` is omitted
    it is derived from ``spec.seed``. Draw order is fixed: mixing
    matrices, cluster assignments, Gaussian offsets, label flips.
    """
    if stream is None:
        stream = RandomStream(spec.seed)
    gen = stream.generator()
    half = spec.side / 2.0
    # Class 0 owns the two left vertices, class 1 the two right ones.
    means = np.array([[-half, -half], [-half, half],
                      [half, -half], [half, half]])
    mixers = gen.uniform(-1.0, 1.0, size=(4, 2, 2))
    total = spec.n_train + spec.n_test
    cluster = gen.integers(0, 4, size=total)
    z = gaussian(gen, (total, 2)) * spec.cluster_std
    if spec.mixing:
        x = means[cluster] + np.einsum("nij,nj->ni", mixers[cluster], z)
    else:
        x = means[cluster] + z
    y = (cluster >= 2).astype(int)
    flips = gen.random(total) < spec.flip_rate
    y = np.where(flips, 1 - y, y)
    return Dataset(x[:spec.n_train], y[:spec.n_train],
                   x[spec.n_train:], y[spec.n_train:])


class LinearModel:
    """Bias-free logistic model sigma(w . x): one logit, two classes."""

    kind = "linear"
    k = 2

    def __init__(self, n_features: int = 2):
        self.w = np.zeros(n_features)

    def logits(self, x: np.ndarray) -> np.ndarray:
        s = x @ self.w
        return np.column_stack([s, np.zeros_like(s)])

    def param_arrays(self) -> list[np.ndarray]:
        return [self.w]

    def backward(self, x: np.ndarray, grad_logits: np.ndarray) -> list[np.ndarray]:
        # Only the first logit depends on the parameters.
        return [x.T @ grad_logits[:, 0]]

    def last_layer_norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def feature_norm(self, x: np.ndarray) -> float:
        return float("nan")


class MLPModel:
    """One-hidden-layer rectifier network with a final linear layer.

    Weights start uniform in +-1/sqrt(fan-in) drawn from the given
    stream; biases start at zero.
    """

    kind = "mlp"

    def __init__(self, n_features: int, n_classes: int, hidden: int = 32,
                 stream: RandomStream = RandomStream(0)):
        gen = stream.generator()
        lim1 = 1.0 / math.sqrt(n_features)
        lim2 = 1.0 / math.sqrt(hidden)
        self.w1 = gen.uniform(-lim1, lim1, size=(n_features, hidden))
        self.b1 = np.zeros(hidden)
        self.w2 = gen.uniform(-lim2, lim2, size=(hidden, n_classes))
        self.b2 = np.zeros(n_classes)
        self.k = n_classes

    def hidden(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x @ self.w1 + self.b1, 0.0)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.hidden(x) @ self.w2 + self.b2

    def param_arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def backward(self, x: np.ndarray, grad_logits: np.ndarray) -> list[np.ndarray]:
        pre = x @ self.w1 + self.b1
        h = np.maximum(pre, 0.0)
        dw2 = h.T @ grad_logits
        db2 = grad_logits.sum(axis=0)
        dh = grad_logits @ self.w2.T
        dh[pre <= 0.0] = 0.0
        dw1 = x.T @ dh
        db1 = dh.sum(axis=0)
        return [dw1, db1, dw2, db2]

    def last_layer_norm(self) -> float:
        return float(np.linalg.norm(self.w2))

    def feature_norm(self, x: np.ndarray) -> float:
        return float(np.mean(np.linalg.norm(self.hidden(x), axis=1)))


@dataclass(frozen=True)
class TrainConfig:
    """Loss/policy choice plus SGD hyperparameters.

    ``lr_schedule`` is a tuple of (last epoch, learning rate) pairs with
    increasing boundaries; epochs past the final boundary keep the last
    rate. The gamma policy is only consulted for the focal loss kind.
    """

    loss: str = "ce"
    gamma_policy: GammaPolicy = field(default_factory=lambda: fixed_gamma(0.0))
    alpha: float = 0.05
    lr_schedule: tuple = ((150, 0.1), (250, 0.01), (350, 0.001))
    momentum: float = 0.9
    batch_size: int = 128
    epochs: int = 350
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss!r}")
        if any(lr <= 0 for _, lr in self.lr_schedule):
            raise ValueError("learning rates must be positive")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("need at least one epoch")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError("alpha must lie in [0, 1)")

    def lr_at(self, epoch: int) -> float:
        for bound, lr in self.lr_schedule:
            if epoch <= bound:
                return lr
        return self.lr_schedule[-1][1]


@dataclass
class EpochLog:
    """Instrumentation record for one training epoch."""

    epoch: int
    train_nll: float
    train_nll_correct: float
    train_nll_incorrect: float
    train_error: float
    test_nll: float
    test_nll_correct: float
    test_nll_incorrect: float
    test_error: float
    test_ece: float
    test_entropy_correct: float
    test_entropy_incorrect: float
    weight_norm: float
    feature_norm: float
    logit_norm: float


EPOCH_LOG_COLUMNS = tuple(EpochLog.__dataclass_fields__)


class TrainingDiverged(ArithmeticError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


def _split_mean(values: np.ndarray, mask: np.ndarray) -> float:
    return float(np.mean(values[mask])) if np.any(mask) else float("nan")


def _epoch_stats(model, data: Dataset, epoch: int, m: int) -> EpochLog:
    z_train = model.logits(data.x_train)
    p_train = softmax(z_train, axis=1)
    z_test = model.logits(data.x_test)
    p_test = softmax(z_test, axis=1)

    def nll_rows(p, y):
        return -np.log(np.maximum(p[np.arange(len(y)), y], PROB_FLOOR))

    train_nll = nll_rows(p_train, data.y_train)
    train_ok = p_train.argmax(axis=1) == data.y_train
    test_nll = nll_rows(p_test, data.y_test)
    test_ok = p_test.argmax(axis=1) == data.y_test
    test_entropy = -np.sum(p_test * np.log(np.maximum(p_test, PROB_FLOOR)),
                           axis=1)
    return EpochLog(
        epoch=epoch,
        train_nll=float(np.mean(train_nll)),
        train_nll_correct=_split_mean(train_nll, train_ok),
        train_nll_incorrect=_split_mean(train_nll, ~train_ok),
        train_error=float(np.mean(~train_ok)),
        test_nll=float(np.mean(test_nll)),
        test_nll_correct=_split_mean(test_nll, test_ok),
        test_nll_incorrect=_split_mean(test_nll, ~test_ok),
        test_error=float(np.mean(~test_ok)),
        test_ece=ece(EvalSet(p_test, data.y_test), m),
        test_entropy_correct=_split_mean(test_entropy, test_ok),
        test_entropy_incorrect=_split_mean(test_entropy, ~test_ok),
        weight_norm=model.last_layer_norm(),
        feature_norm=model.feature_norm(data.x_train),
        logit_norm=float(np.mean(np.linalg.norm(z_train, axis=1))),
    )


def train(model, data: Dataset, cfg: TrainConfig,
          m: int = DEFAULT_BINS) -> tuple[object, list[EpochLog]]:
    """Minibatch SGD with momentum, one instrumentation record per epoch.

    The shuffle order comes from a single stream seeded by ``cfg.seed``,
    so identical (data, config) pairs reproduce identical parameters and
    logs bit for bit. Raises TrainingDiverged if a loss goes non-finite.
    """
    gen = RandomStream(cfg.seed).generator()
    params = model.param_arrays()
    velocity = [np.zeros_like(p) for p in params]
    n = data.x_train.shape[0]
    logs: list[EpochLog] = []
    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.lr_at(epoch)
        perm = gen.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            xb, yb = data.x_train[idx], data.y_train[idx]
            probs = softmax(model.logits(xb), axis=1)
            gammas = None
            if cfg.loss == "focal":
                p_true = probs[np.arange(len(yb)), yb]
                gammas = gammas_for_batch(cfg.gamma_policy, p_true, epoch)
            value, grad_z = batch_loss_grad(probs, yb, cfg.loss,
                                            gammas=gammas, alpha=cfg.alpha)
            if not np.isfinite(value):
                raise TrainingDiverged(epoch)
            grads = model.backward(xb, grad_z)
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v += g
                p -= lr * v
        logs.append(_epoch_stats(model, data, epoch, m))
    return model, logs


def misclassification_confidence_histogram(model, x: np.ndarray,
                                           y: np.ndarray,
                                           bins: int = 10):
    """Histogram of prediction confidence over misclassified points.

    Returns (counts, edges) for ``bins`` equal-width confidence bins.
    """
    probs = softmax(model.logits(x), axis=1)
    wrong = probs.argmax(axis=1) != y
    conf = probs.max(axis=1)[wrong]
    stats = bin_equal_width(conf, bins) if conf.size else []
    counts = np.array([b.count for b in stats], dtype=int) if stats else \
        np.zeros(bins, dtype=int)
    edges = np.array([i / bins for i in range(bins + 1)])
    return counts, edges


_CRITERION_FIELDS = {"ece": "test_ece", "nll": "test_nll",
                     "error": "test_error"}


def select_early_stopping(logs: list[EpochLog], criterion: str) -> int:
    """Epoch whose held-out criterion ("ece", "nll" or "error") is lowest.

    Ties resolve to the earliest epoch. The held-out split recorded in
    the logs plays the validation role.
    """
    if not logs:
        raise ValueError("no epoch logs")
    try:
        attr = _CRITERION_FIELDS[criterion]
    except KeyError:
        raise ValueError(f"unknown criterion {criterion!r}") from None
    values = [getattr(log, attr) for log in logs]
    if any(v is None or not np.isfinite(v) for v in values):
        raise ValueError(f"criterion field {attr} missing or non-finite")
    best = min(range(len(values)), key=lambda i: values[i])
    return logs[best].epoch


def epoch_logs_to_csv(logs: list[EpochLog]) -> str:
    """Epoch logs as CSV text, one row per epoch, fixed column order."""
    lines = [",".join(EPOCH_LOG_COLUMNS)]
    for log in logs:
        row = [getattr(log, c) for c in EPOCH_LOG_COLUMNS]
        lines.append(",".join(str(v) if isinstance(v, int) else repr(float(v))
                              for v in row))
    return "\n".join(lines) + "\n"


def appendix_config(loss: str, gamma_policy: GammaPolicy | None = None,
                    alpha: float = 0.05, seed: int = 0) -> TrainConfig:
    """Default full-batch configuration for the linear-model experiment:
    plain gradient descent, learning rate 0.1, 2000 iterations."""
    return TrainConfig(loss=loss,
                       gamma_policy=gamma_policy or fixed_gamma(0.0),
                       alpha=alpha, lr_schedule=((2000, 0.1),),
                       momentum=0.0, batch_size=4000,  # full batch
                       epochs=2000, seed=seed)


def mlp_config(loss: str, gamma_policy: GammaPolicy | None = None,
               alpha: float = 0.05, seed: int = 0) -> TrainConfig:
    """Default minibatch configuration for the MLP experiment: batch 128,
    momentum 0.9, stepped learning rates 0.1 / 0.01 / 0.001."""
    return TrainConfig(loss=loss,
                       gamma_policy=gamma_policy or fixed_gamma(0.0),
                       alpha=alpha,
                       lr_schedule=((150, 0.1), (250, 0.01), (350, 0.001)),
                       momentum=0.9, batch_size=128, epochs=350, seed=seed)
