"""Softmax readout over Z expectations, cross-entropy loss, ADAM, and
multi-seed training runs."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .data import DatasetSplit, ImageSet

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-30
EVAL_CHUNK = 500


class TrainingError(RuntimeError):
    pass


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(circuit, features, params) -> np.ndarray:
    """Class probabilities; ``features`` may be one sample or a batch."""
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    probs = softmax(qsim.expectations(circuit, features, params))
    return probs[0] if single else probs


def loss(probs, label) -> float | np.ndarray:
    """Cross-entropy ``-ln p[label]`` with the probability floored at 1e-30."""
    probs = np.asarray(probs, dtype=np.float64)
    label = np.asarray(label)
    picked = np.take_along_axis(np.atleast_2d(probs), np.atleast_1d(label)[:, None], axis=1)[:, 0]
    out = -np.log(np.maximum(picked, PROB_FLOOR))
    return float(out[0]) if probs.ndim == 1 else out


def per_sample_loss_grad(circuit, features, labels, params):
    """Per-sample losses, probabilities and loss gradients ``(B, P)``."""
    labels = np.asarray(labels)
    onehot = np.eye(circuit.num_qubits)[labels]
    box = {}

    def cotangent(ez):
        box["probs"] = p = softmax(ez)
        return p - onehot  # d(-ln softmax_y) / dz

    _, grads = qsim.value_and_gradient(circuit, features, params, cotangent)
    probs = box["probs"]
    return loss(probs, labels), probs, grads


def batch_loss_grad(circuit, features, labels, params, threads: int = 1):
    """Mean loss, accuracy count and mean gradient over a batch.

    With ``threads > 1`` the batch is cut into contiguous chunks evaluated
    concurrently; per-sample gradients are re-assembled in sample order
    before the reduction, so the result does not depend on scheduling.
    """
    n = len(labels)
    if threads <= 1 or n < 2 * threads:
        losses, probs, grads = per_sample_loss_grad(circuit, features, labels, params)
    else:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(
                lambda ab: per_sample_loss_grad(circuit, features[ab[0]:ab[1]],
                                                labels[ab[0]:ab[1]], params),
                zip(bounds[:-1], bounds[1:])))
        losses = np.concatenate([p[0] for p in parts])
        probs = np.concatenate([p[1] for p in parts])
        grads = np.concatenate([p[2] for p in parts])
    correct = int((probs.argmax(axis=1) == labels).sum())
    return float(losses.mean()), correct, grads.sum(axis=0) / n


# --------------------------------------------------------------------------
# ADAM
# --------------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    @classmethod
    def zeros(cls, num_params: int, learning_rate: float = 0.001, **kw) -> "AdamState":
        return cls(np.zeros(num_params), np.zeros(num_params), 0, learning_rate, **kw)


def adam_step(state: AdamState, params, grads):
    """One bias-corrected ADAM update; returns ``(new_params, new_state)``."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != state.m.shape:
        raise ValueError(f"gradient shape {grads.shape} != {state.m.shape}")
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise TrainingError(
            f"non-finite gradient at step {state.t + 1}, components {bad[:10].tolist()}")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_params = np.asarray(params, dtype=np.float64) - state.learning_rate * m_hat / (
        np.sqrt(v_hat) + state.eps)
    new_state = AdamState(m, v, t, state.learning_rate, state.beta1, state.beta2, state.eps)
    return new_params, new_state


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 25
    batch_size: int = 32
    seeds: tuple = (0, 1, 2, 3, 4)
    threads: int = 1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.seeds:
            raise ValueError("need at least one seed")
        self.seeds = tuple(int(s) for s in self.seeds)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float


@dataclass
class RunMetrics:
    seed: int
    epochs: list[EpochRecord] = field(default_factory=list)
    test_acc: float = float("nan")
    wall_time: float = 0.0
    params: np.ndarray | None = field(default=None, repr=False)


def init_params(num_params: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, np.pi, size=num_params)


def accuracy(circuit, images: ImageSet, params) -> float:
    if len(images) == 0:
        return float("nan")
    x = images.features
    correct = 0
    for a in range(0, len(images), EVAL_CHUNK):
        probs = forward(circuit, x[a:a + EVAL_CHUNK], params)
        correct += int((probs.argmax(axis=1) == images.labels[a:a + EVAL_CHUNK]).sum())
    return correct / len(images)


def train_run(circuit, split: DatasetSplit, config: TrainConfig, seed: int) -> RunMetrics:
    """Train from a seeded uniform [0, pi] initialisation.

    One generator drives initialisation and the per-epoch batch order.
    Training loss and accuracy are accumulated on the fly over the epoch's
    batches; validation accuracy uses the parameters at epoch end.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    params = init_params(circuit.num_params, rng)
    opt = AdamState.zeros(circuit.num_params, config.learning_rate)
    x, y = split.train.features, split.train.labels
    n = len(y)
    run = RunMetrics(seed)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for a in range(0, n, config.batch_size):
            idx = order[a:a + config.batch_size]
            batch_loss, batch_correct, g = batch_loss_grad(
                circuit, x[idx], y[idx], params, config.threads)
            params, opt = adam_step(opt, params, g)
            loss_sum += batch_loss * len(idx)
            correct += batch_correct
        val = accuracy(circuit, split.validation, params)
        run.epochs.append(EpochRecord(epoch, loss_sum / n, correct / n, val))
        log.info("seed %d epoch %d loss %.4f train %.4f val %.4f",
                 seed, epoch, loss_sum / n, correct / n, val)
    run.test_acc = accuracy(circuit, split.test, params)
    run.params = params
    run.wall_time = time.perf_counter() - start
    return run


@dataclass
class ExperimentResult:
    label: str
    runs: list[RunMetrics]

    @property
    def val_curves(self) -> np.ndarray:
        return np.array([[e.val_acc for e in r.epochs] for r in self.runs])

    @property
    def test_accs(self) -> np.ndarray:
        return np.array([r.test_acc for r in self.runs])

    @property
    def test_mean(self) -> float:
        return float(self.test_accs.mean())

    @property
    def test_std(self) -> float:
        return float(self.test_accs.std())


def run_experiment(circuit, split: DatasetSplit, config: TrainConfig) -> ExperimentResult:
    label = circuit.meta.label if circuit.meta is not None else "circuit"
    runs = [train_run(circuit, split, config, s) for s in config.seeds]
    return ExperimentResult(label, runs)


# --------------------------------------------------------------------------
# metrics files
# --------------------------------------------------------------------------


def format_run_metrics(run: RunMetrics) -> str:
    lines = ["epoch trainloss trainacc valacc"]
    lines += [f"{e.epoch} {e.train_loss:.10f} {e.train_acc:.10f} {e.val_acc:.10f}"
              for e in run.epochs]
    return "\n".join(lines) + "\n"


def format_aggregate(result: ExperimentResult) -> str:
    """Mean and (population) std of validation accuracy per epoch, in percent."""
    curves = 100.0 * result.val_curves
    mean, std = curves.mean(axis=0), curves.std(axis=0)
    lines = ["epoch vamean vastd"]
    lines += [f"{i + 1} {m:.6f} {s:.6f}" for i, (m, s) in enumerate(zip(mean, std))]
    return "\n".join(lines) + "\n"


def format_summary(result: ExperimentResult) -> str:
    lines = ["seed testacc"]
    lines += [f"{r.seed} {r.test_acc:.10f}" for r in result.runs]
    lines.append(f"# {result.label} test accuracy {100 * result.test_mean:.2f} "
                 f"+- {100 * result.test_std:.2f} %")
    return "\n".join(lines) + "\n"
