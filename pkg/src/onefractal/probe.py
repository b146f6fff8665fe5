"""Desk-scale learnability probe.

A one-hidden-layer ReLU MLP over down-sampled pixels, trained with the
perturbation-classification loss: the Monte-Carlo cross entropy over the
family's class indices. Everything runs in float64 with explicit seeds,
so two runs with the same config produce bit-identical parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .image import GrayImage


class GradMismatch(Exception):
    """Analytic and finite-difference gradients disagree."""

    def __init__(self, message: str, param_index: int):
        super().__init__(message)
        self.param_index = param_index


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.1
    input_resolution: int = 64
    rng_seed: int = 0
    holdout_fraction: float = 0.2  # used by crop-based holdouts

    def __post_init__(self) -> None:
        if min(self.epochs, self.batch_size, self.input_resolution) < 1:
            raise ValueError("epochs, batch_size, input_resolution must be >= 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError(
                f"holdout_fraction must be in (0, 1), got {self.holdout_fraction!r}"
            )
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate!r}")


class ProbeModel:
    """Flat parameter vector theta = [W1 | b1 | W2 | b2]."""

    def __init__(self, n_inputs: int, n_hidden: int, n_classes: int, theta: np.ndarray):
        expected = n_inputs * n_hidden + n_hidden + n_hidden * n_classes + n_classes
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (expected,):
            raise ValueError(f"theta must have {expected} entries, got {theta.shape}")
        self.n_inputs = n_inputs
        self.n_hidden = n_hidden
        self.n_classes = n_classes
        self.theta = theta

    @property
    def param_count(self) -> int:
        return self.theta.size

    def _views(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        ni, nh, nc = self.n_inputs, self.n_hidden, self.n_classes
        o1 = ni * nh
        o2 = o1 + nh
        o3 = o2 + nh * nc
        w1 = self.theta[:o1].reshape(ni, nh)
        b1 = self.theta[o1:o2]
        w2 = self.theta[o2:o3].reshape(nh, nc)
        b2 = self.theta[o3:]
        return w1, b1, w2, b2

    @classmethod
    def zeros(cls, n_inputs: int, n_hidden: int, n_classes: int) -> "ProbeModel":
        count = n_inputs * n_hidden + n_hidden + n_hidden * n_classes + n_classes
        return cls(n_inputs, n_hidden, n_classes, np.zeros(count))

    @classmethod
    def random_init(
        cls, n_inputs: int, n_hidden: int, n_classes: int, rng_seed: int
    ) -> "ProbeModel":
        """He-scaled weights, zero biases."""
        rng = np.random.default_rng(rng_seed)
        w1 = rng.standard_normal((n_inputs, n_hidden)) * math.sqrt(2.0 / n_inputs)
        w2 = rng.standard_normal((n_hidden, n_classes)) * math.sqrt(2.0 / n_hidden)
        theta = np.concatenate(
            [w1.ravel(), np.zeros(n_hidden), w2.ravel(), np.zeros(n_classes)]
        )
        return cls(n_inputs, n_hidden, n_classes, theta)

    def logits(self, x: np.ndarray) -> np.ndarray:
        w1, b1, w2, b2 = self._views()
        hidden = np.maximum(x @ w1 + b1, 0.0)
        return hidden @ w2 + b2

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)


def image_features(img: GrayImage, resolution: int) -> np.ndarray:
    """Flatten an image to [0, 1] features at the probe resolution.

    Integer down-sampling uses block means; other sizes fall back to
    bilinear resampling.
    """
    px = img.pixels.astype(np.float64) / 255.0
    h, w = px.shape
    if (h, w) != (resolution, resolution):
        if h % resolution == 0 and w % resolution == 0:
            px = px.reshape(
                resolution, h // resolution, resolution, w // resolution
            ).mean(axis=(1, 3))
        else:
            rows = np.linspace(0.0, h - 1.0, resolution)
            cols = np.linspace(0.0, w - 1.0, resolution)
            grid = np.meshgrid(rows, cols, indexing="ij")
            px = ndimage.map_coordinates(px, grid, order=1, mode="nearest")
    return px.ravel()


Batch = Sequence[tuple[GrayImage | np.ndarray, int]]


def _featurize_batch(model: ProbeModel, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    resolution = math.isqrt(model.n_inputs)
    if resolution * resolution != model.n_inputs:
        raise ValueError(f"model input size {model.n_inputs} is not square")
    xs, ys = [], []
    for item, label in batch:
        if not 0 <= label < model.n_classes:
            raise ValueError(f"label {label} out of range for {model.n_classes} classes")
        if isinstance(item, GrayImage):
            xs.append(image_features(item, resolution))
        else:
            xs.append(np.asarray(item, dtype=np.float64).ravel())
        ys.append(label)
    return np.stack(xs), np.asarray(ys, dtype=np.intp)


def _loss_and_grad(
    model: ProbeModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    w1, b1, w2, b2 = model._views()
    n = x.shape[0]
    pre = x @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ w2 + b2

    peak = logits.max(axis=1, keepdims=True)
    lse = peak[:, 0] + np.log(np.sum(np.exp(logits - peak), axis=1))
    loss = float(np.mean(lse - logits[np.arange(n), y]))

    prob = np.exp(logits - lse[:, None])
    grad_logits = prob
    grad_logits[np.arange(n), y] -= 1.0
    grad_logits /= n
    grad_w2 = hidden.T @ grad_logits
    grad_b2 = grad_logits.sum(axis=0)
    grad_hidden = grad_logits @ w2.T
    grad_hidden[pre <= 0.0] = 0.0
    grad_w1 = x.T @ grad_hidden
    grad_b1 = grad_hidden.sum(axis=0)
    grad = np.concatenate(
        [grad_w1.ravel(), grad_b1, grad_w2.ravel(), grad_b2]
    )
    return loss, grad


def lpce_loss(model: ProbeModel, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of the class indices plus its
    gradient with respect to theta.

    This is the Monte-Carlo estimate of the perturbation cross entropy:
    each batch item is one sampled perturbation with its index as label.
    """
    if len(batch) == 0:
        raise ValueError("batch must not be empty")
    x, y = _featurize_batch(model, batch)
    return _loss_and_grad(model, x, y)


@dataclass(frozen=True)
class TrainResult:
    model: ProbeModel
    holdout_accuracy: float
    chance: float
    epoch_losses: tuple[float, ...]

    @property
    def ratio(self) -> float:
        return self.holdout_accuracy / self.chance


def train(train_set: Batch, holdout_set: Batch, cfg: TrainConfig) -> TrainResult:
    """Mini-batch SGD with a seed-fixed shuffling order.

    The holdout is scored once at the end; accuracy is over whatever
    views the caller put there (re-rendered classes for fractal
    families, held-out crops otherwise).
    """
    labels = sorted({label for _, label in train_set})
    if len(labels) < 2:
        raise ValueError("training needs at least two classes")
    n_classes = max(labels) + 1
    resolution = cfg.input_resolution
    model = ProbeModel.random_init(
        resolution * resolution, 64, n_classes, cfg.rng_seed
    )
    x, y = _featurize_batch(model, train_set)
    xh, yh = _featurize_batch(model, holdout_set)

    rng = np.random.default_rng(cfg.rng_seed)
    n = x.shape[0]
    batch = min(cfg.batch_size, n)
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        steps = 0
        for start in range(0, n, batch):
            take = order[start : start + batch]
            loss, grad = _loss_and_grad(model, x[take], y[take])
            model.theta -= cfg.learning_rate * grad
            epoch_loss += loss
            steps += 1
        losses.append(epoch_loss / steps)

    accuracy = float(np.mean(model.predict(xh) == yh))
    return TrainResult(
        model=model,
        holdout_accuracy=accuracy,
        chance=1.0 / n_classes,
        epoch_losses=tuple(losses),
    )


def crop_views(
    image: GrayImage, size: int, count: int, rng_seed: int
) -> list[GrayImage]:
    """Random size x size crops; the holdout surrogate for families
    whose class image is unique."""
    h, w = image.pixels.shape
    if size > min(h, w):
        raise ValueError(f"crop {size} larger than image {h}x{w}")
    rng = np.random.default_rng(rng_seed)
    views = []
    for _ in range(count):
        r = int(rng.integers(0, h - size + 1))
        c = int(rng.integers(0, w - size + 1))
        views.append(GrayImage(image.pixels[r : r + size, c : c + size].copy()))
    return views


@dataclass(frozen=True)
class GradCheckReport:
    trials: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(
    rng_seed: int = 0, tolerance: float = 1e-3, trials: int = 10
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences on
    random small configurations.

    Raises GradMismatch (with the offending parameter index) as soon as
    one coordinate exceeds the tolerance.
    """
    rng = np.random.default_rng(rng_seed)
    step = 1e-5
    worst = 0.0
    for trial in range(trials):
        side = int(rng.integers(3, 6))
        n_hidden = int(rng.integers(3, 7))
        n_classes = int(rng.integers(2, 6))
        n_inputs = side * side
        count = n_inputs * n_hidden + n_hidden + n_hidden * n_classes + n_classes
        model = ProbeModel(
            n_inputs, n_hidden, n_classes, 0.5 * rng.standard_normal(count)
        )
        batch_size = int(rng.integers(2, 7))
        x = rng.random((batch_size, n_inputs))
        y = rng.integers(0, n_classes, batch_size).astype(np.intp)

        _, analytic = _loss_and_grad(model, x, y)
        for k in range(count):
            saved = model.theta[k]
            model.theta[k] = saved + step
            up, _ = _loss_and_grad(model, x, y)
            model.theta[k] = saved - step
            down, _ = _loss_and_grad(model, x, y)
            model.theta[k] = saved
            numeric = (up - down) / (2.0 * step)
            rel = abs(analytic[k] - numeric) / max(
                abs(analytic[k]) + abs(numeric), 1e-6
            )
            if rel > worst:
                worst = rel
            if rel > tolerance:
                raise GradMismatch(
                    f"trial {trial}: parameter {k} rel error {rel:.2e}", k
                )
    return GradCheckReport(trials=trials, max_rel_error=worst, tolerance=tolerance)


def save_model(model: ProbeModel, path: str | Path, header_extra: dict | None = None) -> None:
    """Flat float64 binary with one JSON header line."""
    header = {
        "n_inputs": model.n_inputs,
        "n_hidden": model.n_hidden,
        "n_classes": model.n_classes,
    }
    if header_extra:
        header.update(header_extra)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        fh.write(model.theta.astype("<f8").tobytes())


def load_model(path: str | Path) -> tuple[ProbeModel, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        theta = np.frombuffer(fh.read(), dtype="<f8")
    model = ProbeModel(
        header["n_inputs"], header["n_hidden"], header["n_classes"], theta.copy()
    )
    return model, header
