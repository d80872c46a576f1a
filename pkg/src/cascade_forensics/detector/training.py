"""Mini-batch Adam training and the finite-difference gradient harness."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from ..synth.rng import make_rng
from .features import PreparedCascade
from .model import Batch, DetectorModel, flatten, init_params, make_batch, unflatten
from .users import UserVectors

logger = logging.getLogger(__name__)


@dataclass
class DetectorConfig:
    hidden: int = 32
    user_dim: int = 50
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    max_events: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self) -> None:
        if self.hidden < 1 or self.user_dim < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError(f"invalid detector config: {self}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


class TrainingDiverged(RuntimeError):
    pass


def feature_standardization(items: Sequence[PreparedCascade]) -> tuple[np.ndarray, np.ndarray]:
    rows = np.concatenate([it.features for it in items])
    mean = rows.mean(axis=0)
    scale = rows.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def init_model(train_items: Sequence[PreparedCascade], user_vectors: UserVectors,
               config: DetectorConfig) -> DetectorModel:
    rng = make_rng(config.seed, 1)
    mean, scale = feature_standardization(train_items)
    params = init_params(train_items[0].features.shape[1], config.hidden, user_vectors.dim, rng)
    return DetectorModel(params, mean, scale, user_vectors, config=asdict(config))


def dataset_loss(model: DetectorModel, items: Sequence[PreparedCascade], batch_size: int = 256) -> float:
    total = 0.0
    for i in range(0, len(items), batch_size):
        chunk = items[i:i + batch_size]
        total += model.loss(make_batch(chunk, model.user_vectors)) * len(chunk)
    return total / len(items)


def train(items: Sequence[PreparedCascade], user_vectors: UserVectors, config: DetectorConfig | None = None,
          batch_order: Sequence[Sequence[Sequence[int]]] | None = None) -> DetectorModel:
    """Minimize mean binary cross-entropy with Adam.

    Batches are drawn from a per-epoch permutation of the seeded generator
    unless ``batch_order[epoch]`` gives the index batches explicitly.  The
    returned model has no threshold; ``model.history`` holds the full
    training-set loss after each epoch.
    """
    config = config or DetectorConfig()
    config.validate()
    items = [it for it in items if it.features.shape[0] > 0]
    labels = {it.label for it in items}
    if None in labels:
        raise ValueError("training cascades must all be labeled")
    if len(labels) < 2:
        raise ValueError("training requires both classes")
    model = init_model(items, user_vectors, config)
    opt = Adam(model.params, config.learning_rate, config.beta1, config.beta2, config.eps)
    rng = make_rng(config.seed, 2)
    n_epochs = len(batch_order) if batch_order is not None else config.epochs
    for epoch in range(n_epochs):
        if batch_order is not None:
            batches = [list(b) for b in batch_order[epoch]]
        else:
            perm = rng.permutation(len(items))
            batches = [perm[i:i + config.batch_size] for i in range(0, len(items), config.batch_size)]
        for idx in batches:
            batch = make_batch([items[i] for i in idx], user_vectors)
            loss, grads = model.loss_and_grad(batch)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDiverged(
                    f"non-finite loss/gradient at epoch {epoch}: loss={loss}; "
                    f"lower the learning rate (now {config.learning_rate})")
            opt.step(model.params, grads)
        model.history.append(dataset_loss(model, items))
        logger.debug("epoch %d loss %.6f", epoch, model.history[-1])
    return model


GradFn = Callable[[DetectorModel, Batch], tuple[float, dict[str, np.ndarray]]]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), floor)


def gradient_check(model: DetectorModel, batch: Batch, n_coords: int = 200, step: float = 1e-5,
                   seed: int = 0, grad_fn: GradFn | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks ``n_coords`` random parameter coordinates (all of them if fewer).
    ``grad_fn`` overrides the analytic gradient, for testing the harness.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    grad_fn = grad_fn or (lambda m, b: m.loss_and_grad(b))
    _, grads = grad_fn(model, batch)
    theta = flatten(model.params)
    analytic = flatten(grads)
    rng = make_rng(seed, 3)
    coords = rng.choice(theta.size, size=min(n_coords, theta.size), replace=False)
    numeric = np.empty(len(coords))
    for j, i in enumerate(coords):
        old = theta[i]
        theta[i] = old + step
        up = model.loss(batch, unflatten(theta, model.params))
        theta[i] = old - step
        down = model.loss(batch, unflatten(theta, model.params))
        theta[i] = old
        numeric[j] = (up - down) / (2.0 * step)
    return float(relative_error(analytic[coords], numeric).max())
