"""Capture/score network: a GRU over engagement features fused with an account score.

    capture_j = w_c . h_T(j)
    score_j   = mean_{u in j} sigmoid(w_s . y_u + b_s)
    p_j       = sigmoid(alpha * capture_j + beta_s * score_j + c)

GRU step (``*`` is elementwise)::

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    n = tanh(x Wn + (r * h) Un + bn)
    h' = (1 - z) * n + z * h

Padded steps carry the hidden state through unchanged.  Gradients are
derived by hand; ``training.gradient_check`` verifies them numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import PreparedCascade
from .users import UserVectors

PARAM_ORDER = ("Wz", "Uz", "bz", "Wr", "Ur", "br", "Wn", "Un", "bn",
               "wc", "ws", "bs", "alpha", "beta_s", "c")


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class Batch:
    X: np.ndarray            # (B, T, D) raw features, zero padded
    mask: np.ndarray         # (B, T)
    users: np.ndarray        # (N_u, k) user vectors, concatenated over cascades
    user_seg: np.ndarray     # (N_u,) owning cascade
    user_count: np.ndarray   # (B,)
    y: np.ndarray | None     # (B,)
    ids: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.X.shape[0]


def make_batch(items: Sequence[PreparedCascade], user_vectors: UserVectors) -> Batch:
    items = [it for it in items if it.features.shape[0] > 0]
    if not items:
        raise ValueError("empty batch")
    B, T, D = len(items), max(it.features.shape[0] for it in items), items[0].features.shape[1]
    X = np.zeros((B, T, D))
    mask = np.zeros((B, T))
    segs, rows = [], []
    for i, it in enumerate(items):
        n = it.features.shape[0]
        X[i, :n] = it.features
        mask[i, :n] = 1.0
        rows.append(user_vectors.lookup(it.accounts))
        segs.append(np.full(len(it.accounts), i))
    users = np.concatenate(rows) if rows else np.zeros((0, user_vectors.dim))
    seg = np.concatenate(segs).astype(int)
    count = np.bincount(seg, minlength=B).astype(float)
    y = None
    if all(it.label is not None for it in items):
        y = np.array([it.label for it in items], dtype=float)
    return Batch(X, mask, users, seg, count, y, [it.cascade_id for it in items])


def init_params(input_dim: int, hidden: int, user_dim: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, (fan_in, fan_out))

    def orthogonal(n: int) -> np.ndarray:
        q, r = np.linalg.qr(rng.standard_normal((n, n)))
        return q * np.sign(np.diag(r))

    p = {}
    for g in "zrn":
        p[f"W{g}"] = glorot(input_dim, hidden)
        p[f"U{g}"] = orthogonal(hidden)
        p[f"b{g}"] = np.zeros(hidden)
    p["wc"] = rng.normal(0.0, 1.0 / np.sqrt(hidden), hidden)
    p["ws"] = rng.normal(0.0, 0.1, user_dim)
    p["bs"] = np.zeros(())
    p["alpha"] = np.ones(())
    p["beta_s"] = np.ones(())
    p["c"] = np.zeros(())
    return p


@dataclass
class DetectorModel:
    params: dict[str, np.ndarray]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    user_vectors: UserVectors
    threshold: float | None = None
    config: dict = field(default_factory=dict)
    history: list[float] = field(default_factory=list)

    @property
    def hidden(self) -> int:
        return int(self.params["Uz"].shape[0])

    def copy(self) -> "DetectorModel":
        return DetectorModel({k: v.copy() for k, v in self.params.items()}, self.feature_mean.copy(),
                             self.feature_scale.copy(), self.user_vectors, self.threshold,
                             dict(self.config), list(self.history))

    # ------------------------------------------------------------------
    def _forward(self, batch: Batch, params: dict[str, np.ndarray] | None = None):
        p = self.params if params is None else params
        Xn = (batch.X - self.feature_mean) / self.feature_scale
        B, T, _ = Xn.shape
        H = p["Uz"].shape[0]
        W = np.concatenate([p["Wz"], p["Wr"], p["Wn"]], axis=1)
        b = np.concatenate([p["bz"], p["br"], p["bn"]])
        XW = Xn @ W + b
        h = np.zeros((B, H))
        cache = []
        for t in range(T):
            m = batch.mask[:, t][:, None]
            xw = XW[:, t]
            z = sigmoid(xw[:, :H] + h @ p["Uz"])
            r = sigmoid(xw[:, H:2 * H] + h @ p["Ur"])
            rh = r * h
            n = np.tanh(xw[:, 2 * H:] + rh @ p["Un"])
            hn = (1.0 - z) * n + z * h
            cache.append((h, z, r, n, rh, m))
            h = m * hn + (1.0 - m) * h
        capture = h @ p["wc"]
        a = batch.users @ p["ws"] + p["bs"]
        su = sigmoid(a)
        score = np.bincount(batch.user_seg, weights=su, minlength=B) / batch.user_count
        logit = p["alpha"] * capture + p["beta_s"] * score + p["c"]
        return logit, (Xn, h, cache, capture, su, score)

    def logits(self, batch: Batch) -> np.ndarray:
        return self._forward(batch)[0]

    def predict_proba(self, batch: Batch) -> np.ndarray:
        return sigmoid(self.logits(batch))

    def loss(self, batch: Batch, params: dict[str, np.ndarray] | None = None) -> float:
        logit, _ = self._forward(batch, params)
        return float(np.mean(np.logaddexp(0.0, logit) - batch.y * logit))

    def loss_and_grad(self, batch: Batch) -> tuple[float, dict[str, np.ndarray]]:
        """Mean binary cross-entropy over the batch and its gradient for every parameter."""
        p = self.params
        logit, (Xn, hT, cache, capture, su, score) = self._forward(batch)
        y = batch.y
        B = len(y)
        loss = float(np.mean(np.logaddexp(0.0, logit) - y * logit))
        dlogit = (sigmoid(logit) - y) / B

        g: dict[str, np.ndarray] = {}
        g["alpha"] = np.asarray(dlogit @ capture)
        g["beta_s"] = np.asarray(dlogit @ score)
        g["c"] = np.asarray(dlogit.sum())
        dcap = dlogit * p["alpha"]
        g["wc"] = hT.T @ dcap
        dscore = dlogit * p["beta_s"]
        da = (dscore / batch.user_count)[batch.user_seg] * su * (1.0 - su)
        g["ws"] = batch.users.T @ da
        g["bs"] = np.asarray(da.sum())

        H = p["Uz"].shape[0]
        dU = {k: np.zeros((H, H)) for k in ("Uz", "Ur", "Un")}
        dXW = np.zeros(Xn.shape[:2] + (3 * H,))
        dh = dcap[:, None] * p["wc"][None, :]
        for t in range(len(cache) - 1, -1, -1):
            hp, z, r, n, rh, m = cache[t]
            dhn = m * dh
            dhp = (1.0 - m) * dh + dhn * z
            dan = dhn * (1.0 - z) * (1.0 - n * n)
            daz = dhn * (hp - n) * z * (1.0 - z)
            dU["Un"] += rh.T @ dan
            drh = dan @ p["Un"].T
            dhp += drh * r
            dar = drh * hp * r * (1.0 - r)
            dU["Ur"] += hp.T @ dar
            dU["Uz"] += hp.T @ daz
            dhp += dar @ p["Ur"].T + daz @ p["Uz"].T
            dXW[:, t, :H] = daz
            dXW[:, t, H:2 * H] = dar
            dXW[:, t, 2 * H:] = dan
            dh = dhp
        D = Xn.shape[2]
        dW = Xn.reshape(-1, D).T @ dXW.reshape(-1, 3 * H)
        db = dXW.sum(axis=(0, 1))
        for i, gname in enumerate("zrn"):
            g[f"W{gname}"] = dW[:, i * H:(i + 1) * H]
            g[f"b{gname}"] = db[i * H:(i + 1) * H]
        g.update(dU)
        return loss, g


def flatten(params: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(params[k]) for k in PARAM_ORDER])


def unflatten(vec: np.ndarray, like: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    out, i = {}, 0
    for k in PARAM_ORDER:
        n = like[k].size
        out[k] = vec[i:i + n].reshape(like[k].shape).copy()
        i += n
    return out
