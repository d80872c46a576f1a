"""Threshold selection, fold metrics, cross-validation and margin-based inference."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.metrics import average_precision_score, roc_auc_score

from ..synth.rng import make_rng
from .features import PreparedCascade
from .model import DetectorModel, make_batch
from .training import DetectorConfig, train
from .users import build_user_vectors

logger = logging.getLogger(__name__)

METRICS = ("auc", "ap", "f1", "precision", "recall", "macro_f1")


def threshold_candidates(scores: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive values of sorted unique scores padded with 0 and 1."""
    grid = np.unique(np.concatenate([[0.0], np.asarray(scores, dtype=float), [1.0]]))
    return (grid[:-1] + grid[1:]) / 2.0


def confusion(scores: np.ndarray, labels: np.ndarray, theta: float) -> tuple[int, int, int, int]:
    pred = scores >= theta
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    return tp, fp, fn, tn


def gmean(tp: int, fp: int, fn: int, tn: int) -> float:
    return math.sqrt((tp / (tp + fn)) * (tn / (tn + fp)))


def select_threshold(scores: Sequence[float], labels: Sequence[int]) -> tuple[float, float]:
    """Threshold maximizing sqrt(sensitivity * specificity); ties -> smallest threshold.

    Predictions are positive when ``score >= threshold``.  Returns
    ``(threshold, gmean)``.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("threshold selection needs both classes in the validation set")
    cands = threshold_candidates(s)
    # cumulative counts over scores sorted descending: predicted positive = score >= theta
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos_cum = np.concatenate([[0], np.cumsum(y[order] == 1)])
    n_at_least = len(s) - np.searchsorted(s_sorted[::-1], cands, side="left")
    tp = pos_cum[n_at_least]
    fp = n_at_least - tp
    # g-mean is monotone in the integer product tp * tn, which compares ties exactly
    best = int(np.argmax(tp * (n_neg - fp)))  # first max = smallest candidate
    return float(cands[best]), gmean(int(tp[best]), int(fp[best]), n_pos - int(tp[best]), n_neg - int(fp[best]))


def _f1(tp: int, fp: int, fn: int) -> float:
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def binary_metrics(scores: Sequence[float], labels: Sequence[int], theta: float) -> dict[str, float]:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    tp, fp, fn, tn = confusion(s, y, theta)
    f1_pos = _f1(tp, fp, fn)
    f1_neg = _f1(tn, fn, fp)
    return {
        "auc": float(roc_auc_score(y, s)),
        "ap": float(average_precision_score(y, s)),
        "f1": f1_pos,
        "precision": tp / (tp + fp) if tp + fp else 0.0,
        "recall": tp / (tp + fn) if tp + fn else 0.0,
        "macro_f1": (f1_pos + f1_neg) / 2.0,
    }


@dataclass
class FoldReport:
    fold: int
    threshold: float
    auc: float
    ap: float
    f1: float
    precision: float
    recall: float
    macro_f1: float
    n_train: int
    n_valid: int


def summarize_folds(reports: Sequence[FoldReport]) -> dict[str, tuple[float, float]]:
    return {m: (float(np.mean([getattr(r, m) for r in reports])), float(np.std([getattr(r, m) for r in reports])))
            for m in METRICS}


def write_fold_reports(reports: Sequence[FoldReport], path: str | Path) -> None:
    """Per-fold rows followed by ``mean`` and ``std`` rows (one column per metric)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "threshold", *METRICS, "n_train", "n_valid"])
        for r in reports:
            w.writerow([r.fold, f"{r.threshold:.10g}", *(f"{getattr(r, m):.10g}" for m in METRICS),
                        r.n_train, r.n_valid])
        summary = summarize_folds(reports)
        w.writerow(["mean", "", *(f"{summary[m][0]:.10g}" for m in METRICS), "", ""])
        w.writerow(["std", "", *(f"{summary[m][1]:.10g}" for m in METRICS), "", ""])


def stratified_folds(labels: Sequence[int], folds: int, seed: int) -> list[np.ndarray]:
    """Fold index arrays; each class is shuffled and dealt round-robin."""
    y = np.asarray(labels)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    rng = make_rng(seed, 4)
    out: list[list[int]] = [[] for _ in range(folds)]
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if len(idx) < folds:
            raise ValueError(f"class {cls} has {len(idx)} members, fewer than {folds} folds")
        for j, i in enumerate(rng.permutation(idx)):
            out[j % folds].append(int(i))
    return [np.array(sorted(f)) for f in out]


def predict(model: DetectorModel, items: Sequence[PreparedCascade], batch_size: int = 256) -> np.ndarray:
    out = []
    for i in range(0, len(items), batch_size):
        out.append(model.predict_proba(make_batch(items[i:i + batch_size], model.user_vectors)))
    return np.concatenate(out) if out else np.zeros(0)


def cross_validate(items: Sequence[PreparedCascade], folds: int = 5,
                   config: DetectorConfig | None = None) -> tuple[list[FoldReport], list[DetectorModel]]:
    """Stratified k-fold training; each fold's threshold is chosen on its validation split."""
    config = config or DetectorConfig()
    items = [it for it in items if it.label is not None]
    y = np.array([it.label for it in items])
    splits = stratified_folds(y, folds, config.seed)
    reports, models = [], []
    for f, valid_idx in enumerate(splits):
        valid_set = set(valid_idx.tolist())
        train_items = [it for i, it in enumerate(items) if i not in valid_set]
        valid_items = [items[i] for i in valid_idx]
        uv = build_user_vectors([it.accounts for it in train_items], config.user_dim, seed=config.seed)
        model = train(train_items, uv, replace(config, seed=config.seed + f))
        scores = predict(model, valid_items)
        theta, _ = select_threshold(scores, y[valid_idx])
        model.threshold = theta
        m = binary_metrics(scores, y[valid_idx], theta)
        reports.append(FoldReport(f, theta, n_train=len(train_items), n_valid=len(valid_items), **m))
        models.append(model)
        logger.info("fold %d: auc=%.4f f1=%.4f theta=%.4f", f, m["auc"], m["f1"], theta)
    return reports, models


@dataclass
class MarginPrediction:
    cascade_id: str
    score: float
    margin: float
    decision: str  # "Unreliable" | "Reliable" | "Abstain"


def ensemble_scores(models: Sequence[DetectorModel], items: Sequence[PreparedCascade]) -> tuple[np.ndarray, float]:
    if not models or any(m.threshold is None for m in models):
        raise ValueError("ensemble models need thresholds")
    scores = np.mean([predict(m, items) for m in models], axis=0)
    theta = float(np.mean([m.threshold for m in models]))
    return scores, theta


def keep_count(n: int, q: float) -> int:
    return int(math.floor(q * n + 1e-9))


def margin_decisions(ids: Sequence[str], scores: np.ndarray, theta: float, q: float) -> list[MarginPrediction]:
    """Keep the top-``q`` fraction by |margin| on each side of the threshold; the rest abstain.

    Zero margin counts as the positive side (matching ``score >= theta``).
    """
    if not 0.0 < q <= 1.0:
        raise ValueError("keep fraction must be in (0, 1]")
    margins = np.asarray(scores, dtype=float) - theta
    pos = sorted((i for i in range(len(ids)) if margins[i] >= 0), key=lambda i: (-margins[i], ids[i]))
    neg = sorted((i for i in range(len(ids)) if margins[i] < 0), key=lambda i: (margins[i], ids[i]))
    decision = ["Abstain"] * len(ids)
    for i in pos[:keep_count(len(pos), q)]:
        decision[i] = "Unreliable"
    for i in neg[:keep_count(len(neg), q)]:
        decision[i] = "Reliable"
    return [MarginPrediction(ids[i], float(scores[i]), float(margins[i]), decision[i]) for i in range(len(ids))]


def infer_with_margins(models: Sequence[DetectorModel], items: Sequence[PreparedCascade], q: float = 0.8):
    """Returns (unreliable ids, reliable ids, abstained ids, per-cascade predictions)."""
    scores, theta = ensemble_scores(models, items)
    preds = margin_decisions([it.cascade_id for it in items], scores, theta, q)
    sets = {d: {p.cascade_id for p in preds if p.decision == d} for d in ("Unreliable", "Reliable", "Abstain")}
    return sets["Unreliable"], sets["Reliable"], sets["Abstain"], preds


def write_predictions(preds: Sequence[MarginPrediction], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cascade_id", "score", "margin", "decision"])
        for p in sorted(preds, key=lambda p: p.cascade_id):
            w.writerow([p.cascade_id, repr(p.score), repr(p.margin), p.decision])


def fold_report_dicts(reports: Sequence[FoldReport]) -> list[dict]:
    return [asdict(r) for r in reports]
