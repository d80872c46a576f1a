"""Topic clustering of short texts with mean-pooled word embeddings and k-means."""

from __future__ import annotations

import csv
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.metrics import davies_bouldin_score, silhouette_score

from .synth.rng import make_rng

logger = logging.getLogger(__name__)

STOPWORDS_VERSION = 1
SILHOUETTE_SAMPLE = 5000

_URL = re.compile(r"(?:https?://|www\.)\S+")
_MENTION = re.compile(r"@\w+")
_HASHTAG = re.compile(r"#\w+")
_SPECIAL = re.compile(r"[^\w\s]|_")


class EmbeddingFormatError(ValueError):
    pass


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    text = resources.files("cascade_forensics.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def preprocess(text: str) -> list[str]:
    """Lowercase, strip URLs/mentions/hashtags/punctuation, tokenize, drop stop-words."""
    s = text.lower()
    s = _URL.sub(" ", s)
    s = _MENTION.sub(" ", s)
    s = _HASHTAG.sub(" ", s)
    s = _SPECIAL.sub(" ", s)
    stop = stopwords()
    return [t for t in s.split() if t not in stop]


@dataclass
class EmbeddingTable:
    vocab: dict[str, int]
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def mean_vector(self, tokens: Iterable[str]) -> tuple[np.ndarray, int]:
        """Mean of in-vocabulary token vectors and the hit count (zero vector when no hit)."""
        rows = [self.vocab[t] for t in tokens if t in self.vocab]
        if not rows:
            return np.zeros(self.dim), 0
        return self.vectors[rows].mean(axis=0), len(rows)

    @classmethod
    def from_dict(cls, table: dict[str, Sequence[float]]) -> "EmbeddingTable":
        tokens = list(table)
        vecs = np.array([table[t] for t in tokens], dtype=float)
        return cls({t: i for i, t in enumerate(tokens)}, vecs.reshape(len(tokens), -1))


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read the textual word-vector format (optional ``count dim`` header line)."""
    vocab: dict[str, int] = {}
    rows: list[list[float]] = []
    dim: int | None = None
    header_count: int | None = None
    n_dupes = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                header_count, dim = int(parts[0]), int(parts[1])
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise EmbeddingFormatError(f"line {lineno}: token {token!r} has no vector")
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"line {lineno}: token {token!r} has {len(values)} values, expected {dim}")
            try:
                vec = [float(v) for v in values]
            except ValueError as exc:
                raise EmbeddingFormatError(f"line {lineno}: {exc}") from exc
            if token in vocab:
                n_dupes += 1
                continue
            vocab[token] = len(rows)
            rows.append(vec)
    if dim is None:
        raise EmbeddingFormatError(f"{path}: no vectors")
    if n_dupes:
        logger.warning("%s: %d duplicate tokens ignored (first occurrence kept)", path, n_dupes)
    if header_count is not None and header_count != len(rows) + n_dupes:
        logger.warning("%s: header announces %d rows, found %d", path, header_count, len(rows) + n_dupes)
    return EmbeddingTable(vocab, np.array(rows, dtype=float).reshape(len(rows), dim))


@dataclass
class EmbeddedCorpus:
    vectors: np.ndarray
    ids: list[str]
    tokens: list[list[str]]
    excluded: list[str]


def embed_corpus(tweets: Sequence[tuple[str, str]], table: EmbeddingTable) -> EmbeddedCorpus:
    """Mean-pool each ``(id, text)``; tweets without in-vocabulary tokens are excluded."""
    vecs, ids, toks, excluded = [], [], [], []
    for tid, text in tweets:
        tokens = preprocess(text)
        v, hits = table.mean_vector(tokens)
        if hits == 0:
            excluded.append(tid)
            continue
        vecs.append(v)
        ids.append(tid)
        toks.append(tokens)
    if excluded:
        logger.info("%d texts without in-vocabulary tokens excluded", len(excluded))
    mat = np.array(vecs, dtype=float).reshape(len(vecs), table.dim)
    return EmbeddedCorpus(mat, ids, toks, excluded)


# --------------------------------------------------------------------------
# k-means


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    history: list[float]
    n_iter: int
    converged: bool


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    d2 = ((X - X[centers[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(idx)
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(1))
    return X[centers].copy()


def _update(X: np.ndarray, labels: np.ndarray, C: np.ndarray) -> np.ndarray:
    k = C.shape[0]
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        # an empty cluster takes the point farthest from its centroid (from a cluster with >1 member)
        far = ((X - C[labels]) ** 2).sum(1)
        far[counts[labels] <= 1] = -1.0
        i = int(np.argmax(far))
        if far[i] < 0:
            continue
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
    sums = np.zeros_like(C)
    np.add.at(sums, labels, X)
    new = C.copy()
    nz = counts > 0
    new[nz] = sums[nz] / counts[nz, None]
    return new


def kmeans(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300,
           tol: float = 1e-6) -> KMeansResult:
    """Lloyd's algorithm from a k-means++ start.

    Stops when assignments stop changing (``converged``) or when the total
    squared centroid shift drops to ``tol``.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < k:
        raise ValueError(f"{X.shape[0]} points < k={k}")
    C = kmeans_plus_plus(X, k, rng)
    labels = np.argmin(_sq_dists(X, C), axis=1)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new_c = _update(X, labels, C)
        history.append(float(((X - new_c[labels]) ** 2).sum()))
        new_labels = np.argmin(_sq_dists(X, new_c), axis=1)
        shift = float(((new_c - C) ** 2).sum())
        C = new_c
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        if shift <= tol:
            C = _update(X, labels, C)
            history.append(float(((X - C[labels]) ** 2).sum()))
            break
    return KMeansResult(C, labels, history[-1], history, it, converged)


def best_kmeans(X: np.ndarray, k: int, rng: np.random.Generator, restarts: int = 10,
                max_iter: int = 300, tol: float = 1e-6) -> KMeansResult:
    best = None
    for _ in range(restarts):
        res = kmeans(X, k, rng, max_iter=max_iter, tol=tol)
        if best is None or res.inertia < best.inertia:
            best = res
    assert best is not None
    return best


@dataclass
class TopicModel:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    diagnostics: list[dict] = field(default_factory=list)
    inertia: float = 0.0


def select_k(diagnostics: list[dict]) -> int:
    """Largest sum of min-max normalized silhouette and negated Davies-Bouldin; ties -> smaller K."""
    sil = np.array([d["silhouette"] for d in diagnostics])
    db = np.array([d["davies_bouldin"] for d in diagnostics])
    sil_n = (sil - sil.min()) / (sil.max() - sil.min()) if sil.max() > sil.min() else np.zeros_like(sil)
    db_n = (db.max() - db) / (db.max() - db.min()) if db.max() > db.min() else np.zeros_like(db)
    best_k, best_score = None, -math.inf
    for d, s in zip(diagnostics, sil_n + db_n):
        d["score"] = float(s)
        if s > best_score:
            best_k, best_score = d["k"], s
    assert best_k is not None
    return int(best_k)


def cluster_topics(vectors: np.ndarray, k_min: int = 3, k_max: int = 35, seed: int = 0,
                   restarts: int = 10, silhouette_sample: int = SILHOUETTE_SAMPLE) -> TopicModel:
    X = np.asarray(vectors, dtype=float)
    n = X.shape[0]
    rng = make_rng(seed)
    diagnostics, fits = [], {}
    for k in range(k_min, k_max + 1):
        if n <= k:
            logger.info("k=%d skipped: only %d points", k, n)
            continue
        res = best_kmeans(X, k, rng, restarts=restarts)
        if len(np.unique(res.labels)) < 2:
            continue
        if n > silhouette_sample:
            idx = np.sort(rng.choice(n, size=silhouette_sample, replace=False))
        else:
            idx = np.arange(n)
        sub_labels = res.labels[idx]
        if 2 <= len(np.unique(sub_labels)) <= len(idx) - 1:
            sil = float(silhouette_score(X[idx], sub_labels))
        else:
            sil = -1.0
        db = float(davies_bouldin_score(X, res.labels))
        diagnostics.append({"k": k, "inertia": res.inertia, "silhouette": sil, "davies_bouldin": db})
        fits[k] = res
    if not diagnostics:
        raise ValueError(f"no K in [{k_min}, {k_max}] is feasible for {n} points")
    k = select_k(diagnostics)
    res = fits[k]
    return TopicModel(k, res.centroids, res.labels, diagnostics, res.inertia)


# --------------------------------------------------------------------------
# summaries


@dataclass
class TopicSummary:
    cluster_id: int
    size: int
    top_words: list[tuple[str, float]]
    representatives: list[str]


def tfidf_top_words(docs: dict[int, list[str]], top_words: int = 15) -> dict[int, list[tuple[str, float]]]:
    """Cluster-as-document tf-idf: raw count times ln(K / document frequency)."""
    k = len(docs)
    tfs = {c: Counter(toks) for c, toks in docs.items()}
    df: Counter[str] = Counter()
    for tf in tfs.values():
        df.update(tf.keys())
    out = {}
    for c, tf in tfs.items():
        scored = [(t, n * math.log(k / df[t])) for t, n in tf.items()]
        scored = [(t, s) for t, s in scored if s > 0.0]
        scored.sort(key=lambda ts: (-ts[1], ts[0]))
        out[c] = scored[:top_words]
    return out


def summarize_topics(model: TopicModel, corpus: EmbeddedCorpus, top_words: int = 15, top_tweets: int = 100,
                     discard: Sequence[int] = (), merge: Sequence[Sequence[int]] = ()) -> list[TopicSummary]:
    """Top tf-idf words and centroid-nearest texts per cluster.

    ``discard`` and ``merge`` are manual curation directives over cluster ids;
    a merged group takes the smallest id of the group.
    """
    target = {c: c for c in range(model.k)}
    for group in merge:
        head = min(group)
        for c in group:
            target[c] = head
    for c in discard:
        target[c] = -1
    labels = np.array([target[int(c)] for c in model.labels])
    clusters = sorted({c for c in target.values() if c >= 0})
    docs = {c: [t for i in np.flatnonzero(labels == c) for t in corpus.tokens[i]] for c in clusters}
    words = tfidf_top_words(docs, top_words)
    out = []
    for c in clusters:
        members = np.flatnonzero(labels == c)
        if len(members) == 0:
            out.append(TopicSummary(c, 0, [], []))
            continue
        centroid = corpus.vectors[members].mean(axis=0)
        dist = np.sqrt(((corpus.vectors[members] - centroid) ** 2).sum(1))
        order = sorted(range(len(members)), key=lambda j: (dist[j], corpus.ids[members[j]]))
        reps = [corpus.ids[members[j]] for j in order[:top_tweets]]
        out.append(TopicSummary(c, len(members), words[c], reps))
    return out


def write_summaries(summaries: Sequence[TopicSummary], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "size", "top_words", "representative_ids"])
        for s in summaries:
            w.writerow([s.cluster_id, s.size, ";".join(f"{t}:{v:.6f}" for t, v in s.top_words),
                        ";".join(s.representatives)])


def write_diagnostics(model: TopicModel, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "inertia", "silhouette", "davies_bouldin", "score", "selected"])
        for d in model.diagnostics:
            w.writerow([d["k"], repr(d["inertia"]), repr(d["silhouette"]), repr(d["davies_bouldin"]),
                        repr(d.get("score", 0.0)), int(d["k"] == model.k)])
