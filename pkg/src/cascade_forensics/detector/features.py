"""Per-engagement feature sequences for the capture network."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cascades import Cascade, Label
from ..ingest import TweetType
from ..topics import EmbeddingTable, preprocess

HOUR = 3600.0
DAY = 86400.0
TYPE_ORDER = (TweetType.ORIGINAL, TweetType.REPLY, TweetType.RETWEET, TweetType.QUOTE)
N_EXTRA = 2 + len(TYPE_ORDER) + 3


def feature_names(embedding_dim: int) -> list[str]:
    return ([f"text_{i}" for i in range(embedding_dim)]
            + ["dt_prev_hours", "dt_root_hours"]
            + [f"type_{t.value.lower()}" for t in TYPE_ORDER]
            + ["log1p_followers", "log1p_friends", "account_age_days"])


def featurize(cascade: Cascade, table: EmbeddingTable, max_events: int = 500) -> np.ndarray:
    """One row per event (time order): text mean vector, time gaps, type one-hot, account scalars."""
    events = cascade.events[:max_events]
    d = table.dim
    out = np.zeros((len(events), d + N_EXTRA))
    t_root = events[0].created_at
    t_prev = t_root
    for i, e in enumerate(events):
        out[i, :d] = table.mean_vector(preprocess(e.text))[0]
        out[i, d] = max(e.created_at - t_prev, 0) / HOUR
        out[i, d + 1] = max(e.created_at - t_root, 0) / HOUR
        out[i, d + 2 + TYPE_ORDER.index(e.tweet_type)] = 1.0
        out[i, d + 6] = math.log1p(max(e.author_followers, 0))
        out[i, d + 7] = math.log1p(max(e.author_friends, 0))
        if e.author_created_at is not None:
            out[i, d + 8] = max(e.created_at - e.author_created_at, 0) / DAY
        t_prev = e.created_at
    return out


@dataclass
class PreparedCascade:
    cascade_id: str
    features: np.ndarray
    accounts: tuple[str, ...]
    label: int | None
    truncated: bool = False


def label_value(label: Label) -> int | None:
    if label is Label.UNRELIABLE:
        return 1
    if label is Label.RELIABLE:
        return 0
    return None


def prepare(cascade: Cascade, table: EmbeddingTable, max_events: int = 500) -> PreparedCascade:
    events = cascade.events[:max_events]
    accounts = tuple(sorted({e.author_id for e in events}))
    return PreparedCascade(cascade.cascade_id, featurize(cascade, table, max_events), accounts,
                           label_value(cascade.label), truncated=cascade.size > max_events)
