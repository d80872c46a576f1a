"""Engagement cascades, propagation trees and propagation-dynamics metrics."""

from __future__ import annotations

import csv
import enum
import logging
import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import TweetRecord

logger = logging.getLogger(__name__)

HOUR = 3600.0


class Label(str, enum.Enum):
    RELIABLE = "Reliable"
    UNRELIABLE = "Unreliable"
    UNLABELED = "Unlabeled"


@dataclass(frozen=True)
class Cascade:
    """Time-ordered engagements rooted at ``events[0]``."""

    cascade_id: str
    events: tuple[TweetRecord, ...]
    label: Label = Label.UNLABELED

    @property
    def root(self) -> TweetRecord:
        return self.events[0]

    @property
    def size(self) -> int:
        return len(self.events)

    @property
    def authors(self) -> list[str]:
        return [e.author_id for e in self.events]


@dataclass
class CascadeForest:
    cascades: list[Cascade]
    quarantined: list[str] = field(default_factory=list)


def _event_order(root_id: str, events: Iterable[TweetRecord]) -> tuple[TweetRecord, ...]:
    return tuple(sorted(events, key=lambda e: (e.tweet_id != root_id, e.created_at, e.tweet_id)))


def make_cascade(events: Iterable[TweetRecord], label: Label = Label.UNLABELED,
                 root_id: str | None = None) -> Cascade:
    events = list(events)
    if root_id is None:
        root_id = min(events, key=lambda e: (e.created_at, e.tweet_id)).tweet_id
    ordered = _event_order(root_id, events)
    return Cascade(cascade_id=root_id, events=ordered, label=label)


def reconstruct(records: Sequence[TweetRecord]) -> CascadeForest:
    """Group records into cascades by following parent links to their root.

    A record whose parent is missing from the corpus roots its own cascade.
    Records on (or leading into) a parent-link cycle are quarantined.
    """
    index = {r.tweet_id: r for r in records}
    quarantine = object()
    root_of: dict[str, object] = {}
    for r in records:
        path: list[str] = []
        on_path: set[str] = set()
        cur = r.tweet_id
        while True:
            if cur in root_of:
                root = root_of[cur]
                break
            if cur in on_path:
                root = quarantine
                break
            on_path.add(cur)
            path.append(cur)
            parent = index[cur].parent_tweet_id
            if parent is None or parent not in index:
                root = cur
                break
            cur = parent
        for t in path:
            root_of[t] = root

    members: dict[str, list[TweetRecord]] = defaultdict(list)
    quarantined = []
    for r in records:
        root = root_of[r.tweet_id]
        if root is quarantine:
            quarantined.append(r.tweet_id)
        else:
            members[root].append(r)  # type: ignore[index]
    if quarantined:
        logger.warning("quarantined %d records on cyclic parent links", len(quarantined))
    cascades = [make_cascade(evs, root_id=root) for root, evs in members.items()]
    cascades.sort(key=lambda c: (c.root.created_at, c.cascade_id))
    return CascadeForest(cascades, sorted(quarantined))


def build_cascades(records: Sequence[TweetRecord]) -> list[Cascade]:
    return reconstruct(records).cascades


# --------------------------------------------------------------------------
# subsampling


@dataclass
class Subsample:
    cascades: list[Cascade]
    accounts: frozenset[str]
    coverage: float
    n_tweets: int
    n_covered: int


def engagement_counts(cascades: Iterable[Cascade]) -> Counter[str]:
    """Active (authored) plus passive (engaged-by-others) counts per account."""
    counts: Counter[str] = Counter()
    for c in cascades:
        for e in c.events:
            counts[e.author_id] += 1
            if e.parent_author_id and e.parent_author_id != e.author_id:
                counts[e.parent_author_id] += 1
    return counts


def subsample_for_training(cascades: Sequence[Cascade], min_cascade_size: int = 5,
                           top_k_accounts: int | None = 7471) -> Subsample:
    """Keep cascades with at least ``min_cascade_size`` events and the top-k engaging accounts.

    ``top_k_accounts=None`` keeps every account.  Coverage is the fraction of
    all cascade tweets that fall in kept cascades.
    """
    if min_cascade_size < 1:
        raise ValueError("min_cascade_size must be >= 1")
    if top_k_accounts is not None and top_k_accounts < 1:
        raise ValueError("top_k_accounts must be >= 1")
    kept = [c for c in cascades if c.size >= min_cascade_size]
    counts = engagement_counts(cascades)
    ranked = sorted(counts, key=lambda a: (-counts[a], a))
    if top_k_accounts is not None:
        ranked = ranked[:top_k_accounts]
    n_total = sum(c.size for c in cascades)
    n_covered = sum(c.size for c in kept)
    coverage = n_covered / n_total if n_total else 0.0
    return Subsample(kept, frozenset(ranked), coverage, n_total, n_covered)


def restrict_to_accounts(cascade: Cascade, accounts: frozenset[str] | set[str]) -> Cascade:
    """Drop events by accounts outside ``accounts``; the root event is always kept."""
    events = tuple(e for i, e in enumerate(cascade.events) if i == 0 or e.author_id in accounts)
    return replace(cascade, events=events)


# --------------------------------------------------------------------------
# trees


@dataclass(frozen=True)
class PropagationTree:
    root: str
    parent: dict[str, str]
    depth: dict[str, int]
    repaired: bool = False

    @property
    def nodes(self) -> list[str]:
        return list(self.depth)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(p, c) for c, p in self.parent.items()]

    def breadth(self) -> list[int]:
        """Node count at each depth 0..max_depth."""
        counts = Counter(self.depth.values())
        return [counts[d] for d in range(max(counts) + 1)]


def build_tree(cascade: Cascade) -> PropagationTree:
    """Parent-link tree; events whose parent lies outside the cascade attach to the root."""
    root = cascade.cascade_id
    nodes = {e.tweet_id for e in cascade.events}
    parent: dict[str, str] = {}
    repaired = False
    for e in cascade.events[1:]:
        p = e.parent_tweet_id
        if p is None or p not in nodes or p == e.tweet_id:
            p = root
            repaired = True
        parent[e.tweet_id] = p
    tree = build_tree_from_parents(root, parent, repaired)
    if len(tree.depth) != len(nodes):
        # parent cycle inside the cascade: re-hang the unreachable nodes on the root
        for t in nodes - tree.depth.keys():
            parent[t] = root
        tree = build_tree_from_parents(root, parent, repaired=True)
    return tree


def build_tree_from_parents(root: str, parent: dict[str, str], repaired: bool = False) -> PropagationTree:
    children: dict[str, list[str]] = defaultdict(list)
    for c, p in parent.items():
        children[p].append(c)
    depth = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in children.get(u, ()):
            if v not in depth:
                depth[v] = depth[u] + 1
                queue.append(v)
    return PropagationTree(root, parent, depth, repaired)


# --------------------------------------------------------------------------
# metrics


@dataclass
class Curve:
    x: list[float]
    y: list[float]
    n: list[int]

    def rows(self) -> list[tuple[float, float, int]]:
        return list(zip(self.x, self.y, self.n))


@dataclass
class PropagationMetrics:
    group: str
    size_ccdf: Curve
    breadth_by_depth: Curve
    breadth_by_depth_unrepaired: Curve
    unique_users: Curve
    time_to_unique: Curve

    def curves(self) -> dict[str, Curve]:
        return {
            "size_ccdf": self.size_ccdf,
            "breadth_by_depth": self.breadth_by_depth,
            "breadth_by_depth_unrepaired": self.breadth_by_depth_unrepaired,
            "unique_users": self.unique_users,
            "time_to_unique": self.time_to_unique,
        }


def _size_ccdf(sizes: list[int]) -> Curve:
    n = len(sizes)
    counts = Counter(sizes)
    xs, ys, ns = [], [], []
    at_least = n
    for s in sorted(counts):
        xs.append(float(s))
        ys.append(at_least / n)
        ns.append(at_least)
        at_least -= counts[s]
    return Curve(xs, ys, ns)


def _mean_breadth(trees: list[PropagationTree]) -> Curve:
    totals: dict[int, int] = defaultdict(int)
    reach: dict[int, int] = defaultdict(int)
    for t in trees:
        for d, b in enumerate(t.breadth()):
            totals[d] += b
            reach[d] += 1
    ds = sorted(totals)
    return Curve([float(d) for d in ds], [totals[d] / reach[d] for d in ds], [reach[d] for d in ds])


def _unique_users(cascades: list[Cascade]) -> Curve:
    totals: dict[int, int] = defaultdict(int)
    reach: dict[int, int] = defaultdict(int)
    for c in cascades:
        seen: set[str] = set()
        for i, a in enumerate(c.authors):
            seen.add(a)
            totals[i] += len(seen)
            reach[i] += 1
    idx = sorted(totals)
    return Curve([float(i) for i in idx], [totals[i] / reach[i] for i in idx], [reach[i] for i in idx])


def _time_to_unique(cascades: list[Cascade]) -> Curve:
    samples: dict[int, list[float]] = defaultdict(list)
    for c in cascades:
        t0 = c.root.created_at
        seen: set[str] = set()
        for e in c.events:
            if e.author_id not in seen:
                seen.add(e.author_id)
                samples[len(seen)].append((e.created_at - t0) / HOUR)
    ks = sorted(samples)
    return Curve([float(k) for k in ks], [math.fsum(samples[k]) / len(samples[k]) for k in ks],
                 [len(samples[k]) for k in ks])


def propagation_metrics(cascades: Sequence[Cascade], group: str = "all",
                        trees: Sequence[PropagationTree] | None = None) -> PropagationMetrics:
    """Size CCDF, breadth-by-depth, unique-user and time-to-k-th-user curves for a group."""
    if not cascades:
        raise ValueError(f"empty cascade group {group!r}")
    cascades = list(cascades)
    trees = list(trees) if trees is not None else [build_tree(c) for c in cascades]
    return PropagationMetrics(
        group=group,
        size_ccdf=_size_ccdf([c.size for c in cascades]),
        breadth_by_depth=_mean_breadth(trees),
        breadth_by_depth_unrepaired=_mean_breadth([t for t in trees if not t.repaired]),
        unique_users=_unique_users(cascades),
        time_to_unique=_time_to_unique(cascades),
    )


def write_curve(curve: Curve, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "n"])
        for x, y, n in curve.rows():
            w.writerow([repr(x), repr(y), n])


@dataclass
class CorpusStats:
    n_cascades: int
    avg_size: float
    avg_duration_hours: float
    avg_gap_hours: float
    label_counts: dict[str, int]


def cascade_corpus_stats(cascades: Sequence[Cascade]) -> CorpusStats:
    if not cascades:
        raise ValueError("no cascades")
    durations = [(c.events[-1].created_at - c.root.created_at) / HOUR for c in cascades]
    gaps = [
        math.fsum((b.created_at - a.created_at) / HOUR for a, b in zip(c.events, c.events[1:])) / (c.size - 1)
        for c in cascades if c.size >= 2
    ]
    counts = Counter(c.label.value for c in cascades)
    return CorpusStats(
        n_cascades=len(cascades),
        avg_size=sum(c.size for c in cascades) / len(cascades),
        avg_duration_hours=math.fsum(durations) / len(durations),
        avg_gap_hours=math.fsum(gaps) / len(gaps) if gaps else 0.0,
        label_counts={lab.value: counts.get(lab.value, 0) for lab in Label},
    )


# --------------------------------------------------------------------------
# artifact IO


def cascades_to_json(cascades: Iterable[Cascade]) -> list[dict]:
    return [{"cascade_id": c.cascade_id, "label": c.label.value,
             "tweet_ids": [e.tweet_id for e in c.events]} for c in cascades]


def cascades_from_json(rows: Iterable[dict], index: dict[str, TweetRecord]) -> list[Cascade]:
    return [Cascade(r["cascade_id"], tuple(index[t] for t in r["tweet_ids"]), Label(r["label"]))
            for r in rows]
