"""Political-leaning inference over the retweet graph.

Seed accounts get a signed score from the outlets they link to; Louvain
communities then inherit the mean seed score of their members.  A synchronous
label-propagation baseline and a held-out evaluation sit alongside.
"""

from __future__ import annotations

import csv
import enum
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .domains import match_domain, normalize_domain
from .ingest import TweetRecord, TweetType
from .louvain import louvain_communities
from .synth.rng import make_rng

logger = logging.getLogger(__name__)

BIASES = ("Left", "LeanLeft", "Center", "LeanRight", "Right")
LEFT_BIASES = frozenset({"Left", "LeanLeft"})
RIGHT_BIASES = frozenset({"Right", "LeanRight"})


class Side(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"
    UNDETERMINED = "Undetermined"


def load_outlet_table(path: str | Path) -> dict[str, str]:
    """``domain,bias`` CSV (header optional) -> {normalized domain: bias}."""
    table: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip().lower() == "domain":
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: expected domain,bias but got {row!r}")
            bias = row[1].strip()
            if bias not in BIASES:
                raise ValueError(f"{path}: unknown bias {bias!r} for {row[0]!r}")
            table[normalize_domain(row[0])] = bias
    return dict(sorted(table.items()))


@dataclass(frozen=True)
class SeedLabel:
    account_id: str
    n_left: int
    n_right: int

    @property
    def score(self) -> Fraction:
        return Fraction(self.n_right - self.n_left, self.n_right + self.n_left)

    @property
    def side(self) -> Side:
        return Side.RIGHT if self.n_right > self.n_left else Side.LEFT


def outlet_counts(records: Iterable[TweetRecord], outlets: Mapping[str, str]) -> dict[str, tuple[int, int]]:
    """Per author (left, right) outlet-URL counts over original tweets and retweets."""
    left: Counter[str] = Counter()
    right: Counter[str] = Counter()
    for r in records:
        if r.tweet_type not in (TweetType.ORIGINAL, TweetType.RETWEET):
            continue
        for url in r.urls:
            bias = match_domain(url, outlets)
            if bias in LEFT_BIASES:
                left[r.author_id] += 1
            elif bias in RIGHT_BIASES:
                right[r.author_id] += 1
    return {a: (left[a], right[a]) for a in sorted(set(left) | set(right))}


def passes_seed_filter(n_left: int, n_right: int, min_urls: int = 10, min_share: float = 0.7) -> bool:
    """Enough URLs, and the dominant side holds at least ``min_share`` of them."""
    n = n_left + n_right
    if n < min_urls or n == 0:
        return False
    return Fraction(max(n_left, n_right), n) >= Fraction(min_share).limit_denominator(10 ** 6)


def compute_seed_labels(records: Iterable[TweetRecord], outlets: Mapping[str, str], min_urls: int = 10,
                        min_share: float = 0.7) -> list[SeedLabel]:
    return [SeedLabel(a, nl, nr) for a, (nl, nr) in outlet_counts(records, outlets).items()
            if passes_seed_filter(nl, nr, min_urls, min_share)]


@dataclass
class RetweetGraph:
    nodes: list[str]
    weights: dict[tuple[str, str], int]  # key (u, v) with u < v

    def edges(self) -> list[tuple[str, str, float]]:
        return [(u, v, float(w)) for (u, v), w in self.weights.items()]

    def neighbors(self) -> dict[str, dict[str, int]]:
        nb: dict[str, dict[str, int]] = {v: {} for v in self.nodes}
        for (u, v), w in self.weights.items():
            nb[u][v] = w
            nb[v][u] = w
        return nb


def build_retweet_graph(records: Sequence[TweetRecord], min_appearances: int = 20) -> RetweetGraph:
    """Undirected graph over accounts authoring at least ``min_appearances`` records."""
    activity = Counter(r.author_id for r in records)
    nodes = sorted(a for a, c in activity.items() if c >= min_appearances)
    keep = set(nodes)
    weights: Counter[tuple[str, str]] = Counter()
    for r in records:
        if r.tweet_type is not TweetType.RETWEET or r.parent_author_id is None:
            continue
        u, v = r.author_id, r.parent_author_id
        if u == v or u not in keep or v not in keep:
            continue
        weights[(u, v) if u < v else (v, u)] += 1
    return RetweetGraph(nodes, dict(sorted(weights.items())))


@dataclass
class LeaningAssignment:
    labels: dict[str, Side]
    community: dict[str, int]
    community_score: dict[int, Fraction | None] = field(default_factory=dict)
    method: str = "louvain"
    modularity: float | None = None

    def counts(self) -> dict[str, int]:
        c = Counter(s.value for s in self.labels.values())
        return {s.value: c[s.value] for s in Side}

    def coverage(self) -> float:
        if not self.labels:
            return 0.0
        return sum(s is not Side.UNDETERMINED for s in self.labels.values()) / len(self.labels)


def assign_leanings(partition: Mapping[str, int], seeds: Iterable[SeedLabel], min_seeds: int = 2) -> LeaningAssignment:
    """Label every member with the sign of its community's mean seed score."""
    members: dict[int, list[Fraction]] = defaultdict(list)
    for s in seeds:
        if s.account_id in partition:
            members[partition[s.account_id]].append(s.score)
    scores: dict[int, Fraction | None] = {}
    side_of: dict[int, Side] = {}
    for c in sorted(set(partition.values())):
        vals = members.get(c, [])
        if len(vals) < min_seeds:
            scores[c], side_of[c] = (sum(vals) / len(vals) if vals else None), Side.UNDETERMINED
            continue
        score = sum(vals, Fraction(0)) / len(vals)
        scores[c] = score
        side_of[c] = Side.RIGHT if score > 0 else Side.LEFT if score < 0 else Side.UNDETERMINED
    labels = {a: side_of[c] for a, c in sorted(partition.items())}
    return LeaningAssignment(labels, dict(sorted(partition.items())), scores)


def infer_leanings(graph: RetweetGraph, seeds: Sequence[SeedLabel], seed: int = 0) -> LeaningAssignment:
    result = louvain_communities(graph.nodes, graph.edges(), seed=seed)
    out = assign_leanings(result.partition, seeds)
    out.modularity = result.modularity
    logger.info("louvain: %d communities, Q=%.6f, labels=%s", result.n_communities, result.modularity, out.counts())
    return out


def label_propagation_baseline(graph: RetweetGraph, seeds: Iterable[SeedLabel],
                               max_iter: int = 100) -> LeaningAssignment:
    """Synchronous weighted-majority spread; seeds are clamped and ties keep the previous label."""
    nb = graph.neighbors()
    labels = {v: Side.UNDETERMINED for v in graph.nodes}
    clamped = {}
    for s in seeds:
        if s.account_id in labels:
            clamped[s.account_id] = s.side
    labels.update(clamped)
    for it in range(max_iter):
        new = dict(labels)
        for v in graph.nodes:
            if v in clamped:
                continue
            left = sum(w for u, w in nb[v].items() if labels[u] is Side.LEFT)
            right = sum(w for u, w in nb[v].items() if labels[u] is Side.RIGHT)
            if left > right:
                new[v] = Side.LEFT
            elif right > left:
                new[v] = Side.RIGHT
        if new == labels:
            logger.debug("label propagation fixpoint after %d iterations", it)
            break
        labels = new
    return LeaningAssignment(labels, {v: -1 for v in graph.nodes}, {}, method="label_propagation")


@dataclass
class SideError:
    method: str
    source: str
    side: str
    n_evaluated: int
    n_wrong: int
    n_undetermined: int

    @property
    def error_rate(self) -> float:
        return 100.0 * self.n_wrong / self.n_evaluated if self.n_evaluated else float("nan")


def side_errors(assignment: LeaningAssignment, truth: Mapping[str, Side], source: str) -> list[SideError]:
    """Per-side error (%) over evaluation accounts that the method labeled Left or Right.

    Accounts missing from the graph or left Undetermined are counted separately.
    """
    rows = []
    for side in (Side.LEFT, Side.RIGHT):
        accts = [a for a, s in truth.items() if s is side and a in assignment.labels]
        decided = [a for a in accts if assignment.labels[a] is not Side.UNDETERMINED]
        wrong = sum(assignment.labels[a] is not side for a in decided)
        rows.append(SideError(assignment.method, source, side.value, len(decided), wrong,
                              len(accts) - len(decided)))
    return rows


def read_side_labels(path: str | Path) -> dict[str, Side]:
    """``account_id,side`` CSV with side Left/Right (header optional)."""
    out: dict[str, Side] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "account_id":
                continue
            out[row[0].strip()] = Side(row[1].strip())
    return out


def heldout_seed_folds(seeds: Sequence[SeedLabel], folds: int = 5, seed: int = 0) -> list[list[SeedLabel]]:
    if len(seeds) < folds:
        raise ValueError(f"{len(seeds)} seeds cannot fill {folds} folds")
    rng = make_rng(seed, 6)
    order = sorted(seeds, key=lambda s: s.account_id)
    perm = rng.permutation(len(order))
    out: list[list[SeedLabel]] = [[] for _ in range(folds)]
    for j, i in enumerate(perm):
        out[j % folds].append(order[int(i)])
    return out


def _merge(rows: list[SideError]) -> list[SideError]:
    acc: dict[tuple[str, str, str], SideError] = {}
    for r in rows:
        key = (r.method, r.source, r.side)
        if key in acc:
            a = acc[key]
            acc[key] = SideError(*key, a.n_evaluated + r.n_evaluated, a.n_wrong + r.n_wrong,
                                 a.n_undetermined + r.n_undetermined)
        else:
            acc[key] = r
    return list(acc.values())


def evaluate_leanings(graph: RetweetGraph, seeds: Sequence[SeedLabel], partition: Mapping[str, int],
                      extra: Mapping[str, Mapping[str, Side]] | None = None, folds: int = 5, seed: int = 0,
                      lp_iter: int = 100) -> list[SideError]:
    """Error table for Louvain and label propagation.

    Media-URL errors use ``folds``-fold held-out seeds (errors pooled over
    folds); each entry of ``extra`` (e.g. profile or manual labels) is scored
    against the assignments built from all seeds.
    """
    rows: list[SideError] = []
    for held in heldout_seed_folds(seeds, folds, seed):
        held_ids = {s.account_id for s in held}
        train = [s for s in seeds if s.account_id not in held_ids]
        truth = {s.account_id: s.side for s in held}
        rows += side_errors(assign_leanings(partition, train), truth, "media_url")
        rows += side_errors(label_propagation_baseline(graph, train, lp_iter), truth, "media_url")
    rows = _merge(rows)
    louv = assign_leanings(partition, seeds)
    lp = label_propagation_baseline(graph, seeds, lp_iter)
    for name, truth in sorted((extra or {}).items()):
        if not truth:
            raise ValueError(f"evaluation set {name!r} is empty")
        rows += side_errors(louv, truth, name) + side_errors(lp, truth, name)
    if not rows or all(r.n_evaluated + r.n_undetermined == 0 for r in rows):
        raise ValueError("no evaluation accounts fall inside the graph")
    return sorted(rows, key=lambda r: (r.method != "louvain", r.method, r.source, r.side))


def write_assignment(assignment: LeaningAssignment, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["account_id", "label", "community_id", "community_score"])
        for a in sorted(assignment.labels):
            c = assignment.community[a]
            score = assignment.community_score.get(c)
            w.writerow([a, assignment.labels[a].value, c, "" if score is None else repr(float(score))])


def read_assignment(path: str | Path) -> LeaningAssignment:
    labels, community, scores = {}, {}, {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            a, c = row["account_id"], int(row["community_id"])
            labels[a] = Side(row["label"])
            community[a] = c
            if row["community_score"]:
                scores[c] = Fraction(row["community_score"])
    return LeaningAssignment(labels, community, scores)


def write_error_table(rows: Sequence[SideError], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "source", "side", "error_pct", "n_evaluated", "n_wrong", "n_undetermined"])
        for r in rows:
            w.writerow([r.method, r.source, r.side, f"{r.error_rate:.6f}", r.n_evaluated, r.n_wrong,
                        r.n_undetermined])
