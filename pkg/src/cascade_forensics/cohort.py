"""Keyword cohort identification and its interaction, breakdown and timeline reports."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import TweetRecord, TweetType
from .leaning import Side
from .rdd import DAY, day_of, utc_day
from .synth.rng import make_rng

TOKEN = re.compile(r"[0-9a-z_]+")


class MatchMode(str, enum.Enum):
    HASHTAG_ONLY = "HashtagOnly"
    ANYWHERE = "Anywhere"


@dataclass(frozen=True)
class Keyword:
    pattern: str
    mode: MatchMode


@dataclass(frozen=True)
class KeywordSet:
    entries: tuple[Keyword, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("keyword set is empty")

    @classmethod
    def parse(cls, lines: Iterable[str]) -> "KeywordSet":
        """One entry per line; a leading ``#`` restricts the entry to hashtags."""
        out = []
        for line in lines:
            s = line.strip().lower()
            if not s:
                continue
            if s.startswith("#"):
                pat = s.lstrip("#").strip()
                if pat:
                    out.append(Keyword(pat, MatchMode.HASHTAG_ONLY))
            else:
                out.append(Keyword(s, MatchMode.ANYWHERE))
        return cls(tuple(dict.fromkeys(out)))

    def matches(self, record: TweetRecord) -> bool:
        tags = set(record.hashtags)
        tokens = None
        for k in self.entries:
            if k.pattern in tags:
                return True
            if k.mode is MatchMode.ANYWHERE:
                if tokens is None:
                    tokens = set(TOKEN.findall(record.text.lower()))
                if k.pattern in tokens:
                    return True
        return False


def load_keywords(path: str | Path) -> KeywordSet:
    with open(path, encoding="utf-8") as fh:
        return KeywordSet.parse(fh)


@dataclass
class CohortResult:
    stage1: frozenset[str]
    cohort: frozenset[str]
    stage1_split: dict[str, int]


def identify_cohort(records: Iterable[TweetRecord], keywords: KeywordSet,
                    leaning: Mapping[str, Side]) -> CohortResult:
    """Keyword hit in a non-retweet, then keep the Right-leaning accounts."""
    stage1 = frozenset(r.author_id for r in records
                       if r.tweet_type is not TweetType.RETWEET and keywords.matches(r))
    split = Counter(leaning[a].value if a in leaning else "Unassigned" for a in stage1)
    cohort = frozenset(a for a in stage1 if leaning.get(a) is Side.RIGHT)
    keys = [s.value for s in Side] + ["Unassigned"]
    return CohortResult(stage1, cohort, {k: split[k] for k in keys})


PARTITION_CLASSES = ("IR&ID", "IR-only", "ID-only", "Neither")


def _direct_links(records: Iterable[TweetRecord]) -> list[tuple[str, str]]:
    """(engaging author, engaged author) for every reply/retweet/quote with a known parent author."""
    return [(r.author_id, r.parent_author_id) for r in records
            if r.tweet_type is not TweetType.ORIGINAL and r.parent_author_id is not None]


def interaction_partition(records: Sequence[TweetRecord], cohort: Iterable[str],
                          universe: Iterable[str]) -> dict[str, int]:
    """Influenced/influencer classes over ``universe`` minus the cohort.

    ID: engaged directly with a cohort tweet; IR: engaged directly by a
    cohort account.  ``cohort`` holds the members removed from the universe.
    """
    cohort = frozenset(cohort)
    universe = frozenset(universe)
    if not universe:
        raise ValueError("empty universe")
    rest = universe - cohort
    influenced, influencer = set(), set()
    for src, dst in _direct_links(records):
        if dst in cohort and src in rest:
            influenced.add(src)
        if src in cohort and dst in rest:
            influencer.add(dst)
    both = influenced & influencer
    counts = {
        "IR&ID": len(both),
        "IR-only": len(influencer - both),
        "ID-only": len(influenced - both),
        "Neither": len(rest - influenced - influencer),
        "cohort": len(universe & cohort),
    }
    return counts


def random_partitions(records: Sequence[TweetRecord], size: int, universe: Iterable[str], draws: int = 5,
                      seed: int = 0) -> dict[str, float]:
    """Mean partition counts when ``draws`` random same-size samples stand in for the cohort."""
    pool = sorted(set(universe))
    if size > len(pool):
        raise ValueError("sample larger than universe")
    rng = make_rng(seed, 7)
    acc: Counter[str] = Counter()
    for _ in range(draws):
        sample = [pool[int(i)] for i in rng.choice(len(pool), size=size, replace=False)]
        acc.update(interaction_partition(records, sample, pool))
    return {k: acc[k] / draws for k in (*PARTITION_CLASSES, "cohort")}


BREAKDOWN_ROWS = ("RP-BY", "RP-TO", "RT", "QTD")
SIDES = (Side.LEFT.value, Side.RIGHT.value, Side.UNDETERMINED.value)


@dataclass
class Breakdown:
    rows: dict[str, dict[str, float]]  # row -> side -> percentage
    counts: dict[str, dict[str, int]]
    never: dict[str, dict[str, float]]  # side -> kind -> share


def engagement_breakdown(records: Sequence[TweetRecord], cohort: Iterable[str],
                         leaning: Mapping[str, Side]) -> Breakdown:
    """Leaning split of accounts in each kind of direct interaction with the cohort.

    Rows: replied to by the cohort (RP-BY), replying to the cohort (RP-TO),
    retweeting it (RT), quoting it (QTD).  Only non-cohort accounts with a
    leaning assignment are counted.
    """
    cohort = frozenset(cohort)
    involved: dict[str, set[str]] = {k: set() for k in BREAKDOWN_ROWS}
    for r in records:
        if r.tweet_type is TweetType.ORIGINAL or r.parent_author_id is None:
            continue
        src, dst = r.author_id, r.parent_author_id
        if r.tweet_type is TweetType.REPLY and src in cohort and dst not in cohort:
            involved["RP-BY"].add(dst)
        if dst in cohort and src not in cohort:
            kind = {TweetType.REPLY: "RP-TO", TweetType.RETWEET: "RT", TweetType.QUOTE: "QTD"}[r.tweet_type]
            involved[kind].add(src)
    rows, counts = {}, {}
    for k in BREAKDOWN_ROWS:
        c = Counter(leaning[a].value for a in involved[k] if a in leaning)
        n = sum(c.values())
        counts[k] = {s: c[s] for s in SIDES}
        rows[k] = {s: (100.0 * c[s] / n if n else 0.0) for s in SIDES}
    never: dict[str, dict[str, float]] = {}
    reshared = involved["RT"] | involved["QTD"]
    for s in SIDES:
        members = [a for a, v in leaning.items() if v.value == s and a not in cohort]
        n = len(members)
        never[s] = {
            "never_retweet_or_quote": sum(a not in reshared for a in members) / n if n else math.nan,
            "never_reply_to": sum(a not in involved["RP-TO"] for a in members) / n if n else math.nan,
            "never_replied_by": sum(a not in involved["RP-BY"] for a in members) / n if n else math.nan,
        }
    return Breakdown(rows, counts, never)


def account_creation(records: Iterable[TweetRecord]) -> dict[str, int]:
    """Creation timestamp per author, taken from the author's earliest record that carries one."""
    out: dict[str, tuple[int, str, int]] = {}
    for r in records:
        if r.author_created_at is None:
            continue
        key = (r.created_at, r.tweet_id, r.author_created_at)
        if r.author_id not in out or key < out[r.author_id]:
            out[r.author_id] = key
    return {a: v[2] for a, v in out.items()}


@dataclass
class ChangeRow:
    name: str
    before_per_day: float
    after_per_day: float
    pct_change: float
    ratio_pct_change: float | None  # change in engagements per cohort tweet


@dataclass
class Timelines:
    days: list[int]
    volume: list[int]
    keyword_volume: list[int]
    new_account_volume: list[int]
    creation_days: list[int]
    creation_fraction: list[float]
    new_account_share: float
    change: list[ChangeRow] = field(default_factory=list)


def pct_change(before: float, after: float) -> float:
    return (after / before - 1.0) * 100.0 if before else math.nan


def change_table(cohort_before: float, cohort_after: float,
                 engagements: Mapping[str, tuple[float, float]]) -> list[ChangeRow]:
    """Rows of per-day volume change; engagement rows add the per-cohort-tweet ratio change."""
    rows = [ChangeRow("cohort", cohort_before, cohort_after, pct_change(cohort_before, cohort_after), None)]
    for name, (b, a) in engagements.items():
        ratio = pct_change(b / cohort_before, a / cohort_after) if cohort_before and cohort_after else math.nan
        rows.append(ChangeRow(name, b, a, pct_change(b, a), ratio))
    return rows


def cohort_timelines(records: Sequence[TweetRecord], cohort: Iterable[str], keywords: KeywordSet,
                     intervention: str) -> Timelines:
    """Daily cohort activity, account-creation fractions and the before/after change table.

    Days before the intervention day form the "before" period and the rest
    "after"; per-day means divide by the number of calendar days each period
    spans within the record time range.
    """
    cohort = frozenset(cohort)
    if not records:
        raise ValueError("no records")
    cut = day_of(intervention)
    cut_ts = cut * DAY
    first = min(utc_day(r.created_at) for r in records)
    last = max(utc_day(r.created_at) for r in records)
    if not first <= cut <= last:
        raise ValueError(f"intervention {intervention} outside the record span")
    created = account_creation(records)
    vol: Counter[int] = Counter()
    kw: Counter[int] = Counter()
    new_vol: Counter[int] = Counter()
    eng: dict[str, list[int]] = {"RP_TO": [0, 0], "RT": [0, 0], "QTD": [0, 0]}
    kinds = {TweetType.REPLY: "RP_TO", TweetType.RETWEET: "RT", TweetType.QUOTE: "QTD"}
    for r in records:
        d = utc_day(r.created_at)
        if r.author_id in cohort:
            vol[d] += 1
            if keywords.matches(r):
                kw[d] += 1
            c = created.get(r.author_id)
            if c is not None and c > cut_ts:
                new_vol[d] += 1
        if r.tweet_type in kinds and r.parent_author_id in cohort:
            eng[kinds[r.tweet_type]][d >= cut] += 1
    days = sorted(vol)
    n_before, n_after = cut - first, last - cut + 1
    before = sum(v for d, v in vol.items() if d < cut)
    after = sum(v for d, v in vol.items() if d >= cut)
    per_day = lambda b, a: (b / n_before if n_before else math.nan, a / n_after)
    cb, ca = per_day(before, after)
    change = change_table(cb, ca, {k: per_day(*v) for k, v in eng.items()})
    creation = Counter(utc_day(created[a]) for a in cohort if a in created)
    cdays = sorted(creation)
    total = sum(vol.values())
    return Timelines(
        days, [vol[d] for d in days], [kw[d] for d in days], [new_vol[d] for d in days],
        cdays, [creation[d] / len(cohort) for d in cdays],
        sum(new_vol.values()) / total if total else 0.0, change)


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_partition(counts: Mapping[str, float], random_counts: Mapping[str, float] | None, path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["class", "cohort_count", "cohort_pct", "random_count", "random_pct"])
        n = sum(counts[k] for k in PARTITION_CLASSES)
        rn = sum(random_counts[k] for k in PARTITION_CLASSES) if random_counts else 0
        for k in PARTITION_CLASSES:
            row = [k, counts[k], f"{100.0 * counts[k] / n:.6f}" if n else ""]
            if random_counts:
                row += [repr(float(random_counts[k])), f"{100.0 * random_counts[k] / rn:.6f}" if rn else ""]
            else:
                row += ["", ""]
            w.writerow(row)


def write_breakdown(b: Breakdown, path_rows, path_never) -> None:
    fh, w = _writer(path_rows)
    with fh:
        w.writerow(["row", *(f"{s}_pct" for s in SIDES), *(f"{s}_n" for s in SIDES)])
        for k in BREAKDOWN_ROWS:
            w.writerow([k, *(f"{b.rows[k][s]:.6f}" for s in SIDES), *(b.counts[k][s] for s in SIDES)])
    fh, w = _writer(path_never)
    with fh:
        kinds = ("never_retweet_or_quote", "never_reply_to", "never_replied_by")
        w.writerow(["side", *kinds])
        for s in SIDES:
            w.writerow([s, *(repr(b.never[s][k]) for k in kinds)])


def write_timelines(t: Timelines, dir_path: Path) -> None:
    iso = lambda d: (dt.date(1970, 1, 1) + dt.timedelta(days=d)).isoformat()
    fh, w = _writer(dir_path / "daily_volume.csv")
    with fh:
        w.writerow(["day", "volume", "keyword_volume", "new_account_volume"])
        for d, v, k, nv in zip(t.days, t.volume, t.keyword_volume, t.new_account_volume):
            w.writerow([iso(d), v, k, nv])
    fh, w = _writer(dir_path / "account_creation.csv")
    with fh:
        w.writerow(["day", "fraction_of_cohort"])
        for d, f in zip(t.creation_days, t.creation_fraction):
            w.writerow([iso(d), repr(f)])
    fh, w = _writer(dir_path / "engagement_change.csv")
    with fh:
        w.writerow(["row", "per_day_before", "per_day_after", "pct_change", "ratio_pct_change"])
        for r in t.change:
            w.writerow([r.name, repr(r.before_per_day), repr(r.after_per_day), repr(r.pct_change),
                        "" if r.ratio_pct_change is None else repr(r.ratio_pct_change)])
