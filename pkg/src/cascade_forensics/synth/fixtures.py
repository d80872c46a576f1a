"""Seeded synthetic fixtures with stored ground truth.

Every generator draws from :func:`make_rng` only, so an identical FixtureSpec gives
identical output on any platform.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..ingest import TweetRecord, TweetType, to_input_json
from .rng import ALGORITHM, make_rng

EPOCH = dt.date(1970, 1, 1)
DAY = 86400
ENGAGEMENT_TYPES = (TweetType.REPLY, TweetType.RETWEET, TweetType.QUOTE)


def _epoch(date: str) -> int:
    return (dt.date.fromisoformat(date) - EPOCH).days * DAY


@dataclass(frozen=True)
class FixtureSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0


@dataclass
class Fixture:
    kind: str
    data: Any
    truth: dict


# ---------------------------------------------------------------- cascade forest

def cascade_forest(n_records: int = 1000, p_stop: float = 0.5, max_depth: int = 6, n_accounts: int = 100,
                   start: str = "2020-06-01", seed: int = 0) -> Fixture:
    """Branching cascades until ``n_records`` records exist.

    Each node gets ``Geometric(p_stop) - 1`` children (mean ``1/p - 1``).
    Records come out in generation order; the last cascade is trimmed in
    breadth-first order so every kept event keeps its parent.
    """
    if n_records < 1 or not 0 < p_stop <= 1 or max_depth < 0 or n_accounts < 1:
        raise ValueError("invalid cascade-forest parameters")
    rng = make_rng(seed, 100)
    t = _epoch(start)
    records: list[TweetRecord] = []
    membership: dict[str, str] = {}
    n_roots = 0
    while len(records) < n_records:
        t += int(rng.integers(60, 3600))
        root_id = f"t{len(records):07d}"
        author = f"u{int(rng.integers(n_accounts)):04d}"
        queue = [(TweetRecord(root_id, author, t, TweetType.ORIGINAL, text=f"root {n_roots}"), 0)]
        n_roots += 1
        head = 0
        while head < len(queue) and len(records) < n_records:
            rec, depth = queue[head]
            head += 1
            records.append(rec)
            membership[rec.tweet_id] = root_id
            if depth >= max_depth:
                continue
            for _ in range(int(rng.geometric(p_stop)) - 1):
                tid = f"t{len(records) + len(queue) - head:07d}"
                ttype = ENGAGEMENT_TYPES[int(rng.integers(3))]
                who = f"u{int(rng.integers(n_accounts)):04d}"
                ts = rec.created_at + 1 + int(rng.exponential(1800.0))
                queue.append((TweetRecord(tid, who, ts, ttype, rec.tweet_id, rec.author_id,
                                          text=f"reply to {rec.tweet_id}"), depth + 1))
    return Fixture("cascade-forest", records, {"membership": membership, "n_roots": n_roots})


# ---------------------------------------------------------------- planted partition

def planted_partition(blocks: int = 4, block_size: int = 50, p_in: float = 0.3, p_out: float = 0.01,
                      seed: int = 0) -> Fixture:
    if blocks < 1 or block_size < 1 or not (0 <= p_out <= 1 and 0 <= p_in <= 1):
        raise ValueError("invalid planted-partition parameters")
    rng = make_rng(seed, 101)
    n = blocks * block_size
    nodes = [f"n{i:05d}" for i in range(n)]
    block = [i // block_size for i in range(n)]
    iu, ju = np.triu_indices(n, k=1)
    draws = rng.random(len(iu))
    same = np.array(block)[iu] == np.array(block)[ju]
    keep = np.where(same, draws < p_in, draws < p_out)
    edges = [(nodes[i], nodes[j], 1.0) for i, j in zip(iu[keep], ju[keep])]
    return Fixture("planted-partition", (nodes, edges), {"labels": dict(zip(nodes, block))})


# ---------------------------------------------------------------- step series

def step_series(n: int = 80, x0: float = 39, intercept: float = 0.1, beta: float = 0.2, slope: float = 0.0,
                higher: tuple[float, ...] = (), sigma: float = 0.0, seed: int = 0) -> Fixture:
    """``y = b + m x + sum c_k x^(k+2) + beta 1{x > x0} + N(0, sigma^2)`` on ``x = 0..n-1``."""
    if n < 2 or sigma < 0:
        raise ValueError("invalid step-series parameters")
    x = np.arange(n, dtype=float)
    y = intercept + slope * x + beta * (x > x0)
    for k, c in enumerate(higher):
        y = y + c * x ** (k + 2)
    if sigma > 0:
        y = y + make_rng(seed, 102).normal(0.0, sigma, n)
    truth = {"intercept": intercept, "slope": slope, "beta": beta, "higher": list(higher), "sigma": sigma, "x0": x0}
    return Fixture("step-series", (x, y), truth)


# ---------------------------------------------------------------- blobs

def blob_vectors(k: int = 3, n_per: int = 100, dim: int = 10, spread: float = 0.5, separation: float = 6.0,
                 seed: int = 0) -> Fixture:
    """Isotropic Gaussian blobs whose centers sit at least ``separation`` apart."""
    if k < 1 or n_per < 1 or dim < 1 or spread <= 0:
        raise ValueError("invalid blob parameters")
    rng = make_rng(seed, 103)
    centers = np.zeros((0, dim))
    while len(centers) < k:
        c = rng.normal(0.0, separation, dim)
        if all(np.linalg.norm(c - o) >= separation for o in centers):
            centers = np.vstack([centers, c])
    labels = np.repeat(np.arange(k), n_per)
    X = centers[labels] + rng.normal(0.0, spread, (k * n_per, dim))
    return Fixture("blob-vectors", X, {"labels": labels.tolist(), "centers": centers.tolist()})


# ---------------------------------------------------------------- planted-signal cascades

def _word_vectors(words: list[str], dim: int, rng: np.random.Generator, centers: dict[str, np.ndarray] | None = None,
                  noise: float = 1.0) -> dict[str, list[float]]:
    out = {}
    for w in words:
        base = centers.get(w) if centers else None
        v = rng.normal(0.0, noise, dim) + (base if base is not None else 0.0)
        out[w] = [round(float(a), 6) for a in v]
    return out


def planted_signal(n: int = 500, pos_frac: float = 0.5, dim: int = 8, n_suspicious: int = 60, n_general: int = 400,
                   start: str = "2020-06-01", seed: int = 0) -> Fixture:
    """Labeled cascades where class shows in timing and account pool, not in text.

    Unreliable roots link to ``fake.example`` and draw fast engagements mostly
    from a small pool of accounts; reliable roots link to ``news.example``
    with slower engagement from the general population.
    """
    if n < 10 or not 0 < pos_frac < 1:
        raise ValueError("invalid planted-signal parameters")
    rng = make_rng(seed, 104)
    vocab = [f"w{i:03d}" for i in range(40)]
    records: list[TweetRecord] = []
    labels: dict[str, str] = {}
    t = _epoch(start)
    n_pos = int(round(n * pos_frac))
    classes = np.array([1] * n_pos + [0] * (n - n_pos))
    rng.shuffle(classes)
    created = _epoch("2015-01-01")
    for c, y in enumerate(classes):
        t += int(rng.integers(600, 7200))
        gap = 120.0 if y else 3600.0
        size = int(rng.integers(6, 31))
        root_id = f"c{c:05d}"
        text = " ".join(vocab[int(i)] for i in rng.integers(0, len(vocab), 6))
        url = "https://fake.example/a" if y else "https://news.example/a"
        pool, p_pool = ("s", n_suspicious) if y else ("g", n_general)
        author = f"{pool}{int(rng.integers(p_pool)):04d}"
        events = [TweetRecord(root_id, author, t, TweetType.ORIGINAL, text=text, urls=(url,),
                              author_created_at=created, author_followers=int(rng.integers(10, 5000)),
                              author_friends=int(rng.integers(10, 2000)))]
        ts = t
        for j in range(1, size):
            ts += 1 + int(rng.exponential(gap))
            parent = events[int(rng.integers(len(events)))]
            if y and rng.random() < 0.8:
                who = f"s{int(rng.integers(n_suspicious)):04d}"
            else:
                who = f"g{int(rng.integers(n_general)):04d}"
            events.append(TweetRecord(f"{root_id}_{j:03d}", who, ts, ENGAGEMENT_TYPES[int(rng.integers(3))],
                                      parent.tweet_id, parent.author_id,
                                      text=" ".join(vocab[int(i)] for i in rng.integers(0, len(vocab), 4)),
                                      author_created_at=created, author_followers=int(rng.integers(10, 5000)),
                                      author_friends=int(rng.integers(10, 2000))))
        records.extend(events)
        labels[root_id] = "Unreliable" if y else "Reliable"
    embeddings = _word_vectors(vocab, dim, rng)
    data = {"records": records, "embeddings": embeddings,
            "reliable": ["news.example"], "unreliable": ["fake.example"]}
    return Fixture("planted-signal", data, {"labels": labels})


# ---------------------------------------------------------------- whole world

TOPIC_WORDS = {
    "ballots": ["ballot", "mailin", "fraud", "count", "polling", "vote"],
    "virus": ["virus", "vaccine", "mask", "lockdown", "cure", "hospital"],
    "border": ["border", "wall", "jobs", "economy", "tariff", "trade"],
}
FILLER = ["people", "today", "great", "really", "big", "news", "look", "story", "everyone", "city"]
LEFT_OUTLETS = [("leftpost.example", "Left"), ("leaningleft.example", "LeanLeft")]
RIGHT_OUTLETS = [("rightwire.example", "Right"), ("leaningright.example", "LeanRight")]
CENTER_OUTLETS = [("middle.example", "Center")]
RELIABLE = ["wire-service.example", "factdaily.example"]
UNRELIABLE = ["truthbomb.example", "hiddenfacts.example"]
OUTLET_DOMAINS = frozenset(d for d, _ in LEFT_OUTLETS + RIGHT_OUTLETS + CENTER_OUTLETS)
KEYWORDS = ["wwg1wga", "#qanon", "#savethechildren", "thegreatawakening", "deepstate"]


def _is_outlet(url: str) -> bool:
    return url.split("/")[2] in OUTLET_DOMAINS


def world(communities: int = 4, community_size: int = 30, n_periphery: int = 60, days: int = 70,
          start: str = "2020-06-11", intervention: str = "2020-07-21", activity: int = 36,
          url_noise: float = 0.1, n_cohort: int = 12, n_late_cohort: int = 2, seed: int = 0) -> Fixture:
    """A small corpus exercising every pipeline stage with known answers.

    Communities alternate Left/Right.  Core accounts (``activity`` records on
    average) engage mostly within their community; periphery accounts are
    too quiet to enter the retweet graph.  Exactly a ``url_noise`` share of
    core accounts link mainly to opposite-side outlets.  ``n_cohort`` Right
    accounts use conspiracy keywords, heavier before the intervention, and an
    ``onward`` hashtag rises after it; ``n_late_cohort`` of them are created
    after the intervention.
    """
    if communities < 2 or community_size < 3 or days < 14 or n_cohort > community_size:
        raise ValueError("invalid world parameters")
    rng = make_rng(seed, 105)
    t0 = _epoch(start)
    cut = _epoch(intervention)
    if not t0 < cut < t0 + days * DAY:
        raise ValueError("intervention must fall inside the simulated window")
    side_of: dict[str, str] = {}
    community_of: dict[str, int] = {}
    core: list[str] = []
    for c in range(communities):
        for i in range(community_size):
            a = f"a{c}{i:03d}"
            side_of[a] = "Left" if c % 2 == 0 else "Right"
            community_of[a] = c
            core.append(a)
    periphery = [f"p{i:03d}" for i in range(n_periphery)]
    for i, a in enumerate(periphery):
        side_of[a] = "Left" if i % 2 == 0 else "Right"
        community_of[a] = -1 - (i % communities)
    accounts = core + periphery
    right_core = [a for a in core if side_of[a] == "Right"]
    left_core = [a for a in core if side_of[a] == "Left"]
    cohort = right_core[:n_cohort]
    stage1_left = left_core[:3]
    late = set(cohort[:n_late_cohort])
    noisy = {core[int(i)] for i in rng.choice(len(core), size=int(round(url_noise * len(core))), replace=False)}
    created = {a: _epoch("2012-01-01") + int(rng.integers(0, 7 * 365)) * DAY for a in accounts}
    for a in late:
        created[a] = cut + 2 * DAY
    followers = {a: int(rng.lognormal(6.0, 1.2)) for a in accounts}
    friends = {a: int(rng.lognormal(5.5, 1.0)) for a in accounts}

    # time stamps per account, then one global chronological pass
    slots: list[tuple[int, str]] = []
    for a in accounts:
        lo = max(t0, created[a] + DAY)
        n_rec = max(int(rng.poisson(activity)), 24) if a.startswith("a") else int(rng.integers(3, 12))
        for ts in np.sort(rng.integers(lo, t0 + days * DAY, n_rec)):
            slots.append((int(ts), a))
    slots.sort()

    topics = sorted(TOPIC_WORDS)
    vocab = [w for k in topics for w in TOPIC_WORDS[k]] + FILLER
    originals: dict[int, list[TweetRecord]] = {c: [] for c in range(communities)}
    by_id: dict[str, TweetRecord] = {}
    records: list[TweetRecord] = []
    root_topic: dict[str, str] = {}
    counter = 0

    def outlet_url(a: str) -> str:
        own = LEFT_OUTLETS if side_of[a] == "Left" else RIGHT_OUTLETS
        other = RIGHT_OUTLETS if side_of[a] == "Left" else LEFT_OUTLETS
        pool = other if a in noisy else own
        if rng.random() < 0.1:
            pool = CENTER_OUTLETS
        dom = pool[int(rng.integers(len(pool)))][0]
        return f"https://{dom}/story/{int(rng.integers(10 ** 6))}"

    def home(a: str) -> int:
        c = community_of[a]
        return c if c >= 0 else -1 - c

    for ts, a in slots:
        counter += 1
        tid = f"w{counter:07d}"
        meta = dict(author_created_at=created[a], author_followers=followers[a], author_friends=friends[a])
        is_cohort = a in cohort
        c = home(a)
        p_orig = 0.35 if is_cohort else 0.22
        candidates = [r for cc in range(communities) for r in originals[cc][-40:]]
        if rng.random() < p_orig or not candidates:
            topic = topics[int(rng.integers(len(topics)))]
            words = [TOPIC_WORDS[topic][int(i)] for i in rng.integers(0, 6, 4)]
            words += [FILLER[int(i)] for i in rng.integers(0, len(FILLER), 2)]
            hashtags: list[str] = []
            urls: list[str] = []
            if a.startswith("a") and rng.random() < 0.7:
                urls.append(outlet_url(a))
            if rng.random() < 0.5:
                unrel_p = 0.65 if side_of[a] == "Right" else 0.2
                dom = (UNRELIABLE if rng.random() < unrel_p else RELIABLE)[int(rng.integers(2))]
                urls.append(f"https://{dom}/p/{int(rng.integers(10 ** 6))}")
            if is_cohort:
                before = ts < cut
                if rng.random() < (0.6 if before else 0.25):
                    words.append("wwg1wga")
                if rng.random() < (0.5 if before else 0.15):
                    hashtags.append("qanon")
                if rng.random() < (0.05 if before else 0.45):
                    hashtags.append("onward")
                if rng.random() < 0.3:
                    hashtags.append(topic)
            text = " ".join(words) + "".join(f" #{h}" for h in hashtags)
            rec = TweetRecord(tid, a, ts, TweetType.ORIGINAL, text=text, urls=tuple(urls),
                              hashtags=tuple(hashtags), **meta)
            originals[c].append(rec)
            root_topic[tid] = topic
        else:
            u = rng.random()
            if is_cohort and rng.random() < 0.3:
                # reach out to the other side by replies
                pool = [r for cc in range(communities) if cc % 2 == 0 for r in originals[cc][-40:]]
                ttype = TweetType.REPLY
            else:
                if u < 0.8:
                    group = [c]
                elif u < 0.92:
                    group = [cc for cc in range(communities) if cc % 2 == c % 2 and cc != c] or [c]
                else:
                    group = [cc for cc in range(communities) if cc % 2 != c % 2]
                pool = [r for cc in group for r in originals[cc][-40:]]
                ttype = (TweetType.RETWEET, TweetType.RETWEET, TweetType.RETWEET, TweetType.REPLY,
                         TweetType.QUOTE)[int(rng.integers(5))]
            pool = [r for r in (pool or candidates) if r.author_id != a] or candidates
            parent = pool[int(rng.integers(len(pool)))]
            if rng.random() < 0.25:
                # sometimes engage an existing engagement of the same cascade
                kids = [r for r in records[-200:] if r.parent_tweet_id == parent.tweet_id and r.author_id != a]
                if kids:
                    parent = kids[int(rng.integers(len(kids)))]
            if ttype is TweetType.RETWEET:
                text, urls, tags = parent.text, parent.urls, parent.hashtags
                if a in noisy:
                    # a noisy account's shared links lean to the other side
                    urls = tuple(u for u in urls if not _is_outlet(u)) + (outlet_url(a),)
            else:
                words = [vocab[int(i)] for i in rng.integers(0, len(vocab), 5)]
                tags = ()
                if a in stage1_left and ttype is TweetType.REPLY and rng.random() < 0.3:
                    tags = ("qanon",)
                if is_cohort and rng.random() < 0.3:
                    words.append("wwg1wga")
                text, urls = " ".join(words) + "".join(f" #{h}" for h in tags), ()
            rec = TweetRecord(tid, a, ts, ttype, parent.tweet_id, parent.author_id, text=text,
                              urls=tuple(urls), hashtags=tuple(tags), **meta)
        records.append(rec)
        by_id[tid] = rec

    centers = {}
    topic_centers = {k: rng.normal(0.0, 3.0, 8) for k in topics}
    for k in topics:
        for w in TOPIC_WORDS[k]:
            centers[w] = topic_centers[k]
    embeddings = _word_vectors(vocab + ["wwg1wga"], 8, rng, centers, noise=0.4)
    outlets = dict(sorted(LEFT_OUTLETS + RIGHT_OUTLETS + CENTER_OUTLETS))
    profile = {a: side_of[a] for a in core if rng.random() < 0.5}
    manual = {a: side_of[a] for a in core if rng.random() < 0.3}
    data = {
        "records": records, "embeddings": embeddings, "reliable": RELIABLE, "unreliable": UNRELIABLE,
        "outlets": outlets, "keywords": KEYWORDS, "profile_labels": profile, "manual_labels": manual,
    }
    truth = {
        "side": side_of, "community": community_of, "core": core, "periphery": periphery,
        "cohort_candidates": sorted(cohort), "stage1_left": sorted(stage1_left), "late_cohort": sorted(late),
        "noisy_url_accounts": sorted(noisy), "root_topic": root_topic, "intervention": intervention,
    }
    return Fixture("world", data, truth)


GENERATORS = {
    "cascade-forest": cascade_forest,
    "planted-partition": planted_partition,
    "step-series": step_series,
    "blob-vectors": blob_vectors,
    "planted-signal": planted_signal,
    "world": world,
}


def generate_fixture(spec: FixtureSpec) -> Fixture:
    if spec.kind not in GENERATORS:
        raise ValueError(f"unknown fixture kind {spec.kind!r}; choose from {sorted(GENERATORS)}")
    try:
        return GENERATORS[spec.kind](**spec.params, seed=spec.seed)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {spec.kind}: {exc}") from exc


# ---------------------------------------------------------------- writers

def _write_jsonl(records, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(to_input_json(r), sort_keys=True) + "\n")


def _write_lines(lines, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(f"{s}\n" for s in lines))


def _write_embeddings(vectors: dict[str, list[float]], path: Path) -> None:
    dim = len(next(iter(vectors.values())))
    _write_lines([f"{len(vectors)} {dim}"] + [w + " " + " ".join(repr(v) for v in vec)
                                              for w, vec in vectors.items()], path)


def _write_rows(header, rows, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def world_config(overrides: dict | None = None) -> dict:
    """Pipeline config matching a written world fixture (paths relative to it)."""
    cfg = {
        "records": "records.jsonl", "reliable": "reliable.txt", "unreliable": "unreliable.txt",
        "outlets": "outlets.csv", "keywords": "keywords.txt", "embeddings": "embeddings.txt",
        "profile_labels": "profile_labels.csv", "manual_labels": "manual_labels.csv",
        "out": "artifacts", "seed": 0, "top_k_accounts": None, "top_k_hashtags": 50,
        "k_min": 2, "k_max": 6, "topic_restarts": 3, "top_tweets": 20,
        "detector": {"hidden": 8, "user_dim": 8, "epochs": 4, "learning_rate": 0.01, "batch_size": 32},
    }
    cfg.update(overrides or {})
    return cfg


def write_fixture(fx: Fixture, out_dir: str | Path, spec: FixtureSpec | None = None) -> list[Path]:
    """Write a fixture in the formats the pipeline reads; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def p(name: str) -> Path:
        written.append(out / name)
        return out / name

    if fx.kind in ("cascade-forest", "world", "planted-signal"):
        records = fx.data if fx.kind == "cascade-forest" else fx.data["records"]
        _write_jsonl(records, p("records.jsonl"))
    if fx.kind in ("world", "planted-signal"):
        d = fx.data
        _write_lines(d["reliable"], p("reliable.txt"))
        _write_lines(d["unreliable"], p("unreliable.txt"))
        _write_embeddings(d["embeddings"], p("embeddings.txt"))
    if fx.kind == "world":
        d = fx.data
        _write_rows(["domain", "bias"], sorted(d["outlets"].items()), p("outlets.csv"))
        _write_lines(d["keywords"], p("keywords.txt"))
        _write_rows(["account_id", "side"], sorted(d["profile_labels"].items()), p("profile_labels.csv"))
        _write_rows(["account_id", "side"], sorted(d["manual_labels"].items()), p("manual_labels.csv"))
        with open(p("config.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(world_config(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if fx.kind == "planted-partition":
        nodes, edges = fx.data
        _write_rows(["u", "v", "weight"], [(u, v, repr(w)) for u, v, w in edges], p("edges.csv"))
    if fx.kind == "step-series":
        x, y = fx.data
        _write_rows(["x", "y"], [(repr(float(a)), repr(float(b))) for a, b in zip(x, y)], p("series.csv"))
    if fx.kind == "blob-vectors":
        _write_rows([f"v{i}" for i in range(fx.data.shape[1])],
                    [[repr(float(v)) for v in row] for row in fx.data], p("vectors.csv"))
    meta = {"kind": fx.kind, "rng": ALGORITHM, "truth": fx.truth}
    if spec is not None:
        meta.update({"params": spec.params, "seed": spec.seed})
    with open(p("truth.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return written
