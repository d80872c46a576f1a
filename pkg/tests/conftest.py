from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from cascade_forensics.cascades import build_cascades
from cascade_forensics.cohort import KeywordSet
from cascade_forensics.detector import prepare
from cascade_forensics.ingest import TweetRecord, TweetType
from cascade_forensics.labeling import label_cascades, source_list_from_domains
from cascade_forensics.leaning import Side
from cascade_forensics.synth.fixtures import planted_signal, world
from cascade_forensics.synth.rng import make_rng
from cascade_forensics.topics import EmbeddingTable


def rec(tid, author, t, ttype="Original", parent=None, parent_author=None, text="", urls=(), hashtags=(),
        created=None, followers=0, friends=0) -> TweetRecord:
    return TweetRecord(tid, author, t, TweetType(ttype), parent, parent_author, text, tuple(urls), tuple(hashtags),
                       created, followers, friends)


def table_from(vectors: dict) -> EmbeddingTable:
    return EmbeddingTable.from_dict({w: np.asarray(v, dtype=float) for w, v in vectors.items()})


def planted_items(seed: int = 0, n: int = 500):
    fx = planted_signal(n=n, seed=seed)
    sources = source_list_from_domains(fx.data["reliable"], fx.data["unreliable"])
    cascades, _ = label_cascades(build_cascades(fx.data["records"]), sources)
    table = table_from(fx.data["embeddings"])
    return [prepare(c, table) for c in cascades], fx


def shuffle_labels(items, seed: int = 0):
    labels = [it.label for it in items]
    perm = make_rng(seed, 99).permutation(len(labels))
    return [replace(it, label=int(labels[j])) for it, j in zip(items, perm)]


@pytest.fixture(scope="session")
def world_fixture():
    return world(seed=0)


@pytest.fixture(scope="session")
def planted():
    return planted_items(0)


def random_tree_records(rng, n: int, n_authors: int = 8, p_dangling: float = 0.1, t0: int = 1_600_000_000):
    """Root plus ``n - 1`` engagements with uniformly random earlier parents.

    With probability ``p_dangling`` an engagement points at a tweet that is not
    in the cascade, which forces a repair when the tree is built.
    """
    times = t0 + np.concatenate([[0], np.cumsum(rng.integers(1, 7200, size=n - 1))])
    out = [rec("r0", f"a{int(rng.integers(n_authors))}", int(times[0]))]
    for i in range(1, n):
        if rng.random() < p_dangling:
            parent = f"gone{i}"
        else:
            parent = f"r{int(rng.integers(i))}" if i > 1 else "r0"
        ttype = ("Retweet", "Reply", "Quote")[int(rng.integers(3))]
        out.append(rec(f"r{i}", f"a{int(rng.integers(n_authors))}", int(times[i]), ttype, parent, "x"))
    return out


def random_items(rng, n: int = 6, dim: int = 5, max_len: int = 7, n_accounts: int = 12):
    """Labeled cascades with random feature rows, for numerics that do not need real text."""
    from cascade_forensics.detector import PreparedCascade
    items = []
    for i in range(n):
        length = int(rng.integers(1, max_len + 1))
        accounts = sorted({f"u{int(a)}" for a in rng.integers(n_accounts, size=int(rng.integers(1, 5)))})
        items.append(PreparedCascade(f"c{i}", rng.normal(size=(length, dim)), tuple(accounts), i % 2))
    return items


def structured_graphs():
    """Named small graphs with known community structure (all at most 8 nodes)."""
    def clique(names):
        return [(a, b, 1.0) for i, a in enumerate(names) for b in names[i + 1:]]
    g = {}
    a, b = list("abcd"), list("efgh")
    g["two_4cliques_bridge"] = (a + b, clique(a) + clique(b) + [("d", "e", 1.0)])
    tri = [list("abc"), list("def"), list("gh")]
    g["triangles_and_pair"] = (list("abcdefgh"), clique(tri[0]) + clique(tri[1]) + clique(tri[2])
                               + [("c", "d", 1.0), ("f", "g", 1.0)])
    g["path8"] = (list("abcdefgh"), [(x, y, 1.0) for x, y in zip("abcdefg", "bcdefgh")])
    g["star"] = (list("abcdef"), [("a", x, 1.0) for x in "bcdef"])
    g["ring8"] = (list("abcdefgh"), [(x, y, 1.0) for x, y in zip("abcdefgh", "bcdefgha")])
    g["weighted_barbell"] = (list("abcdef"), clique(list("abc")) + clique(list("def")) + [("c", "d", 0.2)])
    g["heavy_pair"] = (list("abcd"), [("a", "b", 5.0), ("c", "d", 5.0), ("b", "c", 1.0)])
    g["self_loops"] = (list("abcde"), [("a", "a", 1.0), ("a", "b", 1.0), ("c", "d", 1.0), ("d", "e", 1.0),
                                       ("e", "c", 1.0), ("b", "c", 0.5)])
    g["isolated"] = (list("abcde"), [("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0), ("d", "e", 1.0)])
    return g


def random_small_graphs(count: int = 50, seed: int = 0, max_nodes: int = 8):
    """Erdos-Renyi graphs with 3..max_nodes nodes, integer weights 1..3, at least one edge."""
    rng = make_rng(seed, 110)
    out = []
    while len(out) < count:
        n = int(rng.integers(3, max_nodes + 1))
        p = float(rng.uniform(0.2, 0.7))
        nodes = [f"v{i}" for i in range(n)]
        edges = [(nodes[i], nodes[j], float(rng.integers(1, 4)))
                 for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        if edges:
            out.append((nodes, edges))
    return out


OUTLETS = {"leftpost.example": "Left", "leaningleft.example": "LeanLeft", "middle.example": "Center",
           "leaningright.example": "LeanRight", "rightwire.example": "Right", "news.rightwire.example": "Left"}


def random_url_accounts(rng, n_accounts: int = 1000):
    """Records for accounts with random mixes of outlet links across tweet types.

    Counts hover around the 10-URL and 70% share cut-offs so both filters bite.
    """
    hosts = ["leftpost.example", "www.leaningleft.example", "cdn.middle.example", "leaningright.example",
             "rightwire.example", "news.rightwire.example", "elsewhere.example", "notrightwire.example"]
    types = ("Original", "Retweet", "Reply", "Quote")
    out, k = [], 0
    for a in range(n_accounts):
        lean = rng.dirichlet(np.ones(len(hosts)) * 0.5)
        for _ in range(int(rng.integers(0, 30))):
            urls = [f"https://{hosts[int(rng.choice(len(hosts), p=lean))]}/s/{k}"
                    for _ in range(int(rng.integers(0, 4)))]
            ttype = types[int(rng.integers(4))]
            parent = None if ttype == "Original" else "x"
            out.append(rec(f"t{k}", f"acct{a:04d}", k, ttype, parent, "z" if parent else None, urls=urls))
            k += 1
    return out


KEYWORDS = KeywordSet.parse(["wwg1wga", "#qanon", "#savethechildren", "thegreatawakening", "deepstate", ""])

L, R, U = Side.LEFT, Side.RIGHT, Side.UNDETERMINED
LEANING = {"c1": R, "c2": R, "c3": R, "l1": L, "r9": R, "x1": L, "x2": R, "x3": U, "x4": L, "x5": R, "x7": U}
UNIVERSE = ["c1", "c2", "c3", "l1", "r9", "x1", "x2", "x3", "x4", "x5", "x6", "x7"]

# twelve accounts; every partition class is populated
WORKED = [
    rec("1", "c1", 1, text="WWG1WGA where we go"),
    rec("2", "c2", 2, hashtags=["qanon"]),
    rec("3", "c3", 3, "Reply", "90", "x1", text="the deepstate again"),
    rec("4", "l1", 4, text="thegreatawakening is a joke"),
    rec("5", "r9", 5, "Retweet", "1", "c1", text="WWG1WGA where we go"),
    rec("6", "x1", 6, "Reply", "2", "c2"),
    rec("7", "c1", 7, "Retweet", "91", "x2"),
    rec("8", "x3", 8, "Quote", "3", "c3"),
    rec("9", "l1", 9, "Reply", "1", "c1"),
    rec("10", "c2", 10, "Reply", "4", "l1"),
    rec("11", "x4", 11, "Retweet", "92", "x5"),
    rec("12", "x6", 12, text="savethechildren without the hash"),
    rec("13", "x7", 13, hashtags=["savethechildren"]),
    rec("14", "x5", 14, "Reply", "91", "x2"),
    rec("15", "c1", 15, "Reply", "2", "c2"),
]
