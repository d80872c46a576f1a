"""Naive reference computations for tests.

These take plain Python/numpy inputs and deliberately avoid importing or
mirroring the pipeline modules: explicit inverses instead of factorized
solves, enumeration instead of search, nested loops instead of counters.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Sequence

import numpy as np
from scipy import special

CAPS = {"partition_nodes": 10, "ols_points": 1000, "tree_nodes": 200, "pairwise_accounts": 400, "lp_nodes": 400}


class OracleCapExceeded(ValueError):
    pass


def _cap(name: str, value: int) -> None:
    if value > CAPS[name]:
        raise OracleCapExceeded(f"{name}={value} exceeds oracle cap {CAPS[name]}")


# ---------------------------------------------------------------- OLS

def _t_sf2(t: float, df: int) -> float:
    """Two-sided Student-t tail via the regularized incomplete beta function."""
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def _f_sf(f: float, d1: int, d2: int) -> float:
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def ols(x: Sequence[float], y: Sequence[float], x0: float, degree: int = 1) -> dict[str, Any]:
    """Textbook OLS on [1, x, .., x^d, 1{x > x0}] using an explicit matrix inverse."""
    n = len(y)
    _cap("ols_points", n)
    rows = []
    for xi in x:
        rows.append([1.0] + [float(xi) ** k for k in range(1, degree + 1)] + [1.0 if xi > x0 else 0.0])
    X = np.array(rows)
    Y = np.array(y, dtype=float)
    p = X.shape[1]
    inv = np.linalg.inv(X.T @ X)
    coef = inv @ (X.T @ Y)
    fitted = X @ coef
    rss = sum((Y[i] - fitted[i]) ** 2 for i in range(n))
    ybar = sum(Y) / n
    tss = sum((v - ybar) ** 2 for v in Y)
    s2 = rss / (n - p)
    se = [math.sqrt(inv[j, j] * s2) for j in range(p)]
    p_values = [_t_sf2(coef[j] / se[j], n - p) for j in range(p)]
    f_stat = ((tss - rss) / (p - 1)) / s2
    ll = -0.5 * n * (math.log(2 * math.pi) + math.log(rss / n) + 1)
    r2 = 1 - rss / tss
    return {
        "coef": list(coef), "se": se, "p_values": p_values, "rss": rss, "r2": r2,
        "r2_adj": 1 - (1 - r2) * (n - 1) / (n - p), "f_stat": f_stat, "f_p_value": _f_sf(f_stat, p - 1, n - p),
        "aic": 2 * p - 2 * ll, "bic": p * math.log(n) - 2 * ll,
    }


# ---------------------------------------------------------------- modularity

def set_partitions(n: int):
    """All set partitions of range(n) as restricted growth strings."""
    a = [0] * n
    def rec(i: int, top: int):
        if i == n:
            yield tuple(a)
            return
        for c in range(top + 2):
            a[i] = c
            yield from rec(i + 1, max(top, c))
    if n == 0:
        yield ()
    else:
        yield from rec(1, 0)


def dense_modularity(A: np.ndarray, labels: Sequence[int]) -> float:
    k = A.sum(axis=1)
    two_m = A.sum()
    q = 0.0
    for i in range(len(labels)):
        for j in range(len(labels)):
            if labels[i] == labels[j]:
                q += A[i, j] - k[i] * k[j] / two_m
    return q / two_m


def adjacency(nodes: Sequence, edges: Sequence[tuple]) -> np.ndarray:
    pos = {v: i for i, v in enumerate(nodes)}
    A = np.zeros((len(nodes), len(nodes)))
    for u, v, w in edges:
        if u == v:
            A[pos[u], pos[u]] += 2 * w
        else:
            A[pos[u], pos[v]] += w
            A[pos[v], pos[u]] += w
    return A


def best_modularity(nodes: Sequence, edges: Sequence[tuple]) -> tuple[float, dict]:
    """Exhaustive maximum over every set partition (Bell-number many)."""
    _cap("partition_nodes", len(nodes))
    A = adjacency(nodes, edges)
    best_q, best = -math.inf, None
    for labels in set_partitions(len(nodes)):
        q = dense_modularity(A, labels)
        if q > best_q:
            best_q, best = q, labels
    return best_q, dict(zip(nodes, best))


# ---------------------------------------------------------------- cascades

def cascade_membership(records: Sequence[tuple[str, str | None]]) -> dict[str, str]:
    """(tweet_id, parent_id) pairs -> root per tweet by walking parent pointers one by one."""
    parent = dict(records)
    out = {}
    for t in parent:
        cur, steps = t, 0
        while parent.get(cur) is not None and parent[cur] in parent and steps <= len(parent):
            cur = parent[cur]
            steps += 1
        out[t] = cur
    return out


def propagation(cascades: Sequence[Sequence[tuple[str, str, int, str | None]]]) -> dict[str, list[tuple]]:
    """Double-loop propagation curves.

    Each cascade is a list of (tweet_id, author, created_at, parent_id) with
    the root first and the rest in time order.  Returns, per curve, a list of
    (x, y, n) rows.
    """
    for c in cascades:
        _cap("tree_nodes", len(c))
    sizes = [len(c) for c in cascades]
    ccdf = []
    for s in sorted(set(sizes)):
        n_ge = sum(1 for z in sizes if z >= s)
        ccdf.append((float(s), n_ge / len(sizes), n_ge))

    def depths(c):
        ids = [e[0] for e in c]
        par = {e[0]: e[3] for e in c[1:]}
        repaired = False
        out = {c[0][0]: 0}
        for e in c[1:]:
            d, cur = 0, e[0]
            while cur != c[0][0]:
                p = par[cur]
                if p is None or p not in ids or p == cur:
                    repaired = True
                    p = c[0][0]
                cur = p
                d += 1
            out[e[0]] = d
        return out, repaired

    def breadth_rows(selected):
        rows = []
        max_d = max(max(d.values()) for d, _ in selected) if selected else -1
        for level in range(max_d + 1):
            total, reach = 0, 0
            for d, _ in selected:
                if max(d.values()) >= level:
                    reach += 1
                    total += sum(1 for v in d.values() if v == level)
            rows.append((float(level), total / reach, reach))
        return rows

    trees = [depths(c) for c in cascades]
    uu = []
    for i in range(max(sizes)):
        vals = [len({e[1] for e in c[:i + 1]}) for c in cascades if len(c) > i]
        uu.append((float(i), sum(vals) / len(vals), len(vals)))
    tt = []
    for k in range(1, max(len({e[1] for e in c}) for c in cascades) + 1):
        vals = []
        for c in cascades:
            seen = []
            for e in c:
                if e[1] not in seen:
                    seen.append(e[1])
                    if len(seen) == k:
                        vals.append((e[2] - c[0][2]) / 3600.0)
                        break
        if vals:
            tt.append((float(k), math.fsum(vals) / len(vals), len(vals)))
    return {
        "size_ccdf": ccdf, "breadth_by_depth": breadth_rows(trees),
        "breadth_by_depth_unrepaired": breadth_rows([t for t in trees if not t[1]]),
        "unique_users": uu, "time_to_unique": tt,
    }


# ---------------------------------------------------------------- detector

def threshold_scan(scores: Sequence[float], labels: Sequence[int]) -> tuple[float, float]:
    """Try every midpoint of the padded sorted score list; first maximum wins."""
    grid = sorted(set([0.0, 1.0] + [float(s) for s in scores]))
    pos = sum(1 for v in labels if v == 1)
    neg = len(labels) - pos
    best_t, best_key, best_g = None, -1, -1.0
    for a, b in zip(grid[:-1], grid[1:]):
        t = (a + b) / 2
        tp = sum(1 for s, v in zip(scores, labels) if s >= t and v == 1)
        tn = sum(1 for s, v in zip(scores, labels) if s < t and v == 0)
        if tp * tn > best_key:  # integer key: exact ties keep the earlier threshold
            best_t, best_key, best_g = t, tp * tn, math.sqrt((tp / pos) * (tn / neg))
    return best_t, best_g


def user_vectors(account_sets: Sequence[Sequence[str]], k: int) -> tuple[list[str], np.ndarray, np.ndarray]:
    """U_k S_k from an eigendecomposition of M Mᵀ (dense)."""
    accounts = sorted({a for s in account_sets for a in s})
    M = np.zeros((len(accounts), len(account_sets)))
    for j, s in enumerate(account_sets):
        for a in s:
            M[accounts.index(a), j] = 1.0
    w, U = np.linalg.eigh(M @ M.T)
    order = np.argsort(-w)[:k]
    sv = np.sqrt(np.clip(w[order], 0, None))
    U = U[:, order]
    for j in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
    return accounts, U * sv, sv


def margin_split(ids: Sequence[str], scores: Sequence[float], theta: float, q: float) -> dict[str, str]:
    pos = [(s - theta, i) for i, s in zip(ids, scores) if s - theta >= 0]
    neg = [(s - theta, i) for i, s in zip(ids, scores) if s - theta < 0]
    pos.sort(key=lambda t: (-t[0], t[1]))
    neg.sort(key=lambda t: (t[0], t[1]))
    out = {i: "Abstain" for i in ids}
    for _, i in pos[:int(q * len(pos) + 1e-9)]:
        out[i] = "Unreliable"
    for _, i in neg[:int(q * len(neg) + 1e-9)]:
        out[i] = "Reliable"
    return out


# ---------------------------------------------------------------- leaning

def _host_matches(url: str, domain: str) -> bool:
    host = url.split("//", 1)[-1].split("/", 1)[0].split(":", 1)[0].lower()
    if host.startswith("www."):
        host = host[4:]
    return host == domain or host.endswith("." + domain)


def seed_counts(records: Sequence[Any], outlets: dict[str, str], min_urls: int = 10) -> dict[str, tuple[int, int, bool]]:
    """Per author: (left, right, kept) counted record by record, URL by URL."""
    out = {}
    authors = sorted({r.author_id for r in records})
    for a in authors:
        nl = nr = 0
        for r in records:
            if r.author_id != a or r.tweet_type.value not in ("Original", "Retweet"):
                continue
            for u in r.urls:
                best = None
                for d, b in outlets.items():
                    if _host_matches(u, d) and (best is None or len(d) > len(best[0])):
                        best = (d, b)
                if best and best[1] in ("Left", "LeanLeft"):
                    nl += 1
                elif best and best[1] in ("Right", "LeanRight"):
                    nr += 1
        if nl + nr:
            kept = nl + nr >= min_urls and 10 * max(nl, nr) >= 7 * (nl + nr)
            out[a] = (nl, nr, kept)
    return out


def retweet_weights(records: Sequence[Any], min_appearances: int = 20) -> dict[tuple[str, str], int]:
    """Quadratic recount: for each node pair, scan every record."""
    authors = sorted({r.author_id for r in records})
    nodes = [a for a in authors if sum(1 for r in records if r.author_id == a) >= min_appearances]
    _cap("pairwise_accounts", len(nodes))
    rts = [r for r in records if r.tweet_type.value == "Retweet"]
    out = {}
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            w = sum(1 for r in rts if {r.author_id, r.parent_author_id} == {u, v})
            if w:
                out[(u, v)] = w
    return out


def label_propagation(nodes: Sequence[str], edges: Sequence[tuple], seeds: dict[str, int],
                      max_iter: int = 100) -> dict[str, int]:
    """Dense synchronous iteration; labels -1/0/+1, seeds clamped, ties keep the old label."""
    _cap("lp_nodes", len(nodes))
    A = adjacency(nodes, edges)
    lab = np.array([seeds.get(v, 0) for v in nodes], dtype=float)
    clamp = np.array([v in seeds for v in nodes])
    for _ in range(max_iter):
        left = A @ (lab < 0)
        right = A @ (lab > 0)
        new = np.where(left > right, -1.0, np.where(right > left, 1.0, lab))
        new[clamp] = lab[clamp]
        if np.array_equal(new, lab):
            break
        lab = new
    return {v: int(l) for v, l in zip(nodes, lab)}


# ---------------------------------------------------------------- text

def tfidf(docs: dict[int, list[str]], top_words: int) -> dict[int, list[tuple[str, float]]]:
    ids = sorted(docs)
    out = {}
    for c in ids:
        scores = []
        for t in sorted(set(docs[c])):
            tf = sum(1 for w in docs[c] if w == t)
            df = sum(1 for d in ids if t in docs[d])
            s = tf * math.log(len(ids) / df)
            if s > 0:
                scores.append((t, s))
        scores.sort(key=lambda p: (-p[1], p[0]))
        out[c] = scores[:top_words]
    return out


def hashtag_series(records: Sequence[Any], cohort: set[str], tag: str) -> dict[int, float]:
    """Per UTC day: (# cohort tweets carrying ``tag``) / (# cohort tweets), days with tweets only."""
    days = sorted({r.created_at // 86400 for r in records if r.author_id in cohort})
    out = {}
    for d in days:
        day_recs = [r for r in records if r.author_id in cohort and r.created_at // 86400 == d]
        out[d] = sum(1 for r in day_recs if tag in r.hashtags) / len(day_recs)
    return out


ORACLES: dict[str, Callable] = {
    "ols": ols,
    "modularity": best_modularity,
    "membership": cascade_membership,
    "propagation": propagation,
    "threshold": threshold_scan,
    "svd": user_vectors,
    "margins": margin_split,
    "seed_filter": seed_counts,
    "retweet_graph": retweet_weights,
    "label_propagation": label_propagation,
    "tfidf": tfidf,
    "hashtag_series": hashtag_series,
}


def run_oracle(kind: str, *args, **kwargs):
    if kind not in ORACLES:
        raise ValueError(f"unknown oracle {kind!r}")
    return ORACLES[kind](*args, **kwargs)
