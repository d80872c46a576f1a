"""Per-hashtag usage series and sharp regression-discontinuity fits."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .ingest import TweetRecord

DAY = 86400
MARGIN = 0.001


class SingularDesign(ValueError):
    pass


@dataclass
class HashtagSeries:
    hashtag: str
    x: np.ndarray  # day index from the first cohort day
    y: np.ndarray  # usages / cohort tweets that day
    total: int


def utc_day(ts: int) -> int:
    return ts // DAY


def day_of(date: str | dt.date) -> int:
    """ISO date -> days since the epoch (00:00 UTC)."""
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    return (date - dt.date(1970, 1, 1)).days


def week_end_day(date: str | dt.date) -> int:
    """Epoch day of the Sunday closing the ISO week that contains ``date``."""
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    return day_of(date + dt.timedelta(days=7 - date.isoweekday()))


def cohort_day_volume(records: Iterable[TweetRecord], cohort: set[str] | frozenset[str]) -> Counter[int]:
    return Counter(utc_day(r.created_at) for r in records if r.author_id in cohort)


def build_hashtag_series(records: Sequence[TweetRecord], cohort: set[str] | frozenset[str],
                         top_k: int = 10000) -> tuple[list[HashtagSeries], int]:
    """Daily normalized usage of the ``top_k`` most used hashtags in cohort tweets.

    A tweet counts once per distinct hashtag it carries.  Returns the series
    and the epoch day used as x = 0.
    """
    volume: Counter[int] = Counter()
    usage: dict[str, Counter[int]] = defaultdict(Counter)
    for r in records:
        if r.author_id not in cohort:
            continue
        d = utc_day(r.created_at)
        volume[d] += 1
        for tag in set(r.hashtags):
            usage[tag][d] += 1
    if not volume:
        return [], 0
    day0 = min(volume)
    days = sorted(volume)
    totals = sorted(((sum(c.values()), t) for t, c in usage.items()), key=lambda p: (-p[0], p[1]))
    out = []
    for total, tag in totals[:top_k]:
        c = usage[tag]
        x = np.array([d - day0 for d in days], dtype=float)
        y = np.array([c.get(d, 0) / volume[d] for d in days], dtype=float)
        out.append(HashtagSeries(tag, x, y, total))
    return out, day0


def design_matrix(x: np.ndarray, x0: float, degree: int, separate_slopes: bool = False) -> tuple[np.ndarray, list[str]]:
    x = np.asarray(x, dtype=float)
    cols = [np.ones_like(x)]
    names = ["intercept"]
    for k in range(1, degree + 1):
        cols.append(x ** k)
        names.append("slope" if k == 1 else f"x^{k}")
    treated = (x > x0).astype(float)
    if separate_slopes:
        for k in range(1, degree + 1):
            cols.append(treated * (x - x0) ** k)
            names.append("slope_after" if k == 1 else f"x^{k}_after")
    cols.append(treated)
    names.append("beta")
    return np.column_stack(cols), names


@dataclass
class RddFit:
    degree: int
    names: list[str]
    coef: np.ndarray
    se: np.ndarray
    p_values: np.ndarray
    rss: float
    r2: float
    r2_adj: float
    f_stat: float
    f_p_value: float
    aic: float
    bic: float
    n: int
    x0: float
    degenerate: bool = False
    separate_slopes: bool = False

    def _get(self, arr: np.ndarray, name: str) -> float:
        return float(arr[self.names.index(name)])

    @property
    def beta(self) -> float:
        return self._get(self.coef, "beta")

    @property
    def slope(self) -> float:
        return self._get(self.coef, "slope")

    @property
    def intercept(self) -> float:
        return self._get(self.coef, "intercept")

    @property
    def beta_p(self) -> float:
        return self._get(self.p_values, "beta")

    def predict(self, x: np.ndarray) -> np.ndarray:
        X, _ = design_matrix(x, self.x0, self.degree, self.separate_slopes)
        return X @ self.coef


def _solve_normal(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and (XᵀX)⁻¹ via column-scaled normal equations and pivoted LU."""
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise SingularDesign("design has an all-zero column (e.g. no points after the threshold)")
    Xs = X / norms
    if np.linalg.matrix_rank(Xs) < X.shape[1]:
        raise SingularDesign(f"design rank < {X.shape[1]} columns")
    A = Xs.T @ Xs
    lu = scipy.linalg.lu_factor(A)
    coef = scipy.linalg.lu_solve(lu, Xs.T @ y) / norms
    inv = scipy.linalg.lu_solve(lu, np.eye(A.shape[0])) / np.outer(norms, norms)
    return coef, inv


def fit_rdd(x: np.ndarray, y: np.ndarray, x0: float, degree: int = 1, separate_slopes: bool = False) -> RddFit:
    """OLS on ``[1, x, .., x^degree, 1{x > x0}]`` with textbook inference."""
    if degree not in (1, 2, 3, 4):
        raise ValueError("degree must be 1..4")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    X, names = design_matrix(x, x0, degree, separate_slopes)
    p = X.shape[1]
    if n < degree + 3 or n <= p:
        raise ValueError(f"need more than {p} points (and at least {degree + 3}), got {n}")
    coef, inv = _solve_normal(X, y)
    resid = y - X @ coef
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    dof = n - p
    degenerate = rss <= 1e-20 * max(float(y @ y), 1e-300)
    if degenerate:
        rss = 0.0
        se = np.zeros(p)
        pv = np.zeros(p)
        f_stat, f_p = math.inf, 0.0
        loglik = math.inf
    else:
        sigma2 = rss / dof
        se = np.sqrt(np.maximum(np.diag(inv) * sigma2, 0.0))
        pv = 2.0 * stats.t.sf(np.abs(coef / se), dof)
        f_stat = ((tss - rss) / (p - 1)) / sigma2
        f_p = float(stats.f.sf(f_stat, p - 1, dof))
        loglik = -n / 2.0 * (math.log(2.0 * math.pi * rss / n) + 1.0)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    r2_adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    return RddFit(degree, names, coef, se, np.clip(pv, 0.0, 1.0), rss, r2, r2_adj, float(f_stat), f_p,
                  2.0 * p - 2.0 * loglik, p * math.log(n) - 2.0 * loglik, n, float(x0), degenerate,
                  separate_slopes)


def compare_degrees(x: np.ndarray, y: np.ndarray, x0: float, degrees: Sequence[int] = (1, 2)) -> list[RddFit]:
    return [fit_rdd(x, y, x0, d) for d in degrees]


class Effect(str, enum.Enum):
    DECLINING = "Declining"
    INCREASING = "Increasing"
    MIXED = "Mixed"


def classify_effect(beta: float, slope: float, margin: float = MARGIN) -> Effect:
    """Jump direction must agree with a trend that is flat within ``margin`` or same-signed."""
    if beta < 0 and slope <= margin:
        return Effect.DECLINING
    if beta > 0 and slope >= -margin:
        return Effect.INCREASING
    return Effect.MIXED


@dataclass
class RankedRow:
    hashtag: str
    abs_beta: float
    slope: float
    intercept: float
    p_value: float
    significant: bool


def rank_hashtags(fits: Mapping[str, RddFit], p_max: float = 0.2, top_n: int | None = None,
                  alpha: float = 0.05) -> tuple[list[RankedRow], list[RankedRow]]:
    """(declining, increasing) tables sorted by |beta| descending, ties by hashtag."""
    tables: dict[Effect, list[RankedRow]] = {Effect.DECLINING: [], Effect.INCREASING: []}
    for tag in sorted(fits):
        f = fits[tag]
        if f.beta_p > p_max:
            continue
        eff = classify_effect(f.beta, f.slope)
        if eff in tables:
            tables[eff].append(RankedRow(tag, abs(f.beta), f.slope, f.intercept, f.beta_p, f.beta_p <= alpha))
    out = []
    for eff in (Effect.DECLINING, Effect.INCREASING):
        rows = sorted(tables[eff], key=lambda r: (-r.abs_beta, r.hashtag))
        out.append(rows[:top_n] if top_n is not None else rows)
    return out[0], out[1]


def write_ranked(rows: Sequence[RankedRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hashtag", "abs_beta", "slope", "intercept", "p_value", "significant"])
        for r in rows:
            w.writerow([r.hashtag, repr(r.abs_beta), repr(r.slope), repr(r.intercept), repr(r.p_value),
                        int(r.significant)])


def write_fits(fits: Mapping[str, RddFit], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hashtag", "n", "beta", "beta_se", "beta_p", "slope", "intercept", "r2", "effect",
                    "degenerate"])
        for tag in sorted(fits):
            f = fits[tag]
            i = f.names.index("beta")
            w.writerow([tag, f.n, repr(f.beta), repr(float(f.se[i])), repr(f.beta_p), repr(f.slope),
                        repr(f.intercept), repr(f.r2), classify_effect(f.beta, f.slope).value, int(f.degenerate)])


def write_degree_table(rows: Iterable[tuple[str, RddFit]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hashtag", "degree", "r2", "r2_adj", "f_stat", "f_p_value", "aic", "bic", "n"])
        for tag, f in rows:
            w.writerow([tag, f.degree, repr(f.r2), repr(f.r2_adj), repr(f.f_stat), repr(f.f_p_value),
                        repr(f.aic), repr(f.bic), f.n])


def write_scatter(series: Sequence[HashtagSeries], fits: Mapping[str, RddFit], path: str | Path) -> None:
    """Points plus fitted values per hashtag, for discontinuity plots."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hashtag", "x", "y", "fitted"])
        for s in series:
            if s.hashtag not in fits:
                continue
            fitted = fits[s.hashtag].predict(s.x)
            for xi, yi, fi in zip(s.x, s.y, fitted):
                w.writerow([s.hashtag, int(xi), repr(float(yi)), repr(float(fi))])


@dataclass
class RddRun:
    series: list[HashtagSeries]
    fits: dict[str, RddFit]
    skipped: dict[str, str] = field(default_factory=dict)
    x0: int = 0
    day0: int = 0


def fit_all(series: Sequence[HashtagSeries], x0: float, degree: int = 1, separate_slopes: bool = False,
            day0: int = 0) -> RddRun:
    """Fit every series; short or singular ones are recorded in ``skipped``."""
    fits, skipped = {}, {}
    for s in series:
        try:
            fits[s.hashtag] = fit_rdd(s.x, s.y, x0, degree, separate_slopes)
        except (SingularDesign, ValueError) as e:
            skipped[s.hashtag] = str(e)
    return RddRun(list(series), fits, skipped, int(x0), day0)
