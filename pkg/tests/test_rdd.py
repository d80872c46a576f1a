import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_forensics.rdd import (Effect, RddFit, SingularDesign, build_hashtag_series, classify_effect,
                                   compare_degrees, day_of, design_matrix, fit_all, fit_rdd, rank_hashtags,
                                   week_end_day, write_fits)
from cascade_forensics.synth import oracles
from cascade_forensics.synth.fixtures import step_series

from conftest import rec

FIELDS = ("coef", "se", "p_values", "rss", "r2", "r2_adj", "f_stat", "f_p_value", "aic", "bic")


def close(a, b, rel=1e-8):
    return np.allclose(np.asarray(a, float), np.asarray(b, float), rtol=rel, atol=0)


def test_zero_noise_step_is_exact():
    x, y = step_series(intercept=0.1, beta=0.2, slope=0.0, sigma=0.0).data
    f = fit_rdd(x, y, 39)
    assert f.names == ["intercept", "slope", "beta"]
    assert f.degenerate and f.rss < 1e-12
    assert math.isclose(f.intercept, 0.1, abs_tol=1e-12) and abs(f.slope) < 1e-12
    assert math.isclose(f.beta, 0.2, abs_tol=1e-12)
    assert f.beta_p == 0.0 and f.f_stat == math.inf
    o = oracles.ols(x, y + 0.0, 39)
    assert math.isclose(o["coef"][2], 0.2, abs_tol=1e-12)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("degree", [1, 2, 3])
def test_matches_oracle_on_noisy_series(seed, degree):
    x, y = step_series(intercept=0.4, beta=-0.3, slope=0.002, sigma=0.05, seed=seed).data
    f = fit_rdd(x, y, 39, degree)
    o = oracles.ols(x, y, 39, degree)
    for name in FIELDS:
        got = {"coef": f.coef, "p_values": f.p_values}.get(name, getattr(f, name))
        assert close(got, o[name], rel=1e-7 if degree == 3 else 1e-8), name


def test_design_columns():
    X, names = design_matrix(np.arange(5.0), 2, 2, separate_slopes=True)
    assert names == ["intercept", "slope", "x^2", "slope_after", "x^2_after", "beta"]
    assert X[:, -1].tolist() == [0, 0, 0, 1, 1]
    assert X[:, 3].tolist() == [0, 0, 0, 1, 2]
    f = fit_rdd(np.arange(20.0), np.where(np.arange(20) > 9, 0.5 + 0.1 * (np.arange(20) - 9), 0.0), 9,
                separate_slopes=True)
    assert math.isclose(f.coef[f.names.index("slope_after")], 0.1, abs_tol=1e-10)


def test_singular_and_short_inputs():
    with pytest.raises(SingularDesign):
        fit_rdd(np.arange(10.0), np.ones(10), 20)
    with pytest.raises(ValueError):
        fit_rdd(np.arange(3.0), np.ones(3), 1)
    with pytest.raises(ValueError):
        fit_rdd(np.arange(10.0), np.ones(10), 4, degree=5)


def test_effect_rule():
    assert classify_effect(-1.512, -0.047) is Effect.DECLINING
    assert classify_effect(0.138, -0.001) is Effect.INCREASING
    assert classify_effect(0.138, -0.0011) is Effect.MIXED
    assert classify_effect(-0.1, 0.001) is Effect.DECLINING
    assert classify_effect(-0.1, 0.0011) is Effect.MIXED
    assert classify_effect(0.0, 0.0) is Effect.MIXED


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5, allow_nan=False), st.floats(-0.01, 0.01, allow_nan=False))
def test_effect_rule_is_exhaustive(beta, slope):
    e = classify_effect(beta, slope)
    if beta < 0 and slope <= 0.001:
        assert e is Effect.DECLINING
    elif beta > 0 and slope >= -0.001:
        assert e is Effect.INCREASING
    else:
        assert e is Effect.MIXED


def test_week_end_day():
    assert week_end_day("2020-07-21") == day_of("2020-07-26")
    assert week_end_day("2020-07-26") == day_of("2020-07-26")
    assert week_end_day("2020-07-27") == day_of("2020-08-02")


def test_hashtag_series_matches_oracle():
    base = 18_000 * 86400
    records = []
    for k in range(60):
        tags = [("qanon", "wwg1wga", "vote")[k % 3]] + (["qanon"] if k % 7 == 0 else [])
        author = ("c1", "c2", "out")[k % 3 if k % 5 else 2]
        records.append(rec(str(k), author, base + (k // 4) * 86400 + k, hashtags=tags))
    cohort = {"c1", "c2"}
    series, day0 = build_hashtag_series(records, cohort, top_k=2)
    assert [s.hashtag for s in series] == ["qanon", "wwg1wga"]
    for s in series:
        want = oracles.hashtag_series(records, cohort, s.hashtag)
        assert dict(zip((s.x + day0).astype(int).tolist(), s.y.tolist())) == want


def test_rank_and_fit_all(tmp_path):
    x = np.arange(40.0)
    rng = np.random.default_rng(0)
    make = lambda b, m: 1.0 + m * x + b * (x > 19) + rng.normal(0, 0.01, 40)
    from cascade_forensics.rdd import HashtagSeries
    series = [HashtagSeries("down", x, make(-0.5, 0.0), 1), HashtagSeries("up", x, make(0.3, 0.0005), 1),
              HashtagSeries("mixed", x, make(0.3, -0.01), 1), HashtagSeries("flat", x, make(0.0, 0.0), 1),
              HashtagSeries("short", x[:3], x[:3], 1)]
    run = fit_all(series, 19)
    assert set(run.skipped) == {"short"}
    declining, increasing = rank_hashtags(run.fits)
    assert [r.hashtag for r in declining] == ["down"]
    assert [r.hashtag for r in increasing] == ["up"]
    write_fits(run.fits, tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().count("\n") == 5


def test_degree_one_preferred_on_linear_data():
    x, y = step_series(intercept=1.0, beta=-0.5, slope=0.01, sigma=0.2, seed=3).data
    d1, d2 = compare_degrees(x, y, 39)
    assert isinstance(d1, RddFit) and d2.degree == 2
    assert d2.rss <= d1.rss
