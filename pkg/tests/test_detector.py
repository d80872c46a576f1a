import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_forensics.cascades import Label, make_cascade
from cascade_forensics.detector import (DetectorConfig, TrainingDiverged, build_user_vectors, cross_validate,
                                        featurize, gradient_check, load_model, make_batch, margin_decisions,
                                        prepare, save_model, select_threshold, stratified_folds, train)
from cascade_forensics.detector.evaluation import predict, threshold_candidates
from cascade_forensics.detector.features import N_EXTRA, feature_names
from cascade_forensics.detector.training import init_model
from cascade_forensics.synth import oracles
from cascade_forensics.synth.rng import make_rng

from conftest import random_items, rec, shuffle_labels, table_from

SMALL = DetectorConfig(hidden=4, user_dim=3, epochs=3, learning_rate=0.01, batch_size=4)


def small_model(seed, **kw):
    rng = make_rng(seed, 0)
    items = random_items(rng, **kw)
    uv = build_user_vectors([it.accounts for it in items], 3)
    return init_model(items, uv, DetectorConfig(hidden=4, user_dim=uv.dim, seed=seed)), items, uv


def test_featurize_layout():
    table = table_from({"vote": [1.0, 0.0], "fraud": [0.0, 1.0]})
    c = make_cascade([rec("1", "a", 0, text="vote fraud", followers=9, created=-86400),
                      rec("2", "b", 7200, "Retweet", "1", "a", text="nothing here")], Label.UNRELIABLE)
    X = featurize(c, table)
    assert X.shape == (2, 2 + N_EXTRA) and len(feature_names(2)) == X.shape[1]
    assert X[0, :2].tolist() == [0.5, 0.5]
    assert X[1, 2] == 2.0 and X[1, 3] == 2.0
    assert X[0, 4] == 1.0 and X[1, 6] == 1.0
    assert X[0, 8] == math.log1p(9) and X[0, 10] == 1.0
    p = prepare(c, table, max_events=1)
    assert p.truncated and p.features.shape[0] == 1 and p.label == 1


def test_user_vectors_match_dense_oracle():
    rng = make_rng(3, 0)
    sets = [sorted({f"a{int(x)}" for x in rng.integers(15, size=5)}) for _ in range(30)]
    uv = build_user_vectors(sets, 4)
    accounts, want, sv = oracles.user_vectors(sets, 4)
    assert uv.accounts == accounts
    np.testing.assert_allclose(uv.singular_values, sv, rtol=1e-9)
    np.testing.assert_allclose(uv.vectors, want, atol=1e-9)
    assert uv.lookup(["nobody"]).tolist() == [[0.0] * 4]


def test_user_vector_rank_truncation_warns():
    with pytest.warns(UserWarning):
        uv = build_user_vectors([["a"], ["a"], ["b"]], 5)
    assert uv.dim == 2


@pytest.mark.parametrize("seed", range(3))
def test_gradient_check(seed):
    model, items, uv = small_model(seed)
    assert gradient_check(model, make_batch(items, uv), n_coords=150) < 1e-5


def test_gradient_check_catches_wrong_gradient():
    model, items, uv = small_model(0)

    def broken(m, b):
        loss, g = m.loss_and_grad(b)
        g = dict(g, bn=g["bn"] + 0.1)
        return loss, g

    assert gradient_check(model, make_batch(items, uv), n_coords=10_000, grad_fn=broken) > 1e-2


def test_threshold_examples():
    assert select_threshold([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == (0.5, 1.0)
    assert threshold_candidates(np.array([0.5])).tolist() == [0.25, 0.75]
    with pytest.raises(ValueError):
        select_threshold([0.1, 0.2], [1, 1])
    # 0.15 and 0.35 give the same g-mean exactly; the smaller threshold wins
    t, g = select_threshold([0.1, 0.2, 0.3, 0.4], [0, 1, 0, 1])
    assert t == pytest.approx(0.15) and g == pytest.approx(math.sqrt(0.5))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 1)), min_size=2, max_size=40))
def test_threshold_matches_scan(pairs):
    scores = [s / 20 for s, _ in pairs]
    labels = [y for _, y in pairs]
    if len(set(labels)) < 2:
        return
    t, g = select_threshold(scores, labels)
    t2, g2 = oracles.threshold_scan(scores, labels)
    assert t == t2 and math.isclose(g, g2, rel_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=1, max_size=30), st.integers(0, 10), st.sampled_from([0.3, 0.5, 0.8, 1.0]))
def test_margins_match_oracle(raw, theta, q):
    ids = [f"c{i:02d}" for i in range(len(raw))]
    scores = np.array(raw) / 10
    got = {p.cascade_id: p.decision for p in margin_decisions(ids, scores, theta / 10, q)}
    assert got == oracles.margin_split(ids, scores.tolist(), theta / 10, q)


def test_margin_zero_is_positive_side():
    preds = margin_decisions(["a", "b"], np.array([0.5, 0.2]), 0.5, 1.0)
    assert [p.decision for p in preds] == ["Unreliable", "Reliable"]


def test_stratified_folds_partition():
    y = [0] * 7 + [1] * 5
    folds = stratified_folds(y, 5, seed=1)
    assert sorted(np.concatenate(folds).tolist()) == list(range(12))
    assert all(1 <= len(f) <= 3 for f in folds)
    with pytest.raises(ValueError):
        stratified_folds([0, 0, 1], 2, 0)


def test_training_is_deterministic_and_reduces_loss():
    items = random_items(make_rng(5, 0), n=16)
    uv = build_user_vectors([it.accounts for it in items], 3)
    a = train(items, uv, SMALL)
    b = train(items, uv, SMALL)
    assert a.history == b.history
    assert a.history[-1] < a.history[0]
    order = [[list(range(16))]] * 2
    c = train(items, uv, SMALL, batch_order=order)
    assert len(c.history) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_rejects_bad_inputs():
    items = random_items(make_rng(0, 0), n=4)
    uv = build_user_vectors([it.accounts for it in items], 2)
    with pytest.raises(ValueError):
        train([it for it in items if it.label == 1], uv, SMALL)
    with pytest.raises(TrainingDiverged):
        train(items, uv, DetectorConfig(hidden=4, user_dim=2, epochs=2, learning_rate=1e300))


def test_checkpoint_roundtrip(tmp_path):
    items = random_items(make_rng(2, 0), n=8)
    uv = build_user_vectors([it.accounts for it in items], 3)
    m = train(items, uv, SMALL)
    m.threshold = 0.37
    save_model(m, tmp_path / "m.txt")
    back = load_model(tmp_path / "m.txt")
    assert back.threshold == 0.37
    np.testing.assert_array_equal(predict(back, items), predict(m, items))
    save_model(back, tmp_path / "m2.txt")
    assert (tmp_path / "m.txt").read_bytes() == (tmp_path / "m2.txt").read_bytes()


def test_cross_validation_on_planted_signal(planted):
    items, _ = planted
    cfg = DetectorConfig(hidden=8, user_dim=6, epochs=4, learning_rate=0.01)
    reports, models = cross_validate(items[:200], folds=2, config=cfg)
    assert len(reports) == 2 and all(m.threshold is not None for m in models)
    assert np.mean([r.auc for r in reports]) > 0.8
    assert shuffle_labels(items[:10], 0) != items[:10]
