import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_forensics.synth import oracles
from cascade_forensics.synth.fixtures import blob_vectors
from cascade_forensics.synth.rng import make_rng
from cascade_forensics.topics import (EmbeddingFormatError, TopicModel, cluster_topics, embed_corpus, kmeans,
                                      load_embeddings, preprocess, select_k, summarize_topics, tfidf_top_words)

from conftest import table_from


def test_preprocess():
    assert preprocess("RT @bob: The BALLOTS are #fake!! https://t.co/x mail-in") == ["rt", "ballots", "mail"]


def test_embedding_file(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 3\nvote 1 0 0\nfraud 0 1 0\n")
    t = load_embeddings(p)
    assert t.dim == 3 and "vote" in t and len(t) == 2
    v, hits = t.mean_vector(["vote", "fraud", "nope"])
    assert hits == 2 and v.tolist() == [0.5, 0.5, 0.0]
    p.write_text("vote 1 0\nfraud 0 1 0\n")
    with pytest.raises(EmbeddingFormatError):
        load_embeddings(p)


def test_embed_corpus_excludes_oov():
    table = table_from({"vote": [1.0, 0.0], "mail": [0.0, 1.0]})
    c = embed_corpus([("a", "vote by mail"), ("b", "nothing known"), ("c", "vote")], table)
    assert c.ids == ["a", "c"] and c.excluded == ["b"]
    assert c.vectors.tolist() == [[0.5, 0.5], [1.0, 0.0]]


@pytest.mark.parametrize("seed", range(5))
def test_kmeans_inertia_monotone(seed):
    X = blob_vectors(k=4, seed=seed, spread=1.5, separation=2.0).data
    res = kmeans(X, 4, make_rng(seed))
    assert all(b <= a + 1e-9 for a, b in zip(res.history, res.history[1:]))
    assert res.inertia == res.history[-1]
    assert res.inertia == pytest.approx(((X - res.centroids[res.labels]) ** 2).sum())


def test_kmeans_rejects_too_few_points():
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 2)), 3, make_rng(0))


@pytest.mark.parametrize("k", [3, 5])
def test_planted_k_recovered(k):
    fx = blob_vectors(k=k, seed=11)
    model = cluster_topics(fx.data, 2, 8, seed=0, restarts=3)
    assert model.k == k
    assert len({(a, b) for a, b in zip(model.labels, fx.truth["labels"])}) == k


def test_select_k_tie_goes_to_smaller():
    diags = [{"k": 2, "silhouette": 0.5, "davies_bouldin": 1.0}, {"k": 3, "silhouette": 0.5, "davies_bouldin": 1.0}]
    assert select_k(diags) == 2


def test_tfidf_worked_example():
    docs = {0: ["ballot", "ballot", "fraud", "vote"], 1: ["vote", "mask", "mask"], 2: ["vote", "wall"]}
    out = tfidf_top_words(docs, 2)
    assert [w for w, _ in out[0]] == ["ballot", "fraud"]
    assert out[0][0][1] == pytest.approx(2 * np.log(3))
    assert all(w != "vote" for ws in out.values() for w, _ in ws)


words = st.sampled_from(["a", "b", "c", "d", "e", "f"])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(words, min_size=1, max_size=12), min_size=1, max_size=6), st.integers(1, 6))
def test_tfidf_matches_bruteforce(docs, top):
    docs = dict(enumerate(docs))
    got = tfidf_top_words(docs, top)
    want = oracles.tfidf(docs, top)
    assert [[w for w, _ in got[c]] for c in docs] == [[w for w, _ in want[c]] for c in docs]
    for c in docs:
        np.testing.assert_allclose([s for _, s in got[c]], [s for _, s in want[c]], rtol=1e-12)


def test_summaries_with_curation():
    table = table_from({"vote": [1.0, 0.0], "mail": [0.9, 0.1], "wall": [0.0, 1.0], "border": [0.1, 0.9],
                        "mask": [-1.0, 0.0]})
    texts = [("1", "vote mail"), ("2", "vote"), ("3", "wall border"), ("4", "border"), ("5", "mask")]
    corpus = embed_corpus(texts, table)
    model = TopicModel(3, np.zeros((3, 2)), np.array([0, 0, 1, 1, 2]))
    out = summarize_topics(model, corpus, top_words=3, top_tweets=1, discard=[2])
    assert [s.cluster_id for s in out] == [0, 1]
    assert out[0].representatives in (["1"], ["2"])
    merged = summarize_topics(model, corpus, merge=[[0, 1]])
    assert [(s.cluster_id, s.size) for s in merged] == [(0, 4), (2, 1)]
