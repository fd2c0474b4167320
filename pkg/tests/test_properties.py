"""Property tests for the module invariants (1000 generated cases each)."""

import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from floodscope.corpus import Tweet, load_tweets
from floodscope.embed import EmbeddingCache, EmbeddingMatrix, local_embed
from floodscope.keywords import TopicNgramProfile, rca_scores
from floodscope.relevance import (
    LAMBDA_GRID,
    BoxCoxParams,
    RelevanceScore,
    boxcox_transform_scale,
    decile_partition,
    relevance_index,
    select_reference_core,
    similarity_vector,
)
from floodscope.report import geo_aggregate, ngram_density_report, topic_timeline
from floodscope.textprep import BowDoc, clean_text, extract_ngrams, make_token_doc
from floodscope.topics import LdaConfig, fit_lda

N = 1000
many = settings(max_examples=N, deadline=None, suppress_health_check=[HealthCheck.too_slow])

raw_text = st.lists(
    st.sampled_from(list("abcXYZ éßℂ.!#@:/w0123 \t\n") + ["http://", "www.", "@ab", "#c", "🌊"]),
    max_size=40,
).map("".join) | st.text(max_size=40)
words = st.lists(st.sampled_from(["flood", "rain", "river", "home", "the", "help"]), min_size=0, max_size=8)


@st.composite
def bow_corpora(draw):
    V = draw(st.integers(1, 8))
    n_docs = draw(st.integers(1, 6))
    docs = []
    for d in range(n_docs):
        toks = draw(st.lists(st.integers(0, V - 1), min_size=1, max_size=12))
        idx, cnt = np.unique(toks, return_counts=True)
        docs.append(BowDoc(f"d{d}", idx, cnt))
    K = draw(st.integers(1, 4))
    iters = draw(st.integers(2, 6))
    cfg = LdaConfig(K, alpha=draw(st.sampled_from([None, 0.1, 1.0])), beta=0.05, iterations=iters,
                    burn_in=draw(st.integers(0, iters - 1)), seed=draw(st.integers(0, 2**32)))
    return docs, V, cfg


@st.composite
def profiles(draw):
    T = draw(st.integers(1, 5))
    G = draw(st.integers(1, 50))
    freq = draw(hnp.arrays(np.int64, (T, G), elements=st.integers(0, 40)))
    if freq.sum() == 0:
        freq[0, 0] = 1
    return TopicNgramProfile(list(range(T)), [f"g{j:02d}" for j in range(G)], freq)


# corpus


@many
@given(st.lists(st.one_of(st.just("bad"), st.just("good"), st.just("blank")), max_size=12))
def test_loaded_plus_skipped_is_record_count(tmp_path_factory, kinds):
    path = tmp_path_factory.mktemp("load") / "t.jsonl"
    lines = []
    for i, k in enumerate(kinds):
        if k == "good":
            lines.append(json.dumps({"id": f"t{i}", "created_at": "2022-03-01T00:00:00Z", "user_id": "u", "text": "x"}))
        elif k == "bad":
            lines.append('{"id": 1}')
        else:
            lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")
    tweets, diags = load_tweets(path)
    assert len(tweets) + len(diags) == sum(k != "blank" for k in kinds)


# preprocessing


@many
@given(raw_text)
def test_clean_text_is_idempotent(text):
    once = clean_text(text)
    assert clean_text(once) == once


@many
@given(raw_text)
def test_clean_text_alphabet(text):
    out = clean_text(text)
    assert all(c in ". " or (c.isalpha() and not c.isupper()) for c in out)
    assert out == out.strip() and "  " not in out


@many
@given(raw_text)
def test_ngrams_reconstructable_from_sentences(text):
    td = make_token_doc("x", clean_text(text), frozenset({"the"}))
    assert extract_ngrams(td.sentences) == td.ngram_counts
    L = [len(s) for s in td.sentences]
    assert td.total_ngrams() == sum(max(0, l - n + 1) for l in L for n in range(1, 6))


# topics


@many
@given(bow_corpora())
def test_gibbs_conservation_and_normalization(case):
    docs, V, cfg = case
    lengths = np.array([d.length for d in sorted(docs, key=lambda d: d.doc_id)])
    totals = np.zeros(V, dtype=np.int64)
    for d in docs:
        totals[d.indices] += d.counts

    def check(sweep, n_dk, n_kw):
        assert n_kw.sum() == lengths.sum()
        np.testing.assert_array_equal(n_kw.sum(axis=0), totals)
        np.testing.assert_array_equal(n_dk.sum(axis=1), lengths)

    m = fit_lda(docs, cfg, n_words=V, on_sweep=check)
    np.testing.assert_allclose(m.phi.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(m.theta.sum(axis=1), 1.0, atol=1e-12)


@many
@given(bow_corpora(), st.randoms(use_true_random=False))
def test_gibbs_exchangeable_and_seeded(case, rnd):
    docs, V, cfg = case
    perm = list(range(len(docs)))
    rnd.shuffle(perm)
    a = fit_lda(docs, cfg, n_words=V)
    b = fit_lda([docs[i] for i in perm], cfg, n_words=V)
    np.testing.assert_array_equal(a.theta[perm], b.theta)
    np.testing.assert_array_equal(a.phi, b.phi)
    for j, i in enumerate(perm):
        np.testing.assert_array_equal(a.assignments[i], b.assignments[j])


# keywords


@many
@given(profiles(), st.integers(1, 1000))
def test_rca_scale_invariance(profile, c):
    a = rca_scores(profile)
    b = rca_scores(TopicNgramProfile(profile.topics, profile.ngrams, profile.freq * c))
    np.testing.assert_allclose(b.rca, a.rca, rtol=1e-12, equal_nan=True)


@many
@given(profiles())
def test_rca_weighted_mean_is_one(profile):
    table = rca_scores(profile)
    f = table.freq.astype(float)
    topic_share = f.sum(axis=1) / f.sum()
    seen = f.sum(axis=0) > 0
    np.testing.assert_allclose((topic_share[:, None] * table.rca).sum(axis=0)[seen], 1.0, atol=1e-9)


@many
@given(profiles())
def test_rca_matches_scalar_formula(profile):
    table = rca_scores(profile)
    f = table.freq
    grand = int(f.sum())
    for r in range(f.shape[0]):
        row = int(f[r].sum())
        for j in range(f.shape[1]):
            col = int(f[:, j].sum())
            if col == 0:
                assert np.isnan(table.rca[r, j])
            else:
                assert abs(table.rca[r, j] - (f[r, j] / row) / (col / grand)) <= 1e-12


# embeddings


@many
@given(st.text(max_size=40), st.sampled_from([16, 64, 256]), st.integers(0, 2**63))
def test_local_embed_pure_and_unit(text, d, seed):
    v = local_embed(text, d, seed)
    np.testing.assert_array_equal(v, local_embed(text, d, seed))
    n = float(np.linalg.norm(v))
    assert n == 0.0 or abs(n - 1.0) < 1e-6


@many
@given(st.lists(st.tuples(st.text(max_size=10), hnp.arrays(np.float32, 5, elements=st.floats(width=32))),
                max_size=6))
def test_cache_round_trip_is_bit_exact(tmp_path_factory, items):
    path = tmp_path_factory.mktemp("cache") / "c.bin"
    EmbeddingCache(path).put_many(items, "b")
    loaded = EmbeddingCache(path)
    for text, vec in dict(items).items():
        assert loaded.get(text, "b").tobytes() == np.asarray(vec, np.float32).tobytes()


# relevance


@many
@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 100), st.integers(2, 64)),
                  elements=st.floats(-1, 1)), st.data())
def test_similarity_matches_scalar_cosine(R, data):
    R = R[np.linalg.norm(R, axis=1) > 1e-3]
    if R.shape[0] < 2:
        return
    v = data.draw(hnp.arrays(np.float64, R.shape[1], elements=st.floats(-1, 1)))
    if np.linalg.norm(v) < 1e-3:
        return
    ref = select_reference_core(EmbeddingMatrix([f"r{i}" for i in range(len(R))], R.astype(np.float32), "b"), 1.0)
    got = similarity_vector(v, ref)
    for i, r in enumerate(ref.matrix):
        cos = sum(a * b for a, b in zip(v, r)) / (np.sqrt(sum(a * a for a in v)) * np.sqrt(sum(b * b for b in r)))
        assert abs(got[i] - cos) <= 1e-6


@many
@given(st.sampled_from(list(LAMBDA_GRID)), st.lists(st.floats(-0.5, 1.5), min_size=2, max_size=30))
def test_transform_monotone_and_positive(lam, s):
    s = np.sort(np.asarray(s))
    y = boxcox_transform_scale(s, BoxCoxParams(lam))
    assert np.all(y > 0)
    assert np.all(np.diff(y) >= 0)
    inner = np.clip(s, 1e-4, 1 - 1e-4)
    strict = np.diff(inner) > 0
    assert np.all(np.diff(y)[strict] > 0)


@many
@given(st.integers(0, 2**32), st.sampled_from([-2.0, -0.5, 0.0, 0.7, 3.0]))
def test_shared_lambda_ranking_follows_median_similarity(seed, lam):
    rng = np.random.default_rng(seed)
    d, n_ref = 8, 2 * int(rng.integers(1, 10)) + 1  # odd, so the median is a single row
    ref = select_reference_core(EmbeddingMatrix([f"r{i}" for i in range(n_ref)],
                                                rng.standard_normal((n_ref, d)).astype(np.float32), "b"), 1.0)
    posts = rng.standard_normal((12, d))
    idx = [relevance_index(p, ref, lam=lam).index for p in posts]
    med = [float(np.median(np.clip(similarity_vector(p, ref), 1e-4, 1 - 1e-4))) for p in posts]
    for i in range(12):
        for j in range(12):
            if med[i] < med[j]:
                assert idx[i] <= idx[j]


@many
@given(st.lists(st.floats(-5, 5), min_size=10, max_size=60))
def test_decile_partition_is_balanced(values):
    part = decile_partition([RelevanceScore(f"t{i:03d}", v, 0.0) for i, v in enumerate(values)])
    counts = np.bincount(list(part.deciles.values()), minlength=11)[1:]
    assert counts.sum() == len(values) and counts.max() - counts.min() <= 1
    ranked_idx = [values[int(t[1:])] for t in part.ranked]
    assert ranked_idx == sorted(ranked_idx, reverse=True)


# reports


@many
@given(st.lists(words, min_size=2, max_size=30), st.data())
def test_histogram_mass_is_one(texts, data):
    docs = [make_token_doc(f"d{i:02d}", " ".join(t)) for i, t in enumerate(texts)]
    split = data.draw(st.integers(1, len(docs) - 1))
    bins = data.draw(st.sampled_from(["fd", "auto", 3, 10]))
    rep = ngram_density_report(docs, [d.doc_id for d in docs[:split]], [d.doc_id for d in docs[split:]], bins=bins)
    for g in ("top", "bottom"):
        assert abs(rep.mass(g) - 1.0) < 1e-9


UTC = dt.timezone.utc


@many
@given(st.lists(st.tuples(st.integers(0, 40), st.one_of(st.none(), st.integers(0, 4)),
                          st.one_of(st.none(), st.tuples(st.floats(-90, 90), st.floats(-180, 180)))),
                max_size=40), st.booleans())
def test_timeline_and_geo_conservation(rows, zero_fill):
    tweets = [Tweet(f"t{i}", dt.datetime(2022, 3, 1, tzinfo=UTC) + dt.timedelta(hours=h), "u", "x", geo)
              for i, (h, _, geo) in enumerate(rows)]
    dom = {f"t{i}": k for i, (_, k, _) in enumerate(rows) if k is not None}
    tl = topic_timeline(tweets, dom, zero_fill=zero_fill)
    assert sum(tl.totals.values()) == len(dom)
    assert sum(c for *_, c in tl.rows()) == len(dom)
    geo = geo_aggregate(tweets, dom, mode="grid")
    assert sum(b.total for b in geo.bins) + geo.excluded == len(tweets)
