import datetime as dt

import numpy as np
import pytest

from floodscope.corpus import Submission, Tweet
from floodscope.embed import EmbeddingMatrix
from floodscope.errors import ReportError
from floodscope.report import (
    ecdf_rank,
    geo_aggregate,
    grid_key,
    harmonic_mean,
    ngram_density_report,
    pca_projection,
    term_association,
    topic_timeline,
    write_density,
    write_geo,
    write_projection,
    write_term_association,
    write_timeline,
)
from floodscope.textprep import make_token_doc

UTC = dt.timezone.utc


def _docs(texts):
    return [make_token_doc(f"d{i}", t) for i, t in enumerate(texts)]


def test_density_mass_and_shared_edges():
    docs = _docs(["a b c d e. f g"] * 3 + ["a"] * 4 + ["a b c"] * 5)
    rep = ngram_density_report(docs, ["d0", "d1", "d2", "d8"], ["d3", "d4", "d5", "d6", "d7"])
    assert rep.mass("top") == pytest.approx(1.0) and rep.mass("bottom") == pytest.approx(1.0)
    assert rep.summary("bottom") == {"mean": 2.0, "median": 1.0, "n": 5}
    assert len(list(rep.rows())) == 2 * (len(rep.edges) - 1)


def test_density_distinct_statistic():
    docs = _docs(["rain rain", "sun"])
    rep = ngram_density_report(docs, ["d0"], ["d1"], bins=2, statistic="distinct")
    assert rep.values["top"].tolist() == [2.0]  # rain, rain rain


def test_density_errors():
    docs = _docs(["a", "b"])
    with pytest.raises(ReportError):
        ngram_density_report(docs, [], ["d1"])
    with pytest.raises(ReportError):
        ngram_density_report(docs, ["d0"], ["d0"])
    with pytest.raises(ReportError):
        ngram_density_report(docs, ["d0"], ["zz"])


def test_ecdf_and_harmonic_mean():
    assert ecdf_rank([3, 1, 2, 2]).tolist() == [1.0, 0.25, 0.75, 0.75]
    assert harmonic_mean([0.5, 0.0], [1.0, 0.0]).tolist() == [pytest.approx(2 / 3), 0.0]


def test_term_association_direction():
    docs = _docs(["flood flood water", "flood rescue", "pizza coffee", "pizza water"])
    ta = term_association(docs, ["d0", "d1"], ["d2", "d3"])
    assert ta.terms == ["coffee", "flood", "pizza", "rescue", "water"]
    assert ta.top(1) == ["flood"]
    assert ta.top(1, side="irrelevant") == ["pizza"]
    assert ta.alpha == pytest.approx(0.01 * 9 / 5)
    i = ta.terms.index("water")
    assert ta.precision[i] == pytest.approx(0.5)


def test_term_association_errors():
    docs = _docs(["a", "b"])
    with pytest.raises(ReportError):
        term_association(docs, ["d0"], ["d0"])
    with pytest.raises(ReportError):
        term_association(docs, [], ["d1"])


def _tw(i, day, geo=None):
    return Tweet(f"t{i}", dt.datetime(2022, 3, day, 23, 59, tzinfo=UTC), "u", "x", geo)


def test_timeline_counts_and_conservation():
    tweets = [_tw(1, 1), _tw(2, 1), _tw(3, 3), _tw(4, 3)]
    dom = {"t1": 0, "t2": 1, "t3": 0}
    tl = topic_timeline(tweets, dom)
    assert list(tl.rows()) == [("2022-03-01", 0, 1), ("2022-03-01", 1, 1), ("2022-03-03", 0, 1)]
    assert sum(tl.totals.values()) == len(dom)
    filled = topic_timeline(tweets, dom, zero_fill=True, topics=[0, 1])
    assert len(list(filled.rows())) == 3 * 2
    assert sum(c for *_, c in filled.rows()) == 3


def test_grid_key_rounds_half_up():
    assert grid_key(-28.85, 153.25) == (-28.9, 153.3)
    assert grid_key(0.05, -0.05) == (0.1, -0.1)


def test_geo_grid_and_postcode():
    tweets = [_tw(1, 1, (-28.81, 153.28)), _tw(2, 1, (-28.84, 153.31)), _tw(3, 1)]
    agg = geo_aggregate(tweets, {"t1": 0, "t2": 2, "t3": 0}, mode="grid")
    assert list(agg.rows()) == [("-28.8,153.3", 0, 1), ("-28.8,153.3", 2, 1)]
    assert agg.excluded == 1
    subs = [
        Submission("s1", dt.date(2022, 5, 1), "resident", "x", "2480"),
        Submission("s2", dt.date(2022, 5, 1), "resident", "x", None),
    ]
    agg = geo_aggregate(subs, {"s1": 1, "s2": 1}, mode="postcode")
    assert list(agg.rows()) == [("2480", 1, 1)] and agg.excluded == 1
    with pytest.raises(ValueError):
        geo_aggregate(subs, {}, mode="state")


def test_pca_matches_covariance_eigenvectors():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 5)) * np.array([5.0, 2.0, 1.0, 0.5, 0.1])
    proj = pca_projection(EmbeddingMatrix([f"d{i}" for i in range(50)], X.astype(np.float32), "b"))
    Xc = X.astype(np.float32).astype(np.float64)
    Xc -= Xc.mean(axis=0)
    w, v = np.linalg.eigh(Xc.T @ Xc / 50)
    np.testing.assert_allclose(proj.explained_variance, w[::-1][:2], rtol=1e-9)
    for j in range(2):
        d = v[:, -1 - j]
        d = d if d[np.argmax(np.abs(d))] > 0 else -d
        np.testing.assert_allclose(proj.coords[:, j], Xc @ d, atol=1e-9)


def test_pca_degenerate_inputs():
    with pytest.raises(ReportError):
        pca_projection(EmbeddingMatrix(["a"], np.ones((1, 3), dtype=np.float32), "b"))
    flat = pca_projection(EmbeddingMatrix(["a", "b"], np.ones((2, 3), dtype=np.float32), "b"))
    assert not flat.coords.any() and flat.diagnostics


def test_writers(tmp_path):
    docs = _docs(["a b", "c", "d e f", "g"])
    write_density(ngram_density_report(docs, ["d0", "d2"], ["d1", "d3"]), tmp_path / "d.csv")
    write_term_association(term_association(docs, ["d0"], ["d1"]), tmp_path / "t.csv")
    write_timeline(topic_timeline([_tw(1, 1)], {"t1": 0}), tmp_path / "tl.csv")
    write_geo(geo_aggregate([_tw(1, 1, (1.0, 2.0))], {"t1": 0}), tmp_path / "g.csv")
    proj = pca_projection(EmbeddingMatrix(["a", "b", "c"], np.eye(3, dtype=np.float32), "b"))
    write_projection(proj, {"a": "tweet", "b": "tweet", "c": "submission"}, tmp_path / "p.csv")
    assert (tmp_path / "d.csv").read_bytes().startswith(b"group,bin_lo,bin_hi,density\r\n")
    assert (tmp_path / "tl.csv").read_text().splitlines() == ["date,topic,count", "2022-03-01,0,1"]
    assert (tmp_path / "g.csv").read_text().splitlines()[1] == '"1.0,2.0",0,1'
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "doc_id,kind,x,y"
