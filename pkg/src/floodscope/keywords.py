"""Revealed comparative advantage of N-grams across topics.

Topics play the part of countries and N-grams the part of products:

    RCA[t, i] = (f[t, i] / sum_k f[t, k]) / (sum_t f[t, i] / sum_t sum_k f[t, k])
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._io import write_csv, write_json
from .textprep import ngram_order

logger = logging.getLogger(__name__)


@dataclass
class TopicNgramProfile:
    """Per-topic N-gram frequencies as a dense (topics x ngrams) matrix."""

    topics: list
    ngrams: list
    freq: np.ndarray

    @classmethod
    def from_counts(cls, counts_by_topic, topics=None):
        topics = sorted(counts_by_topic) if topics is None else list(topics)
        ngrams = sorted({g for t in topics for g in counts_by_topic.get(t, {})})
        col = {g: j for j, g in enumerate(ngrams)}
        freq = np.zeros((len(topics), len(ngrams)), dtype=np.int64)
        for r, t in enumerate(topics):
            for g, c in counts_by_topic.get(t, {}).items():
                if c < 0:
                    raise ValueError(f"negative frequency for {g!r} in topic {t}")
                freq[r, col[g]] = c
        return cls(topics, ngrams, freq)

    def row(self, topic):
        r = self.topics.index(topic)
        return {g: int(c) for g, c in zip(self.ngrams, self.freq[r]) if c}


def topic_ngram_counts(token_docs, dominant, topics=None) -> TopicNgramProfile:
    """Sum each document's N-gram counts into its dominant topic.

    ``dominant`` maps doc_id -> topic; documents missing from it are
    skipped. ``topics`` lists the topics to include, so topics without
    documents still get an (empty) row.
    """
    counts = {} if topics is None else {t: Counter() for t in topics}
    for td in token_docs:
        if td.doc_id not in dominant:
            continue
        counts.setdefault(dominant[td.doc_id], Counter()).update(td.ngram_counts)
    return TopicNgramProfile.from_counts(counts, topics)


@dataclass
class RcaTable:
    topics: list  # topics with a defined row
    ngrams: list
    freq: np.ndarray
    rca: np.ndarray  # NaN where the N-gram never occurs
    diagnostics: list = field(default_factory=list)

    def value(self, topic, ngram):
        v = self.rca[self.topics.index(topic), self.ngrams.index(ngram)]
        return None if np.isnan(v) else float(v)

    def rows(self):
        """(topic, ngram, n, f_ti, rca) for every N-gram present in a topic."""
        for r, t in enumerate(self.topics):
            for j in np.flatnonzero(self.freq[r]):
                g = self.ngrams[j]
                yield t, g, ngram_order(g), int(self.freq[r, j]), float(self.rca[r, j])


def rca_scores(profile: TopicNgramProfile) -> RcaTable:
    freq = np.asarray(profile.freq, dtype=np.int64)
    if freq.sum() <= 0:
        raise ValueError("profile has no N-gram occurrences")
    topic_tot = freq.sum(axis=1)
    diagnostics = []
    keep = topic_tot > 0
    for t, ok in zip(profile.topics, keep):
        if not ok:
            msg = f"topic {t} has no N-grams; RCA row omitted"
            logger.warning(msg)
            diagnostics.append(msg)
    freq = freq[keep]
    topic_tot = topic_tot[keep].astype(np.float64)
    ngram_tot = freq.sum(axis=0).astype(np.float64)
    grand = float(freq.sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        rca = (freq / topic_tot[:, None]) / (ngram_tot / grand)[None, :]
    rca[:, ngram_tot == 0] = np.nan
    topics = [t for t, ok in zip(profile.topics, keep) if ok]
    return RcaTable(topics, list(profile.ngrams), freq, rca, diagnostics)


def rank_key(ngram, rca):
    return (-ngram_order(ngram), -rca, ngram)


def rank_keywords(table: RcaTable, top_k: int = 10, min_freq: int = 3):
    """Ranked keyword candidates per topic.

    Longer phrases first (5-grams down to unigrams), then higher RCA, then
    alphabetical. N-grams seen fewer than ``min_freq`` times in the topic
    are not candidates.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    ranked = {}
    for r, t in enumerate(table.topics):
        cands = [
            (table.ngrams[j], float(table.rca[r, j]), int(table.freq[r, j]))
            for j in np.flatnonzero(table.freq[r] >= max(min_freq, 1))
        ]
        cands.sort(key=lambda c: rank_key(c[0], c[1]))
        ranked[t] = [{"ngram": g, "n": ngram_order(g), "f_ti": f, "rca": v} for g, v, f in cands[:top_k]]
    return ranked


def write_keywords(table: RcaTable, ranked, out_dir):
    write_csv(out_dir / "rca.csv", ["topic", "ngram", "n", "f_ti", "rca"], table.rows())
    write_json(out_dir / "keywords.json", {str(t): v for t, v in ranked.items()})
