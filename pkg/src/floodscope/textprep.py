"""Text cleaning, sentence-scoped tokenization, N-grams and bag-of-words."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import PrepError

MAX_TOKEN_LEN = 17
MAX_NGRAM = 5

_URL = re.compile(r"(?<![^\W\d_])(?:https?://|www\.)\S*")
_MENTION = re.compile(r"@\w+")
_DIGIT = re.compile(r"\d")
_SPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class CleanDoc:
    doc_id: str
    cleaned_text: str


@dataclass(frozen=True)
class TokenDoc:
    doc_id: str
    sentences: tuple[tuple[str, ...], ...]
    ngram_counts: dict = field(compare=True)

    @property
    def n_tokens(self):
        return sum(len(s) for s in self.sentences)

    def total_ngrams(self):
        return sum(self.ngram_counts.values())

    def distinct_ngrams(self):
        return len(self.ngram_counts)


def _clean_once(text):
    text = text.lower()
    text = _URL.sub("", text)
    text = _MENTION.sub("", text)
    text = text.replace("#", "")
    text = _DIGIT.sub("", text)
    # letters with no lowercase form (e.g. U+2102) count as symbols
    text = "".join(c for c in text if (c.isalpha() and not c.isupper()) or c.isspace() or c == ".")
    return _SPACE.sub(" ", text).strip()


def clean_text(raw: str) -> str:
    """Lowercase and strip URLs, mentions, '#', digits and all symbols but '.'.

    The pass is repeated until the output stops changing: deleting a symbol
    can glue fragments into something a rule matches (``w!ww.x``), and a
    fixpoint keeps cleaning idempotent. Each pass only deletes characters,
    so this terminates.
    """
    out = _clean_once(raw)
    while True:
        again = _clean_once(out)
        if again == out:
            return out
        out = again


def clean_doc(doc_id, raw):
    return CleanDoc(doc_id, clean_text(raw))


def load_stopwords(path=None):
    """Read a stopword file (one term per line, '#' starts a comment).

    With no path the bundled English list is used.
    """
    if path is None:
        text = resources.files("floodscope").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.add(line.lower())
    return frozenset(words)


def tokenize_document(cleaned: str, stopwords=frozenset(), max_len=MAX_TOKEN_LEN):
    """Split cleaned text into sentences of tokens.

    Sentences break on '.', tokens on spaces. Stopwords, tokens longer than
    ``max_len`` characters and sentences left empty are dropped.
    """
    sentences = []
    for chunk in cleaned.split("."):
        toks = [t for t in chunk.split() if t not in stopwords and len(t) <= max_len]
        if toks:
            sentences.append(tuple(toks))
    return tuple(sentences)


def extract_ngrams(sentences, max_n: int = MAX_NGRAM) -> dict:
    """Count every contiguous within-sentence N-gram for N = 1..max_n."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    counts = Counter()
    for sent in sentences:
        for n in range(1, min(max_n, len(sent)) + 1):
            for i in range(len(sent) - n + 1):
                counts[" ".join(sent[i : i + n])] += 1
    return dict(sorted(counts.items()))


def make_token_doc(doc_id, cleaned, stopwords=frozenset(), max_n=MAX_NGRAM):
    sentences = tokenize_document(cleaned, stopwords)
    return TokenDoc(doc_id, sentences, extract_ngrams(sentences, max_n))


def ngram_order(ngram):
    return ngram.count(" ") + 1


class Vocabulary:
    """Term <-> index bijection with document frequencies."""

    def __init__(self, terms, df, n_docs):
        self.terms = list(terms)
        self.index = {t: i for i, t in enumerate(self.terms)}
        self.df = np.asarray(df, dtype=np.int64)
        self.n_docs = int(n_docs)
        if len(self.index) != len(self.terms):
            raise ValueError("duplicate terms in vocabulary")
        if len(self.df) != len(self.terms):
            raise ValueError("df length does not match terms")

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.index

    def to_dict(self):
        return {"terms": self.terms, "df": self.df.tolist(), "n_docs": self.n_docs}

    @classmethod
    def from_dict(cls, d):
        return cls(d["terms"], d["df"], d["n_docs"])


@dataclass(frozen=True)
class BowDoc:
    doc_id: str
    indices: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        cnt = np.asarray(self.counts, dtype=np.int64)
        if idx.shape != cnt.shape:
            raise ValueError("indices and counts differ in length")
        if len(idx) > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing")
        if np.any(cnt <= 0):
            raise ValueError("counts must be positive")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "counts", cnt)

    @property
    def length(self):
        return int(self.counts.sum())

    def to_dict(self):
        return {"doc_id": self.doc_id, "indices": self.indices.tolist(), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["doc_id"], d["indices"], d["counts"])


@dataclass
class PrepReport:
    docs_in: int
    docs_out: int
    dropped_empty: int
    vocab_size: int
    dropped_ids: list = field(default_factory=list)

    def to_dict(self):
        return {
            "docs_in": self.docs_in,
            "docs_out": self.docs_out,
            "dropped_empty": self.dropped_empty,
            "vocab_size": self.vocab_size,
        }


def build_bow(token_docs, min_df: int = 5, max_df_frac: float = 0.5):
    """Build a unigram vocabulary and per-document sparse counts.

    Terms are kept when ``min_df <= df <= max_df_frac * D``. Documents that
    lose every term are dropped and listed in the returned report.

    Returns ``(vocabulary, bow_docs, report)``.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    if not 0 < max_df_frac <= 1:
        raise ValueError("max_df_frac must lie in (0, 1]")
    token_docs = list(token_docs)
    n_docs = len(token_docs)
    unigram_counts = [Counter(tok for sent in td.sentences for tok in sent) for td in token_docs]
    df = Counter()
    for c in unigram_counts:
        df.update(c.keys())
    max_df = max_df_frac * n_docs
    terms = sorted(t for t, f in df.items() if min_df <= f <= max_df)
    if not terms:
        raise PrepError(
            f"empty vocabulary after df filtering (min_df={min_df}, max_df_frac={max_df_frac}, docs={n_docs})"
        )
    vocab = Vocabulary(terms, [df[t] for t in terms], n_docs)

    bows, dropped = [], []
    for td, c in zip(token_docs, unigram_counts):
        pairs = sorted((vocab.index[t], n) for t, n in c.items() if t in vocab.index)
        if not pairs:
            dropped.append(td.doc_id)
            continue
        idx, cnt = zip(*pairs)
        bows.append(BowDoc(td.doc_id, np.array(idx), np.array(cnt)))
    report = PrepReport(n_docs, len(bows), len(dropped), len(vocab), dropped)
    return vocab, bows, report
