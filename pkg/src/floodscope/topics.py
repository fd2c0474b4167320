"""LDA by collapsed Gibbs sampling, U_Mass coherence and topic-count selection.

Randomness: every document owns a PCG64 stream seeded from
``SeedSequence(seed, spawn_key=(h(doc_id),))`` where ``h`` is the first 8
bytes of SHA-256 of the id. Initial assignments and the per-token uniforms
of every sweep come from the document's own stream, and documents are swept
in doc_id order, so a fitted model depends only on (documents, config, seed)
and not on the order in which documents were passed in.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._io import fmt_float, write_csv, write_json
from .errors import TopicModelError

logger = logging.getLogger(__name__)

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

# uniforms are drawn this many sweeps at a time; results do not depend on it
_DRAW_BLOCK = 32


@dataclass(frozen=True)
class LdaConfig:
    K: int
    alpha: float | None = None  # None -> 50 / K, re-derived when K changes
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not self.alpha_value > 0 or not self.beta > 0:
            raise ValueError("alpha and beta must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        object.__setattr__(self, "seed", int(self.seed) % (1 << 64))

    @property
    def alpha_value(self):
        return 50.0 / self.K if self.alpha is None else float(self.alpha)

    def with_k(self, K):
        return replace(self, K=K)

    def to_dict(self):
        return {
            "K": self.K,
            "alpha": self.alpha_value,
            "beta": self.beta,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "seed": self.seed,
        }


@dataclass
class LdaModel:
    phi: np.ndarray  # K x V
    theta: np.ndarray  # D x K, rows in the order documents were passed in
    assignments: list  # per document, topic id of each token
    config: LdaConfig
    doc_ids: list

    @property
    def K(self):
        return self.phi.shape[0]

    def top_words(self, m=10):
        """Indices of the m most probable words per topic (ties -> lower index)."""
        return [np.argsort(-row, kind="stable")[:m] for row in self.phi]


@njit(cache=True, nogil=True)
def _gibbs_sweep(doc_ptr, words, z, n_dk, n_kw, n_k, u, alpha, beta, vbeta):
    K = n_k.shape[0]
    p = np.empty(K)
    for d in range(doc_ptr.shape[0] - 1):
        for i in range(doc_ptr[d], doc_ptr[d + 1]):
            w = words[i]
            k = z[i]
            n_dk[d, k] -= 1
            n_kw[k, w] -= 1
            n_k[k] -= 1
            total = 0.0
            for j in range(K):
                total += (n_dk[d, j] + alpha) * (n_kw[j, w] + beta) / (n_k[j] + vbeta)
                p[j] = total
            r = u[i] * total
            k = K - 1
            for j in range(K):
                if r < p[j]:
                    k = j
                    break
            z[i] = k
            n_dk[d, k] += 1
            n_kw[k, w] += 1
            n_k[k] += 1


def doc_stream(seed, doc_id):
    key = int.from_bytes(hashlib.sha256(doc_id.encode("utf-8")).digest()[:8], "little")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


def fit_lda(bow_docs, config: LdaConfig, n_words=None, on_sweep=None) -> LdaModel:
    """Fit LDA with collapsed Gibbs sampling.

    phi and theta are smoothed means of the count matrices over the
    post-burn-in sweeps. ``n_words`` is the vocabulary size (defaults to
    one past the largest index seen). ``on_sweep(sweep, n_dk, n_kw)`` is
    called after every sweep, with documents in doc_id order.
    """
    bow_docs = list(bow_docs)
    if not bow_docs:
        raise TopicModelError("cannot fit LDA on an empty corpus")
    ids = [b.doc_id for b in bow_docs]
    if len(set(ids)) != len(ids):
        raise TopicModelError("duplicate doc_id in LDA input")
    max_index = max((int(b.indices.max()) for b in bow_docs if len(b.indices)), default=-1)
    V = int(n_words) if n_words is not None else max_index + 1
    if V < 1 or max_index >= V:
        raise TopicModelError("empty vocabulary or word index out of range")

    order = sorted(range(len(bow_docs)), key=lambda i: ids[i])
    docs = [bow_docs[i] for i in order]
    lengths = np.array([d.length for d in docs], dtype=np.int64)
    doc_ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    words = np.concatenate([np.repeat(d.indices, d.counts) for d in docs]).astype(np.int64)
    N = int(doc_ptr[-1])
    if N == 0:
        raise TopicModelError("corpus has no tokens")

    K, D = config.K, len(docs)
    alpha, beta = config.alpha_value, float(config.beta)
    streams = [doc_stream(config.seed, d.doc_id) for d in docs]

    z = np.concatenate([g.integers(0, K, size=int(n)) for g, n in zip(streams, lengths)]).astype(np.int64)
    doc_of = np.repeat(np.arange(D), lengths)
    n_dk = np.zeros((D, K), dtype=np.int64)
    n_kw = np.zeros((K, V), dtype=np.int64)
    np.add.at(n_dk, (doc_of, z), 1)
    np.add.at(n_kw, (z, words), 1)
    n_k = n_kw.sum(axis=1)

    sum_dk = np.zeros_like(n_dk)
    sum_kw = np.zeros_like(n_kw)
    samples = 0
    block = None
    for sweep in range(config.iterations):
        b = sweep % _DRAW_BLOCK
        if b == 0:
            rows = min(_DRAW_BLOCK, config.iterations - sweep)
            block = np.concatenate([g.random((rows, int(n))) for g, n in zip(streams, lengths)], axis=1)
        _gibbs_sweep(doc_ptr, words, z, n_dk, n_kw, n_k, block[b], alpha, beta, V * beta)
        if on_sweep is not None:
            on_sweep(sweep, n_dk, n_kw)
        if sweep >= config.burn_in:
            sum_dk += n_dk
            sum_kw += n_kw
            samples += 1

    mean_kw = sum_kw / samples
    mean_dk = sum_dk / samples
    phi = (mean_kw + beta) / (mean_kw.sum(axis=1, keepdims=True) + V * beta)
    theta_sorted = (mean_dk + alpha) / (lengths[:, None] + K * alpha)

    theta = np.empty_like(theta_sorted)
    theta[order] = theta_sorted
    assignments = [None] * D
    for pos, orig in enumerate(order):
        assignments[orig] = z[doc_ptr[pos] : doc_ptr[pos + 1]].copy()
    return LdaModel(phi, theta, assignments, config, ids)


def _doc_sets(bow_docs, terms):
    wanted = set(int(t) for t in terms)
    sets = {t: set() for t in wanted}
    for d, b in enumerate(bow_docs):
        for w in b.indices:
            w = int(w)
            if w in wanted:
                sets[w].add(d)
    return sets


def umass_coherence(top_words, bow_docs, diagnostics=None):
    """U_Mass coherence of each topic's ordered top-word list.

    For words w_1..w_M (most probable first) a topic scores the mean over
    pairs l < m of log((D(w_m, w_l) + 1) / D(w_l)), with D counting
    documents. Words found in no document are dropped from the list first.
    Returns one float per topic; a topic with no pairs scores 0.
    """
    bow_docs = list(bow_docs)
    all_terms = {int(w) for words in top_words for w in words}
    sets = _doc_sets(bow_docs, all_terms)
    scores = []
    for t, words in enumerate(top_words):
        kept = []
        for w in words:
            w = int(w)
            if not sets[w]:
                msg = f"topic {t}: word {w} occurs in no document, excluded from coherence"
                logger.info(msg)
                if diagnostics is not None:
                    diagnostics.append(msg)
                continue
            kept.append(w)
        total, pairs = 0.0, 0
        for m in range(1, len(kept)):
            sm = sets[kept[m]]
            for l in range(m):
                sl = sets[kept[l]]
                total += math.log((len(sm & sl) + 1) / len(sl))
                pairs += 1
        scores.append(total / pairs if pairs else 0.0)
    return scores


@dataclass
class CoherenceReport:
    scores: list  # (K, coherence) per candidate, in candidate order
    chosen_k: int
    variant: str = "u_mass"
    top_n: int = 10
    models: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "variant": self.variant,
            "top_n": self.top_n,
            "scores": [{"K": k, "coherence": s} for k, s in self.scores],
            "chosen_K": self.chosen_k,
        }


def choose_k(scores):
    """Candidate with the highest score; ties go to the smallest K."""
    return max(scores, key=lambda ks: (ks[1], -ks[0]))[0]


def select_topic_count(bow_docs, k_candidates, template: LdaConfig, n_words=None, top_n=10, n_jobs=1):
    """Fit one model per candidate K and keep the most coherent.

    Each model reuses the template's seed and hyperparameters; an alpha
    left unset on the template is re-derived as 50 / K per candidate.
    """
    k_candidates = list(k_candidates)
    if not k_candidates:
        raise ValueError("k_candidates must not be empty")
    bow_docs = list(bow_docs)

    def run(k):
        cfg = template.with_k(k)
        model = fit_lda(bow_docs, cfg, n_words=n_words)
        score = float(np.mean(umass_coherence(model.top_words(top_n), bow_docs)))
        logger.info("K=%d coherence=%.6f", k, score)
        return model, score

    if n_jobs > 1 and len(k_candidates) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, k_candidates))
    else:
        results = [run(k) for k in k_candidates]
    scores = [(k, s) for k, (_, s) in zip(k_candidates, results)]
    models = {k: m for k, (m, _) in zip(k_candidates, results)}
    return CoherenceReport(scores, choose_k(scores), top_n=top_n, models=models)


def dominant_topic(model: LdaModel, doc_index: int) -> int:
    return int(np.argmax(model.theta[doc_index]))


def dominant_topics(model: LdaModel):
    """Map doc_id -> dominant topic for every document in the model."""
    return {doc_id: int(k) for doc_id, k in zip(model.doc_ids, np.argmax(model.theta, axis=1))}


def write_model(model: LdaModel, terms, out_dir, top_m=10):
    """Write phi.csv, theta.csv and topics.json into ``out_dir``."""
    out = Path(out_dir)
    write_csv(out / "phi.csv", ["topic", *terms], ([k, *map(float, row)] for k, row in enumerate(model.phi)))
    write_csv(
        out / "theta.csv",
        ["doc_id", *(f"topic_{k}" for k in range(model.K))],
        ([doc_id, *map(float, row)] for doc_id, row in zip(model.doc_ids, model.theta)),
    )
    topics = []
    for k, idx in enumerate(model.top_words(top_m)):
        words = [{"term": terms[i], "prob": float(fmt_float(model.phi[k, i]))} for i in idx]
        topics.append({"topic": k, "words": words})
    write_json(out / "topics.json", {"config": model.config.to_dict(), "topics": topics})
