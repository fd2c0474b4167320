"""Relevance of short posts to a reference corpus of submissions.

For each post: cosine similarities to every reference row, clamped into
[eps, 1 - eps], Box-Cox transformed with a profile-likelihood lambda,
mapped through y -> -1/y, and summarised by the median.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ._io import write_csv, write_json
from .errors import EmptyEmbeddingError, RelevanceError

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-4
LAMBDA_GRID = np.arange(-500, 501) / 100.0  # [-5, 5] step 0.01, exact decimals
MIN_FIT_SIZE = 8


@dataclass(frozen=True)
class ReferenceCorpus:
    matrix: np.ndarray  # n x d, rows as given (not normalized)
    ids: tuple
    q: float
    threshold: float  # cosine distance cut-off actually applied
    excluded: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 2:
            raise RelevanceError("reference corpus needs at least 2 rows")
        norms = np.linalg.norm(m, axis=1)
        if np.any(norms == 0):
            raise RelevanceError("reference corpus contains zero vectors")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_unit", m / norms[:, None])

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def unit_rows(self):
        return self._unit

    def to_dict(self):
        return {
            "selected_ids": list(self.ids),
            "excluded_ids": list(self.excluded),
            "rule": "cosine distance to centroid <= quantile",
            "q": self.q,
            "threshold": self.threshold,
        }


def select_reference_core(embeddings, q: float = 0.95) -> ReferenceCorpus:
    """Keep submissions whose cosine distance to the centroid is within the q-quantile.

    The centroid is the mean of the L2-normalized rows. Zero rows are not
    usable and are always excluded.
    """
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    vecs = np.asarray(embeddings.vectors, dtype=np.float64)
    ids = list(embeddings.doc_ids)
    norms = np.linalg.norm(vecs, axis=1) if len(ids) else np.zeros(0)
    usable = norms > 0
    if usable.sum() < 2:
        raise RelevanceError(f"need at least 2 non-zero submission embeddings, got {int(usable.sum())}")
    unit = vecs[usable] / norms[usable, None]
    centroid = unit.mean(axis=0)
    cnorm = np.linalg.norm(centroid)
    if cnorm == 0:
        dist = np.ones(unit.shape[0])
    else:
        dist = 1.0 - unit @ (centroid / cnorm)
    threshold = float(np.quantile(dist, q))
    # rounding slack so exact ties (identical rows) are never split
    keep_local = dist <= threshold + 1e-12
    usable_ids = [i for i, u in zip(ids, usable) if u]
    selected = [i for i, k in zip(usable_ids, keep_local) if k]
    excluded = [i for i, k in zip(usable_ids, keep_local) if not k] + [i for i, u in zip(ids, usable) if not u]
    if len(selected) < 2:
        raise RelevanceError("fewer than 2 submissions survive core selection")
    rows = vecs[usable][keep_local]
    return ReferenceCorpus(rows, tuple(selected), q, threshold, tuple(sorted(excluded)))


def similarity_vector(v_t, ref: ReferenceCorpus) -> np.ndarray:
    """Cosine similarity of one embedding against every reference row."""
    v = np.asarray(v_t, dtype=np.float64)
    if v.shape != (ref.matrix.shape[1],):
        raise ValueError(f"embedding has shape {v.shape}, reference rows have d={ref.matrix.shape[1]}")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise EmptyEmbeddingError("empty-embedding: zero vector cannot be compared")
    return ref.unit_rows @ (v / norm)


@dataclass(frozen=True)
class BoxCoxParams:
    lam: float
    epsilon: float = DEFAULT_EPSILON
    loglik: float = float("nan")
    grid: tuple = (-5.0, 5.0, 0.01)
    fallback: str | None = None  # reason lambda was not estimated


def clamp(s, epsilon=DEFAULT_EPSILON):
    if not 0 < epsilon <= 0.1:
        raise ValueError("epsilon must lie in (0, 0.1]")
    return np.clip(np.asarray(s, dtype=np.float64), epsilon, 1.0 - epsilon)


def boxcox(s, lam):
    """(s**lam - 1) / lam, or log(s) at lam == 0."""
    logs = np.log(s)
    if lam == 0:
        return logs
    return np.expm1(lam * logs) / lam


def boxcox_loglik(s, lambdas):
    """Profile log-likelihood (lam - 1) * sum(log s) - n/2 * log(var(y_lam)).

    ``var`` is the biased (1/n) variance. Returns -inf where the transformed
    values have no spread.
    """
    logs = np.log(np.asarray(s, dtype=np.float64))
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    n = logs.shape[0]
    var = np.empty(lambdas.shape[0])
    step = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, lambdas.shape[0], step):
        lam = lambdas[lo : lo + step, None]
        safe = np.where(lam == 0, 1.0, lam)
        y = np.where(lam == 0, logs[None, :], np.expm1(lam * logs[None, :]) / safe)
        var[lo : lo + step] = y.var(axis=1)
    with np.errstate(divide="ignore"):
        out = (lambdas - 1.0) * logs.sum() - 0.5 * n * np.log(var)
    out[~(var > 0)] = -np.inf
    return out


def fit_boxcox_lambda(s, epsilon: float = DEFAULT_EPSILON) -> BoxCoxParams:
    """Grid-search the Box-Cox lambda maximizing the profile likelihood.

    Values are clamped to [epsilon, 1 - epsilon] and sorted first, so the
    result does not depend on their order. Fewer than 8 values or a
    constant sample fall back to lambda = 0. Ties go to the lambda nearest 0.
    """
    x = np.sort(clamp(s, epsilon))
    if x.shape[0] < MIN_FIT_SIZE:
        return BoxCoxParams(0.0, epsilon, fallback=f"n={x.shape[0]} < {MIN_FIT_SIZE}")
    if x[0] == x[-1]:
        logger.debug("constant similarity vector; lambda fallback 0")
        return BoxCoxParams(0.0, epsilon, fallback="zero variance")
    ll = boxcox_loglik(x, LAMBDA_GRID)
    best = ll.max()
    ties = np.flatnonzero(ll == best)
    i = min(ties, key=lambda j: (abs(LAMBDA_GRID[j]), LAMBDA_GRID[j]))
    return BoxCoxParams(float(LAMBDA_GRID[i]), epsilon, float(best))


def boxcox_transform_scale(s, params) -> np.ndarray:
    """Clamp, Box-Cox transform, then invert: y_scaled = -1 / y (> 0)."""
    if isinstance(params, BoxCoxParams):
        lam, eps = params.lam, params.epsilon
    else:
        lam, eps = float(params), DEFAULT_EPSILON
    y = boxcox(clamp(s, eps), lam)
    if not np.all(y < 0):
        raise RelevanceError(f"Box-Cox produced a non-negative value at lambda={lam}; clamping invariant broken")
    return -1.0 / y


@dataclass(frozen=True)
class RelevanceScore:
    tweet_id: str
    index: float
    lam: float
    decile: int | None = None


def relevance_index(tweet_embedding, ref: ReferenceCorpus, epsilon=DEFAULT_EPSILON, lam=None, tweet_id=None):
    """Median of the inverted Box-Cox similarities of one post.

    With ``lam=None`` lambda is fitted on this post's own similarities.
    """
    if hasattr(tweet_embedding, "vector"):
        tweet_id = tweet_id if tweet_id is not None else tweet_embedding.source_doc_id
        tweet_embedding = tweet_embedding.vector
    s = similarity_vector(tweet_embedding, ref)
    params = fit_boxcox_lambda(s, epsilon) if lam is None else BoxCoxParams(float(lam), epsilon)
    y = boxcox_transform_scale(s, params)
    return RelevanceScore(tweet_id, float(np.median(y)), params.lam)


def fit_global_lambda(embeddings, ref, epsilon=DEFAULT_EPSILON, max_values=200_000):
    """One lambda for the pooled similarities of all non-empty posts.

    Pools are thinned by a fixed stride above ``max_values`` values.
    """
    vecs = np.asarray(embeddings.vectors, dtype=np.float64)
    norms = np.linalg.norm(vecs, axis=1)
    ok = norms > 0
    if not ok.any():
        raise RelevanceError("no non-empty post embeddings")
    pooled = ((vecs[ok] / norms[ok, None]) @ ref.unit_rows.T).ravel()
    if pooled.shape[0] > max_values:
        pooled = np.sort(pooled)[:: int(np.ceil(pooled.shape[0] / max_values))]
    return fit_boxcox_lambda(pooled, epsilon)


@dataclass
class ScoringResult:
    scores: list
    excluded: list = field(default_factory=list)  # ids with empty embeddings
    global_lambda: BoxCoxParams | None = None


def score_posts(embeddings, ref, epsilon=DEFAULT_EPSILON, mode="per_tweet") -> ScoringResult:
    """Relevance index for every row of an EmbeddingMatrix."""
    if mode not in ("per_tweet", "global"):
        raise ValueError(f"unknown lambda mode {mode!r}")
    glob = fit_global_lambda(embeddings, ref, epsilon) if mode == "global" else None
    scores, excluded = [], []
    for doc_id, v in zip(embeddings.doc_ids, embeddings.vectors):
        try:
            scores.append(relevance_index(v, ref, epsilon, None if glob is None else glob.lam, tweet_id=doc_id))
        except EmptyEmbeddingError:
            excluded.append(doc_id)
    if excluded:
        logger.info("%d posts with empty embeddings excluded from ranking", len(excluded))
    return ScoringResult(scores, excluded, glob)


@dataclass
class DecilePartition:
    deciles: dict  # tweet_id -> 1..10
    top: list
    bottom: list
    ranked: list  # tweet ids, most relevant first


def decile_partition(scores) -> DecilePartition:
    """Rank by index (desc, ties by id) and cut into ten rank buckets.

    Rank r of n (1-based) falls in decile ceil(10 r / n).
    """
    scores = list(scores)
    n = len(scores)
    if n < 10:
        raise RelevanceError(f"decile partition needs at least 10 scores, got {n}")
    ranked = sorted(scores, key=lambda s: (-s.index, s.tweet_id))
    deciles = {s.tweet_id: (10 * r + n - 1) // n for r, s in enumerate(ranked, 1)}
    ids = [s.tweet_id for s in ranked]
    return DecilePartition(
        deciles,
        [i for i in ids if deciles[i] == 1],
        [i for i in ids if deciles[i] == 10],
        ids,
    )


def with_deciles(scores, partition):
    return [replace(s, decile=partition.deciles.get(s.tweet_id)) for s in scores]


def write_relevance(scores, out_path):
    rows = sorted(scores, key=lambda s: s.tweet_id)
    write_csv(
        out_path,
        ["tweet_id", "index", "lambda", "decile"],
        ((s.tweet_id, s.index, s.lam, "" if s.decile is None else s.decile) for s in rows),
    )


def write_reference_core(ref: ReferenceCorpus, out_path):
    write_json(out_path, ref.to_dict())
