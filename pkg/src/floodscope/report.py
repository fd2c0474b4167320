"""Plot-ready evaluation tables: N-gram density, term association,
topic timelines, geographic bins and a 2-D projection of embeddings."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import timedelta
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from ._io import write_csv
from .errors import ReportError

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# N-gram density of the top and bottom relevance deciles


@dataclass
class NgramDensityReport:
    edges: np.ndarray
    densities: dict  # group -> density per bin
    values: dict  # group -> per-document statistic
    statistic: str = "total"

    def summary(self, group):
        v = self.values[group]
        return {"mean": float(np.mean(v)), "median": float(np.median(v)), "n": int(len(v))}

    def mass(self, group):
        return float(np.sum(self.densities[group] * np.diff(self.edges)))

    def rows(self):
        for group in ("top", "bottom"):
            for lo, hi, dens in zip(self.edges[:-1], self.edges[1:], self.densities[group]):
                yield group, float(lo), float(hi), float(dens)


def ngram_statistic(token_doc, statistic="total"):
    if statistic == "total":
        return token_doc.total_ngrams()
    if statistic == "distinct":
        return token_doc.distinct_ngrams()
    raise ValueError(f"unknown statistic {statistic!r}")


def ngram_density_report(token_docs, top_ids, bottom_ids, bins="fd", statistic="total"):
    """Histogram per-post N-gram counts of two groups over shared bin edges.

    ``bins`` is anything :func:`numpy.histogram_bin_edges` accepts; the
    default Freedman-Diaconis rule is applied to the pooled groups.
    """
    top_ids, bottom_ids = set(top_ids), set(bottom_ids)
    if not top_ids or not bottom_ids:
        raise ReportError("both groups must be non-empty")
    if top_ids & bottom_ids:
        raise ReportError("top and bottom groups overlap")
    by_id = {td.doc_id: td for td in token_docs}
    missing = (top_ids | bottom_ids) - by_id.keys()
    if missing:
        raise ReportError(f"{len(missing)} group ids have no token document")
    values = {
        "top": np.array([ngram_statistic(by_id[i], statistic) for i in sorted(top_ids)], dtype=np.float64),
        "bottom": np.array([ngram_statistic(by_id[i], statistic) for i in sorted(bottom_ids)], dtype=np.float64),
    }
    edges = np.histogram_bin_edges(np.concatenate([values["top"], values["bottom"]]), bins=bins)
    densities = {g: np.histogram(v, bins=edges, density=True)[0] for g, v in values.items()}
    return NgramDensityReport(edges, densities, values, statistic)


# --------------------------------------------------------------------------
# term association between the relevant and irrelevant groups


def ecdf_rank(values):
    """Fraction of entries <= each entry."""
    values = np.asarray(values, dtype=np.float64)
    srt = np.sort(values)
    return np.searchsorted(srt, values, side="right") / values.shape[0]


def harmonic_mean(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        h = 2 * a * b / (a + b)
    return np.where(a + b > 0, h, 0.0)


@dataclass
class TermAssociation:
    terms: list
    c_rel: np.ndarray
    c_irrel: np.ndarray
    alpha: float
    precision: np.ndarray  # smoothed share of occurrences in the relevant group
    freq_pct: np.ndarray
    assoc: np.ndarray
    precision_irrel: np.ndarray = field(default=None)
    freq_pct_irrel: np.ndarray = field(default=None)
    assoc_irrel: np.ndarray = field(default=None)

    def top(self, k=10, side="relevant"):
        score = self.assoc if side == "relevant" else self.assoc_irrel
        order = sorted(range(len(self.terms)), key=lambda i: (-score[i], self.terms[i]))
        return [self.terms[i] for i in order[:k]]

    def rows(self, side="relevant"):
        for i, t in enumerate(self.terms):
            if side == "relevant":
                yield t, int(self.c_rel[i]), int(self.c_irrel[i]), float(self.precision[i]), float(self.assoc[i])
            else:
                yield (
                    t,
                    int(self.c_rel[i]),
                    int(self.c_irrel[i]),
                    float(self.precision_irrel[i]),
                    float(self.assoc_irrel[i]),
                )


def _side(c_this, c_other, alpha):
    precision = (c_this + alpha) / (c_this + c_other + 2 * alpha)
    freq_pct = ecdf_rank(c_this)
    return precision, freq_pct, harmonic_mean(ecdf_rank(precision), freq_pct)


def term_association(token_docs, relevant_ids, irrelevant_ids, alpha=None, max_n=1):
    """Association of each term with the relevant group (and, symmetrically,
    the irrelevant one).

    precision = (c_rel + a) / (c_rel + c_irrel + 2a); the association is the
    harmonic mean of precision's ECDF rank and c_rel's ECDF rank across the
    vocabulary. ``alpha`` defaults to 1% of the mean total count per term.
    """
    relevant_ids, irrelevant_ids = set(relevant_ids), set(irrelevant_ids)
    if not relevant_ids or not irrelevant_ids:
        raise ReportError("both groups must be non-empty")
    if relevant_ids & irrelevant_ids:
        raise ReportError("groups overlap")
    rel, irr = Counter(), Counter()
    for td in token_docs:
        target = rel if td.doc_id in relevant_ids else irr if td.doc_id in irrelevant_ids else None
        if target is None:
            continue
        for g, c in td.ngram_counts.items():
            if g.count(" ") < max_n:
                target[g] += c
    terms = sorted(set(rel) | set(irr))
    if not terms:
        raise ReportError("no terms in either group")
    c_rel = np.array([rel[t] for t in terms], dtype=np.float64)
    c_irr = np.array([irr[t] for t in terms], dtype=np.float64)
    if alpha is None:
        alpha = 0.01 * float(np.mean(c_rel + c_irr))
    p, f, a = _side(c_rel, c_irr, alpha)
    pi, fi, ai = _side(c_irr, c_rel, alpha)
    return TermAssociation(terms, c_rel.astype(np.int64), c_irr.astype(np.int64), alpha, p, f, a, pi, fi, ai)


# --------------------------------------------------------------------------
# daily topic timeline


@dataclass
class TopicTimeline:
    counts: dict  # (date, topic) -> count
    totals: dict  # date -> count

    def rows(self):
        for (day, topic), c in sorted(self.counts.items()):
            yield day.isoformat(), topic, c


def topic_timeline(tweets, dominant, zero_fill=False, topics=None) -> TopicTimeline:
    """Count posts per UTC calendar day and dominant topic.

    Posts without a dominant topic are skipped. With ``zero_fill`` every
    day between the first and last one gets a row for every topic.
    """
    counts = Counter()
    for t in tweets:
        if t.id not in dominant:
            continue
        counts[(t.created_at.date(), dominant[t.id])] += 1
    if zero_fill and counts:
        days = [d for d, _ in counts]
        topic_set = sorted(set(topics) if topics is not None else {k for _, k in counts})
        day = min(days)
        while day <= max(days):
            for k in topic_set:
                counts.setdefault((day, k), 0)
            day += timedelta(days=1)
    totals = Counter()
    for (day, _), c in counts.items():
        totals[day] += c
    return TopicTimeline(dict(counts), dict(totals))


# --------------------------------------------------------------------------
# geography


def grid_key(lat, lon, step="0.1"):
    q = Decimal(step)
    la = Decimal(repr(float(lat))).quantize(q, rounding=ROUND_HALF_UP)
    lo = Decimal(repr(float(lon))).quantize(q, rounding=ROUND_HALF_UP)
    return float(la), float(lo)


@dataclass
class GeoBin:
    key: str
    counts: dict  # topic -> count

    @property
    def total(self):
        return sum(self.counts.values())


@dataclass
class GeoAggregate:
    bins: list
    excluded: int

    def rows(self):
        for b in self.bins:
            for topic, c in sorted(b.counts.items()):
                yield b.key, topic, c


def geo_aggregate(docs, dominant, mode="grid") -> GeoAggregate:
    """Group located documents by postcode or by a 0.1 degree lat/lon grid.

    ``docs`` are Tweets (grid mode, ``geo``) or Submissions (postcode mode).
    Documents without location or without a dominant topic are excluded and
    counted.
    """
    if mode not in ("grid", "postcode"):
        raise ValueError(f"unknown mode {mode!r}")
    bins = defaultdict(Counter)
    excluded = 0
    for doc in docs:
        topic = dominant.get(doc.id)
        if mode == "grid":
            geo = getattr(doc, "geo", None)
            key = None if geo is None else "{:.1f},{:.1f}".format(*grid_key(*geo))
        else:
            key = getattr(doc, "postcode", None)
        if key is None or topic is None:
            excluded += 1
            continue
        bins[key][topic] += 1
    return GeoAggregate([GeoBin(k, dict(bins[k])) for k in sorted(bins)], excluded)


# --------------------------------------------------------------------------
# 2-D projection


@dataclass
class Projection:
    doc_ids: list
    coords: np.ndarray  # n x components
    explained_variance: np.ndarray
    diagnostics: list = field(default_factory=list)


def pca_projection(embeddings, components=2) -> Projection:
    """Project centred embeddings onto their top principal directions.

    Signs are fixed so each direction's largest-magnitude loading is positive.
    """
    X = np.asarray(embeddings.vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ReportError("PCA projection needs at least 2 documents and 2 dimensions")
    Xc = X - X.mean(axis=0)
    if not np.any(np.abs(Xc) > 0):
        msg = "zero-variance embeddings; all coordinates are 0"
        logger.warning(msg)
        return Projection(list(embeddings.doc_ids), np.zeros((X.shape[0], components)), np.zeros(components), [msg])
    _, sv, vt = np.linalg.svd(Xc, full_matrices=False)
    dirs = vt[:components]
    for r in range(dirs.shape[0]):
        if dirs[r, np.argmax(np.abs(dirs[r]))] < 0:
            dirs[r] = -dirs[r]
    coords = Xc @ dirs.T
    var = sv[:components] ** 2 / X.shape[0]
    if coords.shape[1] < components:
        pad = components - coords.shape[1]
        coords = np.hstack([coords, np.zeros((coords.shape[0], pad))])
        var = np.concatenate([var, np.zeros(pad)])
    return Projection(list(embeddings.doc_ids), coords, var)


# --------------------------------------------------------------------------
# writers


def write_density(report, path):
    write_csv(path, ["group", "bin_lo", "bin_hi", "density"], report.rows())


def write_term_association(table, path, side="relevant"):
    write_csv(path, ["term", "c_rel", "c_irrel", "precision", "assoc"], table.rows(side))


def write_timeline(timeline, path):
    write_csv(path, ["date", "topic", "count"], timeline.rows())


def write_geo(agg, path):
    write_csv(path, ["bin", "topic", "count"], agg.rows())


def write_projection(proj, kinds, path):
    """``kinds`` maps doc_id -> document kind."""
    rows = [(d, kinds[d], float(x), float(y)) for d, (x, y) in zip(proj.doc_ids, proj.coords[:, :2])]
    write_csv(path, ["doc_id", "kind", "x", "y"], sorted(rows))
