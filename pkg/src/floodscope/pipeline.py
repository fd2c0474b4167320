"""Stage-file pipeline: each stage reads its predecessors' outputs from the
output directory and records what it wrote in ``manifest.json``."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import corpus as corpus_mod
from . import keywords, relevance, report, textprep, topics
from ._io import dumps, read_csv, read_json, sha256_file, write_csv, write_json
from .embed import EmbeddingBackendSpec, EmbeddingMatrix, RetryPolicy, embed_corpus, make_backend
from .errors import ConfigError, FloodscopeError, StageError

logger = logging.getLogger(__name__)

STAGES = ("ingest", "prep", "topics", "keywords", "embed", "relevance", "report")
DEPENDS = {
    "ingest": (),
    "prep": ("ingest",),
    "topics": ("prep",),
    "keywords": ("prep", "topics"),
    "embed": ("prep",),
    "relevance": ("embed",),
    "report": ("prep", "topics", "embed", "relevance"),
}
SEEDED = {"topics", "relevance"}
KINDS = ("tweet", "submission")


# --------------------------------------------------------------------------
# configuration


@dataclass
class TopicGrid:
    k_candidates: list
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 500
    top_n: int = 10


@dataclass
class PipelineConfig:
    tweets: Path | None = None
    submissions: Path | None = None
    stopwords: Path | None = None
    cache: Path | None = None
    out: Path = Path("out")
    seed: int | None = None
    threads: int = 1
    min_df: int = 5
    max_df_frac: float = 0.5
    max_n: int = 5
    topics: dict = field(default_factory=lambda: {"tweet": TopicGrid([6]), "submission": TopicGrid([4])})
    embed: EmbeddingBackendSpec = field(default_factory=lambda: EmbeddingBackendSpec("local"))
    batch_size: int = 32
    max_parallel: int = 4
    timeout: float = 60.0
    max_retries: int = 5
    q: float = 0.95
    epsilon: float = relevance.DEFAULT_EPSILON
    lambda_mode: str = "per_tweet"
    top_k: int = 20
    min_freq: int = 3
    bins: object = "fd"
    ngram_statistic: str = "total"
    zero_fill: bool = False


_TOP_KEYS = {"seed", "threads", "paths", "prep", "topics", "keywords", "embed", "relevance", "report"}


def _check_keys(section, data, allowed):
    extra = set(data) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(extra)}")


def load_config(path=None, overrides=None) -> PipelineConfig:
    """Read a TOML config; relative paths resolve against the file's directory."""
    data, base = {}, Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.parent
    _check_keys("top level", data, _TOP_KEYS)
    cfg = PipelineConfig()
    try:
        paths = data.get("paths", {})
        _check_keys("paths", paths, {"tweets", "submissions", "stopwords", "cache", "out"})
        for key in ("tweets", "submissions", "stopwords", "cache", "out"):
            if paths.get(key):
                setattr(cfg, key, (base / paths[key]).resolve())
        cfg.seed = data.get("seed")
        cfg.threads = int(data.get("threads", 1))

        prep = data.get("prep", {})
        _check_keys("prep", prep, {"min_df", "max_df_frac", "max_n"})
        cfg.min_df = int(prep.get("min_df", cfg.min_df))
        cfg.max_df_frac = float(prep.get("max_df_frac", cfg.max_df_frac))
        cfg.max_n = int(prep.get("max_n", cfg.max_n))

        grids = dict(cfg.topics)
        for kind, sec in data.get("topics", {}).items():
            if kind not in KINDS:
                raise ConfigError(f"[topics.{kind}]: kind must be one of {KINDS}")
            _check_keys(f"topics.{kind}", sec, {"k_candidates", "alpha", "beta", "iterations", "burn_in", "top_n"})
            grids[kind] = TopicGrid(
                [int(k) for k in sec.get("k_candidates", grids[kind].k_candidates)],
                sec.get("alpha"),
                float(sec.get("beta", 0.01)),
                int(sec.get("iterations", 1000)),
                int(sec.get("burn_in", 500)),
                int(sec.get("top_n", 10)),
            )
        cfg.topics = grids

        kw = data.get("keywords", {})
        _check_keys("keywords", kw, {"top_k", "min_freq"})
        cfg.top_k = int(kw.get("top_k", cfg.top_k))
        cfg.min_freq = int(kw.get("min_freq", cfg.min_freq))

        emb = data.get("embed", {})
        _check_keys(
            "embed",
            emb,
            {"kind", "endpoint", "model", "d", "hash_seed", "batch_size", "max_parallel", "timeout", "max_retries"},
        )
        cfg.embed = EmbeddingBackendSpec(
            emb.get("kind", "local"),
            emb.get("endpoint"),
            emb.get("model"),
            int(emb.get("d", 256)),
            int(emb.get("hash_seed", 0)),
        )
        cfg.batch_size = int(emb.get("batch_size", cfg.batch_size))
        cfg.max_parallel = int(emb.get("max_parallel", cfg.max_parallel))
        cfg.timeout = float(emb.get("timeout", cfg.timeout))
        cfg.max_retries = int(emb.get("max_retries", cfg.max_retries))

        rel = data.get("relevance", {})
        _check_keys("relevance", rel, {"q", "epsilon", "lambda_mode"})
        cfg.q = float(rel.get("q", cfg.q))
        cfg.epsilon = float(rel.get("epsilon", cfg.epsilon))
        cfg.lambda_mode = rel.get("lambda_mode", cfg.lambda_mode)

        rep = data.get("report", {})
        _check_keys("report", rep, {"bins", "ngram_statistic", "zero_fill"})
        cfg.bins = rep.get("bins", cfg.bins)
        cfg.ngram_statistic = rep.get("ngram_statistic", cfg.ngram_statistic)
        cfg.zero_fill = bool(rep.get("zero_fill", cfg.zero_fill))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, Path(value).resolve() if key == "out" else value)
    _validate(cfg)
    return cfg


def _validate(cfg):
    if not 0 < cfg.q <= 1:
        raise ConfigError("relevance.q must lie in (0, 1]")
    if not 0 < cfg.epsilon <= 0.1:
        raise ConfigError("relevance.epsilon must lie in (0, 0.1]")
    if cfg.lambda_mode not in ("per_tweet", "global"):
        raise ConfigError("relevance.lambda_mode must be 'per_tweet' or 'global'")
    if cfg.min_df < 1 or not 0 < cfg.max_df_frac <= 1:
        raise ConfigError("prep thresholds out of range")
    if cfg.ngram_statistic not in ("total", "distinct"):
        raise ConfigError("report.ngram_statistic must be 'total' or 'distinct'")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    for kind, grid in cfg.topics.items():
        if not grid.k_candidates:
            raise ConfigError(f"topics.{kind}.k_candidates is empty")
        try:
            topics.LdaConfig(min(grid.k_candidates), grid.alpha, grid.beta, grid.iterations, grid.burn_in, 0)
        except ValueError as exc:
            raise ConfigError(f"topics.{kind}: {exc}") from exc


def check_paths(cfg, stages):
    """Fail before anything runs if an input a requested stage reads is missing."""
    if "ingest" in stages:
        if cfg.tweets is None and cfg.submissions is None:
            raise ConfigError("ingest needs paths.tweets and/or paths.submissions")
        for p in (cfg.tweets, cfg.submissions):
            if p is not None and not p.is_file():
                raise ConfigError(f"input file not found: {p}")
    if "prep" in stages and cfg.stopwords is not None and not cfg.stopwords.is_file():
        raise ConfigError(f"stopwords file not found: {cfg.stopwords}")
    if stages & SEEDED and cfg.seed is None:
        raise ConfigError(f"a seed is required for stages {sorted(stages & SEEDED)} (config 'seed' or --seed)")


# --------------------------------------------------------------------------
# manifest and stage bookkeeping


class Workspace:
    def __init__(self, out):
        self.out = Path(out)
        self.manifest_path = self.out / "manifest.json"

    def path(self, *parts):
        return self.out.joinpath(*parts)

    def manifest(self):
        if self.manifest_path.exists():
            return read_json(self.manifest_path)
        return {}

    def record(self, stage, files):
        m = self.manifest()
        m[stage] = {str(Path(f).relative_to(self.out).as_posix()): sha256_file(f) for f in sorted(files)}
        write_json(self.manifest_path, m)
        return m[stage]

    def complete(self, stage):
        entry = self.manifest().get(stage)
        return entry is not None and all(self.path(f).exists() for f in entry)


def _write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def _write_jsonl(path, records):
    return _write_text(path, "".join(dumps(r) + "\n" for r in records))


# --------------------------------------------------------------------------
# stages


def stage_ingest(cfg, ws):
    tweets, subs, diags, sources = [], [], [], []
    if cfg.tweets is not None:
        tweets, d = corpus_mod.load_tweets(cfg.tweets)
        diags += d
        sources.append(cfg.tweets)
    if cfg.submissions is not None:
        subs, d = corpus_mod.load_submissions(cfg.submissions)
        diags += d
        sources.append(cfg.submissions)
    corpus = corpus_mod.build_corpus(tweets, subs, sources)
    validation = corpus_mod.validate_corpus(corpus)
    if validation.duplicate_ids:
        raise StageError("ingest", f"duplicate doc ids across kinds: {validation.duplicate_ids[:5]}")
    files = [
        _write_text(ws.path("corpus.jsonl"), corpus_mod.corpus_to_jsonl(corpus)),
    ]
    write_json(
        ws.path("ingest_report.json"),
        {
            "tweets": len(tweets),
            "submissions": len(subs),
            "diagnostics": [str(d) for d in diags],
            "validation": validation.to_dict(),
        },
    )
    files.append(ws.path("ingest_report.json"))
    return files


def _load_corpus(ws):
    return corpus_mod.corpus_from_jsonl(ws.path("corpus.jsonl").read_text(encoding="utf-8"))


def stage_prep(cfg, ws):
    corpus = _load_corpus(ws)
    stop = textprep.load_stopwords(cfg.stopwords)
    clean_rows, token_rows = [], []
    by_kind = {k: [] for k in KINDS}
    for doc in corpus.docs:
        cleaned = textprep.clean_text(doc.text)
        td = textprep.make_token_doc(doc.doc_id, cleaned, stop, cfg.max_n)
        clean_rows.append({"doc_id": doc.doc_id, "kind": doc.kind, "text": cleaned})
        token_rows.append(
            {"doc_id": doc.doc_id, "kind": doc.kind, "sentences": [list(s) for s in td.sentences], "ngrams": td.ngram_counts}
        )
        by_kind[doc.kind].append(td)
    files = [_write_jsonl(ws.path("clean.jsonl"), clean_rows), _write_jsonl(ws.path("tokens.jsonl"), token_rows)]
    prep_report = {}
    for kind, tds in by_kind.items():
        if not tds:
            continue
        try:
            vocab, bows, rep = textprep.build_bow(tds, cfg.min_df, cfg.max_df_frac)
        except FloodscopeError as exc:
            raise StageError("prep", f"{kind}: {exc}") from exc
        prep_report[kind] = rep.to_dict()
        path = ws.path(f"bow_{kind}.json")
        write_json(path, {"vocab": vocab.to_dict(), "docs": [b.to_dict() for b in bows], "dropped": rep.dropped_ids})
        files.append(path)
    write_json(ws.path("prep_report.json"), prep_report)
    files.append(ws.path("prep_report.json"))
    return files


def _load_bow(ws, kind):
    path = ws.path(f"bow_{kind}.json")
    if not path.exists():
        return None, []
    data = read_json(path)
    return textprep.Vocabulary.from_dict(data["vocab"]), [textprep.BowDoc.from_dict(d) for d in data["docs"]]


def _load_token_docs(ws):
    out = {k: [] for k in KINDS}
    for rec in _read_jsonl(ws.path("tokens.jsonl")):
        sentences = tuple(tuple(s) for s in rec["sentences"])
        out[rec["kind"]].append(textprep.TokenDoc(rec["doc_id"], sentences, rec["ngrams"]))
    return out


def _load_clean(ws):
    out = {k: [] for k in KINDS}
    for rec in _read_jsonl(ws.path("clean.jsonl")):
        out[rec["kind"]].append(textprep.CleanDoc(rec["doc_id"], rec["text"]))
    return out


def stage_topics(cfg, ws):
    files = []
    for kind in KINDS:
        vocab, bows = _load_bow(ws, kind)
        if vocab is None:
            continue
        grid = cfg.topics[kind]
        template = topics.LdaConfig(
            grid.k_candidates[0], grid.alpha, grid.beta, grid.iterations, grid.burn_in, cfg.seed
        )
        rep = topics.select_topic_count(
            bows, grid.k_candidates, template, n_words=len(vocab), top_n=grid.top_n, n_jobs=cfg.threads
        )
        model = rep.models[rep.chosen_k]
        out = ws.path("topics", kind)
        topics.write_model(model, vocab.terms, out, top_m=grid.top_n)
        write_json(out / "coherence.json", rep.to_dict())
        dom = topics.dominant_topics(model)
        write_csv(out / "dominant.csv", ["doc_id", "topic"], sorted(dom.items()))
        files += [out / n for n in ("phi.csv", "theta.csv", "topics.json", "coherence.json", "dominant.csv")]
    return files


def _load_dominant(ws, kind):
    path = ws.path("topics", kind, "dominant.csv")
    if not path.exists():
        return {}
    return {r["doc_id"]: int(r["topic"]) for r in read_csv(path)}


def _n_topics(ws, kind):
    return read_json(ws.path("topics", kind, "coherence.json"))["chosen_K"]


def stage_keywords(cfg, ws):
    files = []
    token_docs = _load_token_docs(ws)
    for kind in KINDS:
        dom = _load_dominant(ws, kind)
        if not dom:
            continue
        profile = keywords.topic_ngram_counts(token_docs[kind], dom, range(_n_topics(ws, kind)))
        table = keywords.rca_scores(profile)
        ranked = keywords.rank_keywords(table, cfg.top_k, cfg.min_freq)
        out = ws.path("keywords", kind)
        out.mkdir(parents=True, exist_ok=True)
        keywords.write_keywords(table, ranked, out)
        files += [out / "rca.csv", out / "keywords.json"]
    return files


def stage_embed(cfg, ws):
    backend = make_backend(
        cfg.embed,
        **(
            {}
            if cfg.embed.kind == "local"
            else dict(
                batch_size=cfg.batch_size,
                max_parallel=cfg.max_parallel,
                retry=RetryPolicy(max_retries=cfg.max_retries),
                timeout=cfg.timeout,
            )
        ),
    )
    cache = cfg.cache if cfg.cache is not None else ws.path("cache", "embeddings.bin")
    files = []
    for kind, docs in _load_clean(ws).items():
        if not docs:
            continue
        m = embed_corpus(docs, backend, cache)
        npy = ws.path("embeddings", f"{kind}.npy")
        npy.parent.mkdir(parents=True, exist_ok=True)
        np.save(npy, m.vectors.astype("<f4"), allow_pickle=False)
        ids = ws.path("embeddings", f"{kind}_ids.json")
        write_json(ids, {"backend_id": m.backend_id, "doc_ids": m.doc_ids})
        files += [npy, ids]
    return files


def _load_embeddings(ws, kind):
    ids = ws.path("embeddings", f"{kind}_ids.json")
    if not ids.exists():
        return None
    meta = read_json(ids)
    return EmbeddingMatrix(meta["doc_ids"], np.load(ws.path("embeddings", f"{kind}.npy")), meta["backend_id"])


def stage_relevance(cfg, ws):
    subs, posts = _load_embeddings(ws, "submission"), _load_embeddings(ws, "tweet")
    if subs is None or posts is None:
        raise StageError("relevance", "needs embeddings of both tweets and submissions")
    ref = relevance.select_reference_core(subs, cfg.q)
    result = relevance.score_posts(posts, ref, cfg.epsilon, cfg.lambda_mode)
    scores = result.scores
    note = None
    if len(scores) >= 10:
        scores = relevance.with_deciles(scores, relevance.decile_partition(scores))
    else:
        note = f"only {len(scores)} scored posts; deciles not assigned"
        logger.warning(note)
    relevance.write_relevance(scores, ws.path("relevance.csv"))
    relevance.write_reference_core(ref, ws.path("reference_core.json"))
    write_json(
        ws.path("relevance_report.json"),
        {
            "scored": len(scores),
            "excluded_empty_embedding": result.excluded,
            "lambda_mode": cfg.lambda_mode,
            "global_lambda": None if result.global_lambda is None else result.global_lambda.lam,
            "epsilon": cfg.epsilon,
            "note": note,
        },
    )
    return [ws.path("relevance.csv"), ws.path("reference_core.json"), ws.path("relevance_report.json")]


def stage_report(cfg, ws):
    rel = read_csv(ws.path("relevance.csv"))
    if not rel or rel[0]["decile"] == "":
        raise StageError("report", "relevance deciles unavailable (need at least 10 scored posts)")
    top = sorted(r["tweet_id"] for r in rel if r["decile"] == "1")
    bottom = sorted(r["tweet_id"] for r in rel if r["decile"] == "10")
    token_docs = _load_token_docs(ws)
    files = []

    bins = cfg.bins
    dens = report.ngram_density_report(token_docs["tweet"], top, bottom, bins=bins, statistic=cfg.ngram_statistic)
    report.write_density(dens, ws.path("ngram_density.csv"))
    assoc = report.term_association(token_docs["tweet"], top, bottom)
    report.write_term_association(assoc, ws.path("term_association.csv"))
    report.write_term_association(assoc, ws.path("term_association_irrelevant.csv"), side="irrelevant")
    files += [ws.path(n) for n in ("ngram_density.csv", "term_association.csv", "term_association_irrelevant.csv")]

    corpus = _load_corpus(ws)
    dom_t, dom_s = _load_dominant(ws, "tweet"), _load_dominant(ws, "submission")
    tl = report.topic_timeline(corpus.tweets, dom_t, zero_fill=cfg.zero_fill)
    report.write_timeline(tl, ws.path("timeline.csv"))
    geo_s = report.geo_aggregate(corpus.submissions, dom_s, mode="postcode")
    report.write_geo(geo_s, ws.path("geo.csv"))
    geo_t = report.geo_aggregate(corpus.tweets, dom_t, mode="grid")
    report.write_geo(geo_t, ws.path("geo_tweets.csv"))
    files += [ws.path(n) for n in ("timeline.csv", "geo.csv", "geo_tweets.csv")]

    mats = [m for m in (_load_embeddings(ws, k) for k in KINDS) if m is not None]
    kinds = {d.doc_id: d.kind for d in corpus.docs}
    combined = EmbeddingMatrix(
        [i for m in mats for i in m.doc_ids], np.concatenate([m.vectors for m in mats]), mats[0].backend_id
    )
    proj = report.pca_projection(combined)
    report.write_projection(proj, kinds, ws.path("projection.csv"))
    files.append(ws.path("projection.csv"))

    write_json(
        ws.path("report_summary.json"),
        {
            "ngram_density": {g: dens.summary(g) for g in ("top", "bottom")},
            "top_relevant_terms": assoc.top(20),
            "top_irrelevant_terms": assoc.top(20, side="irrelevant"),
            "geo_excluded": {"submission": geo_s.excluded, "tweet": geo_t.excluded},
            "projection_explained_variance": [float(f"{v:.12g}") for v in proj.explained_variance],
        },
    )
    files.append(ws.path("report_summary.json"))
    return files


RUNNERS = {
    "ingest": stage_ingest,
    "prep": stage_prep,
    "topics": stage_topics,
    "keywords": stage_keywords,
    "embed": stage_embed,
    "relevance": stage_relevance,
    "report": stage_report,
}


def run_pipeline(cfg: PipelineConfig, stages):
    """Run the requested stages in dependency order.

    Returns the updated manifest. Prerequisites that are neither requested
    nor already recorded in the manifest raise ``StageError``.
    """
    stages = set(stages)
    unknown = stages - set(STAGES)
    if unknown:
        raise ConfigError(f"unknown stage(s): {sorted(unknown)}")
    check_paths(cfg, stages)
    ws = Workspace(cfg.out)
    ws.out.mkdir(parents=True, exist_ok=True)
    for stage in STAGES:
        if stage not in stages:
            continue
        for dep in DEPENDS[stage]:
            if dep not in stages and not ws.complete(dep):
                raise StageError(stage, f"missing stage: {dep}")
        logger.info("running stage %s", stage)
        try:
            files = RUNNERS[stage](cfg, ws)
        except StageError:
            raise
        except (FloodscopeError, ValueError, OSError, KeyError) as exc:
            raise StageError(stage, str(exc)) from exc
        ws.record(stage, files)
    return ws.manifest()
