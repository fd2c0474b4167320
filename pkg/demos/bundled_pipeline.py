"""
The whole pipeline on the bundled corpus
========================================

Run every stage on the synthetic tweets and submissions in
``data/synthetic`` and look at a few of the outputs.
"""

import json
from pathlib import Path

from floodscope._io import read_csv
from floodscope.pipeline import STAGES, load_config, run_pipeline

here = Path(__file__).resolve().parent
cfg = load_config(here.parent / "data" / "synthetic" / "run.toml")
manifest = run_pipeline(cfg, set(STAGES))
for stage in STAGES:
    print(f"{stage:10s} {len(manifest[stage])} files")

###############################################################################
# Topic counts chosen by coherence, and the leading keywords of one topic.

for kind in ("tweet", "submission"):
    coherence = json.loads((cfg.out / "topics" / kind / "coherence.json").read_text())
    print(kind, "K =", coherence["chosen_K"])

keywords = json.loads((cfg.out / "keywords" / "tweet" / "keywords.json").read_text())
topic, ranked = next(iter(sorted(keywords.items())))
print("topic", topic, [k["ngram"] for k in ranked[:5]])

###############################################################################
# The most and least relevant tweets.

rel = sorted(read_csv(cfg.out / "relevance.csv"), key=lambda r: -float(r["index"]))
texts = {}
with open(cfg.out / "clean.jsonl", encoding="utf-8") as f:
    for line in f:
        rec = json.loads(line)
        texts[rec["doc_id"]] = rec["text"]
for row in rel[:3] + rel[-3:]:
    print(f"{float(row['index']):.3f} d{row['decile']:>2}  {texts[row['tweet_id']][:70]}")

summary = json.loads((cfg.out / "report_summary.json").read_text())
print("mean N-grams per tweet, top vs bottom decile:",
      summary["ngram_density"]["top"]["mean"], summary["ngram_density"]["bottom"]["mean"])

###############################################################################
# Per-tweet versus shared lambda. With its own lambda each tweet's index
# carries that lambda's scale (for similarities near zero, -1/y tends to
# lambda), so tweets sharing only filler words with the submissions can rank
# high. One lambda for all tweets keeps the index a monotone function of
# median similarity.

import numpy as np

from floodscope.embed import EmbeddingMatrix
from floodscope.relevance import decile_partition, score_posts, select_reference_core
from floodscope.synthetic import NOISE_THEMES, vocab


def load(kind):
    meta = json.loads((cfg.out / "embeddings" / f"{kind}_ids.json").read_text())
    return EmbeddingMatrix(meta["doc_ids"], np.load(cfg.out / "embeddings" / f"{kind}.npy"), meta["backend_id"])


noise_words = {w for ws in vocab(NOISE_THEMES).values() for w in ws}


def off_topic(text):
    toks = text.replace(".", " ").split()
    return sum(t in noise_words for t in toks) > len(toks) / 4


ref = select_reference_core(load("submission"), cfg.q)
tweets = load("tweet")
for mode in ("per_tweet", "global"):
    top = decile_partition(score_posts(tweets, ref, cfg.epsilon, mode).scores).top
    share = np.mean([not off_topic(texts[t]) for t in top])
    print(f"{mode:9s}: flood share of the top decile {share:.2f}")
