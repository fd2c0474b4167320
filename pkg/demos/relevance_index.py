"""
Scoring posts against a reference corpus
========================================

Reference documents and two populations of short posts: one written with
the reference vocabulary, one with an unrelated vocabulary. The relevance
index should rank the first group above the second.
"""

import numpy as np
from scipy import stats

from floodscope.embed import LocalHashEmbedder, embed_corpus
from floodscope.relevance import (
    decile_partition,
    fit_boxcox_lambda,
    score_posts,
    select_reference_core,
    similarity_vector,
)
from floodscope.synthetic import relevance_corpus

fx = relevance_corpus(seed=0)
backend = LocalHashEmbedder(d=256)
print(fx.relevant[0].cleaned_text)
print(fx.noise[0].cleaned_text)

###############################################################################
# Keep the core of the reference set: rows whose cosine distance to the
# centroid lies within the 95th percentile.

ref = select_reference_core(embed_corpus(fx.reference, backend), q=0.95)
print(f"reference rows kept {ref.n}, dropped {len(ref.excluded)}, threshold {ref.threshold:.4f}")

###############################################################################
# One post in detail: its similarities are skewed, Box-Cox evens them out.

posts = embed_corpus(fx.relevant + fx.noise, backend)
s = similarity_vector(posts.row(fx.relevant[0].doc_id), ref)
params = fit_boxcox_lambda(s)
print(f"similarities: median {np.median(s):.3f}, skew {stats.skew(s):+.3f}, lambda {params.lam}")

###############################################################################
# Every post, each with its own lambda, then deciles by index.

result = score_posts(posts, ref)
part = decile_partition(result.scores)
relevant = {d.doc_id for d in fx.relevant}
purity = np.mean([t in relevant for t in part.top])
index = {s.tweet_id: s.index for s in result.scores}
pos = [index[d.doc_id] for d in fx.relevant]
neg = [index[d.doc_id] for d in fx.noise]
print(f"mean index: relevant {np.mean(pos):.3f}, noise {np.mean(neg):.3f}")
print(f"top-decile purity {purity:.2f}")
print(f"Mann-Whitney AUC {stats.mannwhitneyu(pos, neg).statistic / (len(pos) * len(neg)):.3f}")
