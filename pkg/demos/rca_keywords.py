"""
Keywords by comparative advantage
=================================

Which phrases does a topic use more than the corpus does overall? A toy
example first, then the ranking rule.
"""

from floodscope.keywords import TopicNgramProfile, rank_keywords, rca_scores

counts = {
    "rescue": {"boat": 12, "roof": 9, "water": 20, "boat rescue": 5},
    "recovery": {"donate": 15, "mud": 8, "water": 10, "skip bins": 4},
    "government": {"funding": 14, "inquiry": 6, "water": 2},
}
table = rca_scores(TopicNgramProfile.from_counts(counts))

# "water" is shared, so it sits near 1 in the topic that uses it most
for topic in table.topics:
    print(topic, {g: round(table.value(topic, g), 3) for g in ("water", "boat", "donate") if table.value(topic, g)})

###############################################################################
# Ranking prefers longer phrases, then higher RCA; rare phrases are skipped.

for topic, items in rank_keywords(table, top_k=3, min_freq=3).items():
    print(topic, [(k["ngram"], round(k["rca"], 2)) for k in items])
