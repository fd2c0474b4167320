"""Seeded synthetic corpora for tests, demos and the bundled example run."""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .textprep import BowDoc, CleanDoc

THEMES = {
    "warnings": (
        "rain warning river rising levels evacuate alert severe weather bureau storm heavy rainfall "
        "creek gauge peak downpour downstream catchment forecast flash siren overnight upstream"
    ),
    "rescue": (
        "rescue boat stranded roof trapped volunteers helicopter emergency service crews water "
        "dinghy neighbours saved rescued elderly dogs swim current calls triple stuck"
    ),
    "recovery": (
        "donations clothes food shelter evacuation centre cleanup mud volunteers community donate "
        "blankets supplies pantry generator clean debris skip bins support fundraiser"
    ),
    "government": (
        "government funding grants insurance premier minister inquiry council response disaster "
        "payment relief buyback levee planning budget claim insurer assessment federal"
    ),
    "housing": (
        "house home damaged destroyed flooded ceiling walls carpet furniture rebuild mould "
        "tenants rental displaced caravan ground floor belongings insurance repairs"
    ),
}

NOISE_THEMES = {
    "sport": (
        "football match goal team season coach players league final score stadium striker "
        "weekend fans cricket innings wicket batting tournament referee"
    ),
    "food": (
        "pizza coffee brunch recipe chocolate dinner restaurant delicious cafe burger pasta "
        "dessert breakfast sushi noodles cheese baking cake flavour menu"
    ),
    "music": (
        "album concert guitar song playlist festival singer tour band vinyl lyrics drummer "
        "chorus melody gig stage encore acoustic remix headline"
    ),
}

FILLER = "the a in on at of and to is was we our my this".split()

POSTCODES = ("2480", "2470", "2471", "2472", "2474", "2477", "2478", "2479", "2483", "2484")

CATEGORY_WEIGHTS = {
    "resident": 0.55,
    "business": 0.12,
    "emergency": 0.06,
    "government": 0.07,
    "academic": 0.04,
    "organisation": 0.12,
    "other": 0.04,
}

INSUBSTANTIAL = (
    "Please see attached. Please see attached.",
    "Submission attached as requested. Thank you. Thank you.",
    "Refer to attached document. Refer to attached document.",
    "No comment. No comment. No comment.",
    "I agree with the previous submissions. I agree.",
    "Attached. Attached. Attached.",
    "Same as above. Same as above.",
    "Kind regards. Kind regards.",
)


def vocab(theme_map):
    return {k: v.split() for k, v in theme_map.items()}


def _sentence(rng, words, n_min=4, n_max=10, filler=0.0):
    n = int(rng.integers(n_min, n_max + 1))
    ranks = np.arange(1, len(words) + 1)
    p = 1.0 / ranks
    p /= p.sum()
    toks = list(rng.choice(words, size=n, p=p))
    if filler:
        out = []
        for t in toks:
            if rng.random() < filler:
                out.append(str(rng.choice(FILLER)))
            out.append(str(t))
        toks = out
    return " ".join(toks)


def _text(rng, words, sentences, **kw):
    return ". ".join(_sentence(rng, words, **kw) for _ in range(sentences)) + "."


# --------------------------------------------------------------------------
# planted topic model


@dataclass
class PlantedCorpus:
    bow_docs: list
    phi: np.ndarray
    theta: np.ndarray
    terms: list


def planted_lda_corpus(K=3, V=30, n_docs=500, doc_len=50, doc_alpha=0.1, leak=0.02, seed=0):
    """Documents sampled from LDA with near-disjoint topic supports.

    Topic k puts mass ``1 - leak`` uniformly on its own block of V/K words
    and spreads ``leak`` over the rest.
    """
    rng = np.random.default_rng(seed)
    block = V // K
    phi = np.full((K, V), leak / (V - block))
    for k in range(K):
        phi[k, k * block : (k + 1) * block] = (1.0 - leak) / block
    theta = rng.dirichlet(np.full(K, doc_alpha), size=n_docs)
    docs = []
    for d in range(n_docs):
        z = rng.choice(K, size=doc_len, p=theta[d])
        w = np.array([rng.choice(V, p=phi[k]) for k in z])
        idx, cnt = np.unique(w, return_counts=True)
        docs.append(BowDoc(f"d{d:04d}", idx, cnt))
    return PlantedCorpus(docs, phi, theta, [f"w{v:02d}" for v in range(V)])


# --------------------------------------------------------------------------
# relevant-vs-noise posts


@dataclass
class RelevanceFixture:
    reference: list  # CleanDoc
    relevant: list
    noise: list


def relevance_corpus(n_reference=200, n_relevant=500, n_noise=500, seed=0):
    """Reference submissions plus posts drawn from the reference vocabulary
    ("relevant") or from a disjoint one ("noise")."""
    rng = np.random.default_rng(seed)
    ref_words = [w for ws in vocab(THEMES).values() for w in ws]
    noise_words = [w for ws in vocab(NOISE_THEMES).values() for w in ws]
    assert set(ref_words).isdisjoint(noise_words)
    # shuffle so the Zipf weights of _sentence do not follow theme order
    ref_words = list(rng.permutation(sorted(set(ref_words))))
    noise_words = list(rng.permutation(sorted(set(noise_words))))

    reference = [CleanDoc(f"s{i:04d}", _text(rng, ref_words, int(rng.integers(6, 12)))) for i in range(n_reference)]
    relevant = [CleanDoc(f"r{i:04d}", _text(rng, ref_words, int(rng.integers(1, 4)))) for i in range(n_relevant)]
    noise = [CleanDoc(f"n{i:04d}", _text(rng, noise_words, int(rng.integers(1, 4)))) for i in range(n_noise)]
    return RelevanceFixture(reference, relevant, noise)


# --------------------------------------------------------------------------
# bundled demo corpus (raw files in the ingest formats)

_START = dt.datetime(2022, 2, 20, tzinfo=dt.timezone.utc)
_PEAKS = (dt.datetime(2022, 2, 28, tzinfo=dt.timezone.utc), dt.datetime(2022, 3, 30, tzinfo=dt.timezone.utc))
_SPAN_DAYS = 60


def _decorate(rng, text):
    """Add the clutter cleaning has to remove: mentions, tags, links, digits."""
    parts = []
    if rng.random() < 0.3:
        parts.append(f"@user{int(rng.integers(1000))}")
    parts.append(text[0].upper() + text[1:])
    if rng.random() < 0.4:
        parts.append(str(rng.choice(["#NSWFloods", "#Lismore", "#floods2022", "#NorthernRivers"])))
    if rng.random() < 0.2:
        parts.append(f"https://t.co/{int(rng.integers(10**6)):x}")
    if rng.random() < 0.2:
        parts.append(f"{int(rng.integers(1, 300))}mm!!")
    return " ".join(parts)


def write_demo_corpus(out_dir, n_tweets=850, n_submissions=150, seed=2022):
    """Write tweets.jsonl and submissions/manifest.csv (+ text files) under ``out_dir``."""
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    (out / "submissions" / "text").mkdir(parents=True, exist_ok=True)
    themes, noise = vocab(THEMES), vocab(NOISE_THEMES)
    flood_names = sorted(themes)
    noise_names = sorted(noise)

    lines = []
    for i in range(n_tweets):
        is_noise = rng.random() < 0.3
        if is_noise:
            words = noise[noise_names[int(rng.integers(len(noise_names)))]]
            when = _START + dt.timedelta(seconds=int(rng.integers(_SPAN_DAYS * 86400)))
        else:
            words = themes[flood_names[int(rng.integers(len(flood_names)))]]
            peak = _PEAKS[int(rng.integers(2))]
            offset = float(np.clip(rng.normal(0, 3.0), -8, 20))
            when = peak + dt.timedelta(days=offset)
        text = _decorate(rng, _text(rng, words, int(rng.integers(1, 4)), n_min=3, n_max=9, filler=0.3))
        rec = {
            "id": f"t{i:05d}",
            "created_at": when.replace(microsecond=0).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "user_id": f"u{int(rng.integers(300)):04d}",
            "text": text,
            "media": [],
        }
        if rng.random() < 0.05:
            rec["lat"] = round(-28.81 + float(rng.normal(0, 0.3)), 4)
            rec["lon"] = round(153.28 + float(rng.normal(0, 0.2)), 4)
        lines.append(json.dumps(rec, ensure_ascii=False, sort_keys=True))
    (out / "tweets.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")

    cats = list(CATEGORY_WEIGHTS)
    weights = np.array(list(CATEGORY_WEIGHTS.values()))
    weights /= weights.sum()
    with open(out / "submissions" / "manifest.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "date", "category", "postcode", "attachment_count", "text_path"])
        n_junk = max(1, n_submissions // 25)
        for i in range(n_submissions):
            sid = f"sub{i:04d}"
            if i < n_junk:
                body = INSUBSTANTIAL[i % len(INSUBSTANTIAL)]
            else:
                # submissions mix two themes, as long documents do
                picks = rng.choice(flood_names, size=2, replace=False)
                body = "\n\n".join(
                    _text(rng, themes[p], int(rng.integers(4, 8)), n_min=6, n_max=14, filler=0.25) for p in picks
                )
            rel = f"text/{sid}.txt"
            (out / "submissions" / rel).write_text(body + "\n", encoding="utf-8")
            date = dt.date(2022, 5, 1) + dt.timedelta(days=int(rng.integers(60)))
            postcode = str(rng.choice(POSTCODES)) if rng.random() < 0.8 else ""
            cat = str(rng.choice(cats, p=weights))
            w.writerow([sid, date.isoformat(), cat, postcode, int(rng.integers(0, 4)), rel])
    return out


if __name__ == "__main__":  # pragma: no cover
    import sys

    write_demo_corpus(sys.argv[1] if len(sys.argv) > 1 else "data/synthetic")
