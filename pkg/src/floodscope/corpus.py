"""Loading and validation of the two source corpora.

Posts arrive as JSON Lines, one object per line::

    {"id": "...", "created_at": "2022-02-28T03:00:00Z", "user_id": "...",
     "text": "...", "lat": -28.81, "lon": 153.28, "media": ["..."]}

Submissions arrive as a manifest CSV (``id,date,category,postcode,
attachment_count,text_path``) whose ``text_path`` column points at a UTF-8
text file, resolved relative to the manifest's directory.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Union

from .errors import CorpusError

logger = logging.getLogger(__name__)

CATEGORIES = (
    "resident",
    "business",
    "emergency",
    "government",
    "academic",
    "organisation",
    "other",
)

_POSTCODE = re.compile(r"^\d{4}$")
_MANIFEST_FIELDS = ("id", "date", "category", "postcode", "attachment_count", "text_path")


@dataclass(frozen=True)
class Tweet:
    id: str
    created_at: dt.datetime
    user_id: str
    text: str
    geo: tuple[float, float] | None = None
    media_refs: tuple[str, ...] = ()

    def to_dict(self):
        d = {
            "id": self.id,
            "created_at": self.created_at.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "user_id": self.user_id,
            "text": self.text,
            "media": list(self.media_refs),
        }
        if self.geo is not None:
            d["lat"], d["lon"] = self.geo
        return d


@dataclass(frozen=True)
class Submission:
    id: str
    date: dt.date
    category: str
    text: str
    postcode: str | None = None
    attachment_count: int = 0

    def to_dict(self):
        return {
            "id": self.id,
            "date": self.date.isoformat(),
            "category": self.category,
            "postcode": self.postcode,
            "attachment_count": self.attachment_count,
            "text": self.text,
        }


class Document(NamedTuple):
    doc_id: str
    kind: str  # "tweet" or "submission"
    payload: Union[Tweet, Submission]

    @property
    def text(self):
        return self.payload.text


@dataclass(frozen=True)
class Diagnostic:
    source: str
    line: int | None
    message: str

    def __str__(self):
        where = f"{self.source}:{self.line}" if self.line is not None else self.source
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class Provenance:
    """Where a corpus came from.

    ``loaded_at`` is kept in memory only; serialization carries source
    names and content hashes so identical inputs serialize identically.
    """

    sources: tuple[tuple[str, str], ...] = ()  # (file name, sha256)
    loaded_at: dt.datetime | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Corpus:
    docs: tuple[Document, ...]
    provenance: Provenance = Provenance()

    def __len__(self):
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)

    def of_kind(self, kind):
        return [d for d in self.docs if d.kind == kind]

    @property
    def tweets(self):
        return [d.payload for d in self.docs if d.kind == "tweet"]

    @property
    def submissions(self):
        return [d.payload for d in self.docs if d.kind == "submission"]


def _sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_timestamp(value):
    """Parse an ISO-8601 timestamp into an aware UTC datetime at second resolution."""
    if not isinstance(value, str):
        raise ValueError("created_at must be a string")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = dt.datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=dt.timezone.utc)
    return ts.astimezone(dt.timezone.utc).replace(microsecond=0)


def _tweet_from_record(rec):
    if not isinstance(rec, dict):
        raise ValueError("record is not a JSON object")
    for key in ("id", "created_at", "user_id", "text"):
        if key not in rec:
            raise ValueError(f"missing field {key!r}")
    tid = rec["id"]
    if isinstance(tid, int) and not isinstance(tid, bool):
        tid = str(tid)
    if not isinstance(tid, str) or not tid.strip():
        raise ValueError("id must be a non-empty string")
    user = rec["user_id"]
    if isinstance(user, int) and not isinstance(user, bool):
        user = str(user)
    if not isinstance(user, str):
        raise ValueError("user_id must be a string")
    text = rec["text"]
    if not isinstance(text, str) or not text.strip():
        raise ValueError("text must be a non-empty string")
    created = parse_timestamp(rec["created_at"])

    lat, lon = rec.get("lat"), rec.get("lon")
    geo = None
    if lat is not None or lon is not None:
        if lat is None or lon is None:
            raise ValueError("lat and lon must be given together")
        if isinstance(lat, bool) or isinstance(lon, bool):
            raise ValueError("lat/lon must be numbers")
        lat, lon = float(lat), float(lon)
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ValueError(f"geo out of range: ({lat}, {lon})")
        geo = (lat, lon)

    media = rec.get("media") or []
    if not isinstance(media, list) or not all(isinstance(m, str) for m in media):
        raise ValueError("media must be a list of strings")
    return Tweet(tid, created, user, text, geo, tuple(media))


def load_tweets(path):
    """Read a tweets JSONL export.

    Returns ``(tweets, diagnostics)``. Malformed lines are skipped with a
    diagnostic carrying the 1-based line number; a repeated id is fatal.
    Blank lines are not records and are ignored.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CorpusError(f"cannot read tweets file {path}: {exc}") from exc

    tweets, diagnostics, seen = [], [], {}
    for lineno, line in enumerate(raw.decode("utf-8", errors="strict").splitlines(), 1):
        if not line.strip():
            continue
        try:
            tweet = _tweet_from_record(json.loads(line))
        except (ValueError, TypeError) as exc:
            diag = Diagnostic(path.name, lineno, f"skipped malformed record: {exc}")
            logger.warning("%s", diag)
            diagnostics.append(diag)
            continue
        if tweet.id in seen:
            raise CorpusError(
                f"{path.name}:{lineno}: duplicate tweet id {tweet.id!r} "
                f"(first seen on line {seen[tweet.id]})"
            )
        seen[tweet.id] = lineno
        tweets.append(tweet)
    return tweets, diagnostics


def load_submissions(manifest_path):
    """Read the submissions manifest and the text file behind each row.

    Returns ``(submissions, diagnostics)``. Rows whose text file is missing
    or whose fields fail validation are skipped; unknown categories map to
    ``other``.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    try:
        handle = manifest_path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read manifest {manifest_path}: {exc}") from exc

    subs, diagnostics, seen = [], [], set()

    def skip(lineno, message):
        diag = Diagnostic(manifest_path.name, lineno, message)
        logger.warning("%s", diag)
        diagnostics.append(diag)

    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return subs, diagnostics
        missing = [f for f in _MANIFEST_FIELDS if f not in reader.fieldnames]
        if missing:
            raise CorpusError(f"manifest {manifest_path.name} lacks columns {missing}")
        for row in reader:
            lineno = reader.line_num
            sid = (row["id"] or "").strip()
            if not sid:
                skip(lineno, "skipped row: empty id")
                continue
            if sid in seen:
                raise CorpusError(f"{manifest_path.name}:{lineno}: duplicate submission id {sid!r}")
            try:
                date = dt.date.fromisoformat((row["date"] or "").strip())
            except ValueError:
                skip(lineno, f"skipped row {sid}: bad date {row['date']!r}")
                continue
            postcode = (row["postcode"] or "").strip() or None
            if postcode is not None and not _POSTCODE.match(postcode):
                skip(lineno, f"skipped row {sid}: bad postcode {postcode!r}")
                continue
            try:
                attachments = int((row["attachment_count"] or "0").strip())
            except ValueError:
                attachments = -1
            if attachments < 0:
                skip(lineno, f"skipped row {sid}: bad attachment_count {row['attachment_count']!r}")
                continue
            category = (row["category"] or "").strip().lower()
            if category not in CATEGORIES:
                diag = Diagnostic(
                    manifest_path.name, lineno, f"row {sid}: unknown category {row['category']!r} mapped to 'other'"
                )
                logger.warning("%s", diag)
                diagnostics.append(diag)
                category = "other"
            text_path = base / (row["text_path"] or "").strip()
            try:
                text = text_path.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                skip(lineno, f"skipped row {sid}: cannot read text file {row['text_path']!r} ({exc.__class__.__name__})")
                continue
            if not text.strip():
                skip(lineno, f"skipped row {sid}: empty text")
                continue
            seen.add(sid)
            subs.append(Submission(sid, date, category, text, postcode, attachments))
    return subs, diagnostics


def build_corpus(tweets=(), submissions=(), sources=()):
    """Merge both kinds into one corpus ordered by doc_id.

    ``sources`` is an iterable of file paths hashed into the provenance.
    Duplicate ids are not rejected here; :func:`validate_corpus` reports them.
    """
    docs = [Document(t.id, "tweet", t) for t in tweets]
    docs += [Document(s.id, "submission", s) for s in submissions]
    docs.sort(key=lambda d: (d.doc_id, d.kind))
    prov = Provenance(
        tuple((Path(p).name, _sha256_file(p)) for p in sources),
        dt.datetime.now(dt.timezone.utc),
    )
    return Corpus(tuple(docs), prov)


@dataclass
class ValidationReport:
    duplicate_ids: list = field(default_factory=list)
    empty_texts: list = field(default_factory=list)
    geo_out_of_range: list = field(default_factory=list)

    def __bool__(self):
        return bool(self.duplicate_ids or self.empty_texts or self.geo_out_of_range)

    @property
    def violations(self):
        return len(self.duplicate_ids) + len(self.empty_texts) + len(self.geo_out_of_range)

    def to_dict(self):
        return {
            "duplicate_ids": list(self.duplicate_ids),
            "empty_texts": list(self.empty_texts),
            "geo_out_of_range": list(self.geo_out_of_range),
        }


def validate_corpus(corpus):
    """Report duplicate ids, empty texts and out-of-range coordinates."""
    report = ValidationReport()
    counts = {}
    for doc in corpus.docs:
        counts[doc.doc_id] = counts.get(doc.doc_id, 0) + 1
    report.duplicate_ids = sorted(i for i, c in counts.items() if c > 1)
    for doc in corpus.docs:
        if not doc.payload.text.strip():
            report.empty_texts.append(doc.doc_id)
        if doc.kind == "tweet" and doc.payload.geo is not None:
            lat, lon = doc.payload.geo
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                report.geo_out_of_range.append(doc.doc_id)
    return report


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def corpus_to_jsonl(corpus):
    """Serialize a corpus; identical corpora give identical strings."""
    lines = [_dumps({"provenance": [list(s) for s in corpus.provenance.sources]})]
    for doc in corpus.docs:
        lines.append(_dumps({"doc_id": doc.doc_id, "kind": doc.kind, "payload": doc.payload.to_dict()}))
    return "\n".join(lines) + "\n"


def corpus_from_jsonl(text):
    lines = text.splitlines()
    if not lines:
        return Corpus(())
    header = json.loads(lines[0])
    docs = []
    for line in lines[1:]:
        rec = json.loads(line)
        p = rec["payload"]
        if rec["kind"] == "tweet":
            geo = (p["lat"], p["lon"]) if "lat" in p else None
            payload = Tweet(
                p["id"], parse_timestamp(p["created_at"]), p["user_id"], p["text"], geo, tuple(p["media"])
            )
        else:
            payload = Submission(
                p["id"],
                dt.date.fromisoformat(p["date"]),
                p["category"],
                p["text"],
                p["postcode"],
                p["attachment_count"],
            )
        docs.append(Document(rec["doc_id"], rec["kind"], payload))
    prov = Provenance(tuple(tuple(s) for s in header.get("provenance", [])))
    return Corpus(tuple(docs), prov)
