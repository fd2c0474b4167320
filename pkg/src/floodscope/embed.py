"""Document embeddings behind a pluggable backend, with a persistent cache.

Two backends ship:

* :class:`LocalHashEmbedder` - signed feature hashing of unigrams and
  within-sentence bigrams. Deterministic and corpus-independent; used for
  tests and offline runs.
* :class:`RemoteEmbedder` - client for an HTTP embedding service::

      POST {endpoint}/v1/embed   {"model": str, "texts": [str]}
      200 -> {"dim": int, "vectors": [[float, ...], ...]}

  429 and 5xx responses (and timeouts) are retried with exponential
  backoff and jitter; other 4xx responses are permanent failures.

Cache file layout, one record after another, all integers little-endian::

    u32 payload_len | sha256(text) 32B | u16 id_len | backend_id | u32 dim | dim x f32
"""

from __future__ import annotations

import hashlib
import logging
import os
import random
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from .errors import EmbeddingError

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "EMBED_ENDPOINT"
MIN_LOCAL_DIM = 16


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray
    backend_id: str
    source_doc_id: str | None = None

    @property
    def empty(self):
        return not np.any(self.vector)

    @property
    def d(self):
        return self.vector.shape[0]


@dataclass
class EmbeddingMatrix:
    doc_ids: list
    vectors: np.ndarray  # n x d, float32
    backend_id: str

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.doc_ids):
            raise ValueError("vectors must be an (n, d) array matching doc_ids")

    @property
    def d(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.doc_ids)

    def row(self, doc_id):
        return self.vectors[self.doc_ids.index(doc_id)]

    def subset(self, ids):
        pos = {d: i for i, d in enumerate(self.doc_ids)}
        ids = list(ids)
        return EmbeddingMatrix(ids, self.vectors[[pos[i] for i in ids]], self.backend_id)


@dataclass(frozen=True)
class EmbeddingBackendSpec:
    kind: str  # "local" or "remote"
    endpoint: str | None = None
    model: str | None = None
    d: int = 256
    hash_seed: int = 0

    def __post_init__(self):
        if self.kind == "remote":
            if not self.resolved_endpoint() or not self.model:
                raise ValueError("remote backend needs an endpoint and a model name")
        elif self.kind == "local":
            if self.d < MIN_LOCAL_DIM:
                raise ValueError(f"local backend needs d >= {MIN_LOCAL_DIM}")
        else:
            raise ValueError(f"unknown backend kind {self.kind!r}")

    def resolved_endpoint(self):
        return os.environ.get(ENDPOINT_ENV) or self.endpoint


# --------------------------------------------------------------------------
# local backend


def _hash64(data: bytes, seed: int, person: bytes) -> int:
    key = (seed % (1 << 64)).to_bytes(8, "little")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8, key=key, person=person).digest(), "little")


def text_features(text):
    """Unigrams and within-sentence bigrams of cleaned text, in text order."""
    feats = []
    for sentence in text.split("."):
        toks = sentence.split()
        feats.extend(toks)
        feats.extend(f"{a} {b}" for a, b in zip(toks, toks[1:]))
    return feats


def local_embed(text: str, d: int = 256, hash_seed: int = 0) -> np.ndarray:
    """Signed-hash embedding, L2-normalized; empty text gives the zero vector."""
    if d < MIN_LOCAL_DIM:
        raise ValueError(f"d must be >= {MIN_LOCAL_DIM}")
    v = np.zeros(d, dtype=np.float64)
    for f in text_features(text):
        raw = f.encode("utf-8")
        idx = _hash64(raw, hash_seed, b"fs-index") % d
        v[idx] += 1.0 if _hash64(raw, hash_seed, b"fs-sign") & 1 else -1.0
    norm = np.sqrt(np.dot(v, v))
    if norm > 0:
        v /= norm
    return v.astype(np.float32)


class LocalHashEmbedder:
    def __init__(self, d=256, hash_seed=0):
        if d < MIN_LOCAL_DIM:
            raise ValueError(f"d must be >= {MIN_LOCAL_DIM}")
        self.d = d
        self.hash_seed = hash_seed
        self.backend_id = f"local-hash:d={d}:seed={hash_seed}"

    def embed(self, texts):
        if not texts:
            return np.zeros((0, self.d), dtype=np.float32)
        return np.stack([local_embed(t, self.d, self.hash_seed) for t in texts])


# --------------------------------------------------------------------------
# remote backend


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 5
    base_delay: float = 0.5
    max_delay: float = 30.0
    jitter: float = 0.25  # fraction of the delay added at random

    def delay(self, attempt, rng=random):
        d = min(self.max_delay, self.base_delay * (2**attempt))
        return d * (1.0 + self.jitter * rng.random())


class _Retryable(Exception):
    pass


class RemoteEmbedder:
    """Batched, bounded-parallel client for the embedding service."""

    def __init__(
        self,
        endpoint,
        model,
        batch_size=32,
        max_parallel=4,
        retry=RetryPolicy(),
        timeout=60.0,
        transport=None,
        sleep=time.sleep,
    ):
        if batch_size < 1 or max_parallel < 1:
            raise ValueError("batch_size and max_parallel must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.batch_size = batch_size
        self.max_parallel = max_parallel
        self.retry = retry
        self.timeout = timeout
        self.transport = transport
        self.sleep = sleep
        self.backend_id = f"remote:{model}"
        self.retries = 0
        self._lock = threading.Lock()
        self._rng = random.Random()

    def _post(self, client, texts, batch_no):
        attempt = 0
        while True:
            try:
                resp = client.post("/v1/embed", json={"model": self.model, "texts": texts})
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise _Retryable(f"HTTP {resp.status_code}")
                if resp.status_code >= 400:
                    raise EmbeddingError(
                        f"batch {batch_no}: permanent HTTP {resp.status_code} from embedding service: "
                        f"{resp.text[:200]}"
                    )
                return self._parse(resp.json(), len(texts), batch_no)
            except (_Retryable, httpx.TimeoutException, httpx.TransportError) as exc:
                if attempt >= self.retry.max_retries:
                    raise EmbeddingError(
                        f"batch {batch_no}: giving up after {attempt} retries ({exc})"
                    ) from exc
                with self._lock:
                    delay = self.retry.delay(attempt, self._rng)
                    self.retries += 1
                logger.warning("batch %d: %s, retry %d in %.2fs", batch_no, exc, attempt + 1, delay)
                self.sleep(delay)
                attempt += 1

    @staticmethod
    def _parse(payload, n, batch_no):
        try:
            dim = int(payload["dim"])
            vectors = np.asarray(payload["vectors"], dtype=np.float32)
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(f"batch {batch_no}: malformed response ({exc})") from exc
        if vectors.shape != (n, dim):
            raise EmbeddingError(f"batch {batch_no}: expected {n} vectors of dim {dim}, got shape {vectors.shape}")
        if not np.all(np.isfinite(vectors)):
            raise EmbeddingError(f"batch {batch_no}: non-finite components in response")
        return vectors

    def embed(self, texts):
        texts = list(texts)
        if not texts:
            return np.zeros((0, 0), dtype=np.float32)
        batches = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        with httpx.Client(base_url=self.endpoint, timeout=self.timeout, transport=self.transport) as client:
            with ThreadPoolExecutor(max_workers=self.max_parallel) as pool:
                futures = [pool.submit(self._post, client, b, i) for i, b in enumerate(batches)]
                try:
                    results = [f.result() for f in futures]
                except BaseException:
                    for f in futures:
                        f.cancel()
                    raise
        dims = {r.shape[1] for r in results}
        if len(dims) != 1:
            raise EmbeddingError(f"embedding dimension differs across responses: {sorted(dims)}")
        return np.concatenate(results, axis=0)


def remote_embed_batch(texts, spec: EmbeddingBackendSpec, batch_size=32, max_parallel=4, retry=RetryPolicy(), **kw):
    """Embed texts through the remote service; results follow input order."""
    texts = list(texts)
    if not texts:
        return []
    client = RemoteEmbedder(spec.resolved_endpoint(), spec.model, batch_size, max_parallel, retry, **kw)
    vectors = client.embed(texts)
    return [Embedding(v, client.backend_id) for v in vectors]


def make_backend(spec: EmbeddingBackendSpec, **remote_kw):
    if spec.kind == "local":
        return LocalHashEmbedder(spec.d, spec.hash_seed)
    return RemoteEmbedder(spec.resolved_endpoint(), spec.model, **remote_kw)


# --------------------------------------------------------------------------
# cache

_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")


def content_hash(text):
    return hashlib.sha256(text.encode("utf-8")).digest()


def encode_record(digest: bytes, backend_id: str, vector) -> bytes:
    bid = backend_id.encode("utf-8")
    vec = np.asarray(vector, dtype="<f4")
    payload = digest + _U16.pack(len(bid)) + bid + _U32.pack(vec.shape[0]) + vec.tobytes()
    return _U32.pack(len(payload)) + payload


def _decode_payload(payload):
    if len(payload) < 32 + 2:
        raise ValueError("payload too short")
    digest = payload[:32]
    (blen,) = _U16.unpack_from(payload, 32)
    pos = 34 + blen
    if len(payload) < pos + 4:
        raise ValueError("payload too short for backend id")
    bid = payload[34:pos].decode("utf-8")
    (dim,) = _U32.unpack_from(payload, pos)
    pos += 4
    if len(payload) != pos + 4 * dim:
        raise ValueError("payload length does not match dim")
    vec = np.frombuffer(payload, dtype="<f4", count=dim, offset=pos).astype(np.float32)
    return digest, bid, vec


class EmbeddingCache:
    """Append-only, content-addressed embedding store (single writer)."""

    def __init__(self, path):
        self.path = Path(path)
        self.entries = {}
        self.load()

    def load(self):
        self.entries = {}
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        pos, good = 0, 0
        while pos < len(data):
            if pos + 4 > len(data):
                break
            (n,) = _U32.unpack_from(data, pos)
            if pos + 4 + n > len(data):
                break
            try:
                digest, bid, vec = _decode_payload(data[pos + 4 : pos + 4 + n])
            except (ValueError, UnicodeDecodeError) as exc:
                logger.warning("embedding cache %s is corrupt at byte %d (%s); rebuilding", self.path, pos, exc)
                self.entries = {}
                self.path.write_bytes(b"")
                return
            self.entries[(digest, bid)] = vec
            pos += 4 + n
            good = pos
        if good < len(data):
            logger.warning("embedding cache %s: dropping truncated final record", self.path)
            with open(self.path, "r+b") as f:
                f.truncate(good)

    def get(self, text, backend_id):
        return self.entries.get((content_hash(text), backend_id))

    def __contains__(self, key):
        text, backend_id = key
        return (content_hash(text), backend_id) in self.entries

    def __len__(self):
        return len(self.entries)

    def put_many(self, items, backend_id):
        """Append (text, vector) pairs and flush them to disk."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "ab") as f:
            for text, vec in items:
                digest = content_hash(text)
                vec = np.asarray(vec, dtype=np.float32)
                f.write(encode_record(digest, backend_id, vec))
                self.entries[(digest, backend_id)] = vec
            f.flush()
            os.fsync(f.fileno())


def embed_corpus(docs, backend, cache_path=None) -> EmbeddingMatrix:
    """Embed CleanDocs, serving repeats from the cache.

    ``docs`` are objects with ``doc_id`` and ``cleaned_text``. Cache misses
    go to the backend in one ``embed`` call; rows come back in doc_id order.
    """
    docs = sorted(docs, key=lambda d: d.doc_id)
    cache = EmbeddingCache(cache_path) if cache_path is not None else None
    bid = backend.backend_id
    misses, seen = [], set()
    for d in docs:
        if d.cleaned_text in seen or (cache is not None and (d.cleaned_text, bid) in cache):
            continue
        seen.add(d.cleaned_text)
        misses.append(d.cleaned_text)
    fresh = {}
    if misses:
        vectors = np.asarray(backend.embed(misses), dtype=np.float32)
        if vectors.shape[0] != len(misses):
            raise EmbeddingError("backend returned the wrong number of vectors")
        fresh = dict(zip(misses, vectors))
        if cache is not None:
            cache.put_many(fresh.items(), bid)
    rows = [fresh[d.cleaned_text] if d.cleaned_text in fresh else cache.get(d.cleaned_text, bid) for d in docs]
    if not rows:
        return EmbeddingMatrix([], np.zeros((0, getattr(backend, "d", 0)), dtype=np.float32), bid)
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise EmbeddingError(f"cached vectors disagree on dimension: {sorted(dims)}")
    return EmbeddingMatrix([d.doc_id for d in docs], np.stack(rows), bid)
