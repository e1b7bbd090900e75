"""Embedding providers and the on-disk embedding matrix format.

Three interchangeable sources produce the n x dim matrix every classifier
and distance computation runs on: precomputed files (binary ALEMB1 or a
JSONL fallback), a remote embedding endpoint, and a built-in deterministic
hashing embedder that needs no model and no network.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

__all__ = [
    "EmbeddingError",
    "EmbeddingMatrix",
    "EmbeddingProvider",
    "load_embedding_file",
    "write_embedding_file",
    "fetch_remote",
    "hash_embed",
    "HashEmbedder",
    "RemoteEmbedder",
]

MAGIC = b"ALEMB1"
_HEADER = struct.Struct("<IQ")  # u32 dim, u64 count


class EmbeddingError(ValueError):
    """Malformed embedding file or failed embedding request."""


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """n x dim float32 matrix; row i is aligned with corpus instance index i."""

    vectors: np.ndarray

    def __post_init__(self) -> None:
        v = self.vectors
        if v.ndim != 2:
            raise EmbeddingError(f"expected a 2-D matrix, got shape {v.shape}")
        if v.shape[0] > 0 and v.shape[1] < 1:
            raise EmbeddingError("embedding dim must be >= 1")
        if not np.isfinite(v).all():
            raise EmbeddingError("non-finite value in embedding matrix")
        if v.dtype != np.float32:
            object.__setattr__(self, "vectors", v.astype(np.float32))

    @property
    def n(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


class EmbeddingProvider(Protocol):
    """Maps an ordered list of texts to an EmbeddingMatrix in the same order."""

    def embed(self, texts: Sequence[str]) -> EmbeddingMatrix: ...


def write_embedding_file(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the binary format: magic, u32 dim, u64 count, (u64 id, dim f32) records."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(matrix.dim, matrix.n))
        for i in range(matrix.n):
            fh.write(struct.pack("<Q", i))
            fh.write(matrix.vectors[i].astype("<f4").tobytes())


def load_embedding_file(path: str | Path, expected_n: int) -> EmbeddingMatrix:
    """Load an ALEMB1 file (or the JSONL fallback) and validate it.

    Records may appear in any id order; the returned rows are sorted by id,
    and ids must be exactly 0..n-1.
    """
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(len(MAGIC))
        if head == MAGIC:
            return _load_binary(fh, path, expected_n)
    return _load_jsonl(path, expected_n)


def _load_binary(fh, path: Path, expected_n: int) -> EmbeddingMatrix:
    header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise EmbeddingError(f"{path}: truncated file (incomplete header)")
    dim, count = _HEADER.unpack(header)
    if dim < 1:
        raise EmbeddingError(f"{path}: embedding dim must be >= 1")
    if count != expected_n:
        raise EmbeddingError(
            f"{path}: count mismatch (file has {count}, expected {expected_n})"
        )
    record = np.dtype([("id", "<u8"), ("vec", "<f4", (dim,))])
    raw = fh.read()
    if len(raw) != count * record.itemsize:
        raise EmbeddingError(
            f"{path}: truncated file ({len(raw)} payload bytes for {count} records)"
        )
    records = np.frombuffer(raw, dtype=record)
    return _assemble(records["id"].astype(np.int64), records["vec"], path, expected_n)


def _load_jsonl(path: Path, expected_n: int) -> EmbeddingMatrix:
    ids: list[int] = []
    rows: list[list[float]] = []
    dim: int | None = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or "id" not in obj or "vector" not in obj:
                raise EmbeddingError(f"{path}:{lineno}: expected {{id, vector}}")
            vec = obj["vector"]
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: dimension drift ({len(vec)} vs {dim})"
                )
            ids.append(int(obj["id"]))
            rows.append(vec)
    if len(ids) != expected_n:
        raise EmbeddingError(
            f"{path}: count mismatch (file has {len(ids)}, expected {expected_n})"
        )
    mat = np.asarray(rows, dtype=np.float64)
    return _assemble(np.asarray(ids, dtype=np.int64), mat, path, expected_n)


def _assemble(ids: np.ndarray, vecs: np.ndarray, path: Path, n: int) -> EmbeddingMatrix:
    if len(np.unique(ids)) != len(ids):
        raise EmbeddingError(f"{path}: duplicate id in embedding file")
    if n > 0 and (ids.min() != 0 or ids.max() != n - 1):
        raise EmbeddingError(f"{path}: id gap (ids must be exactly 0..{n - 1})")
    order = np.argsort(ids)
    vecs = np.asarray(vecs)[order]
    if not np.isfinite(vecs).all():
        raise EmbeddingError(f"{path}: non-finite value in embedding file")
    return EmbeddingMatrix(vectors=vecs.astype(np.float32))


def fetch_remote(
    endpoint: str,
    texts: Sequence[str],
    batch_size: int,
    *,
    retries: int = 3,
    backoff: float = 0.5,
    concurrency: int = 1,
    timeout: float = 60.0,
    session: requests.Session | None = None,
) -> EmbeddingMatrix:
    """Fetch embeddings over HTTP in batches, preserving input order.

    Each batch POSTs ``{"texts": [...]}`` and expects ``{"embeddings": [[...]]}``.
    Non-200 responses and transport errors are transient: retried up to
    ``retries`` times with exponential backoff before giving up.
    """
    if batch_size < 1:
        raise EmbeddingError("batch_size must be >= 1")
    if not texts:
        return EmbeddingMatrix(vectors=np.zeros((0, 0), dtype=np.float32))
    sess = session or requests.Session()
    batches = [list(texts[i : i + batch_size]) for i in range(0, len(texts), batch_size)]

    class _Transient(Exception):
        pass

    def fetch_one(batch: list[str]) -> list[list[float]]:
        last_error: Exception | None = None
        for attempt in range(retries + 1):
            try:
                try:
                    resp = sess.post(endpoint, json={"texts": batch}, timeout=timeout)
                    if resp.status_code != 200:
                        raise _Transient(f"status {resp.status_code}")
                    payload = resp.json()
                    emb = payload["embeddings"]
                except (requests.RequestException, KeyError, ValueError) as exc:
                    raise _Transient(str(exc)) from exc
                if len(emb) != len(batch):
                    # A well-formed but wrong-sized answer will not improve.
                    raise EmbeddingError(
                        f"count mismatch (sent {len(batch)} texts, got {len(emb)} rows)"
                    )
                return emb
            except _Transient as exc:
                last_error = exc
            if attempt < retries:
                time.sleep(backoff * (2**attempt))
        raise EmbeddingError(
            f"exhausted retries against {endpoint}: {last_error}"
        ) from last_error

    if concurrency > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            results = list(pool.map(fetch_one, batches))
    else:
        results = [fetch_one(b) for b in batches]

    dim = len(results[0][0]) if results[0] else 0
    for i, chunk in enumerate(results):
        for row in chunk:
            if len(row) != dim:
                raise EmbeddingError(
                    f"dimension drift in batch {i} ({len(row)} vs {dim})"
                )
    flat = np.asarray([row for chunk in results for row in chunk], dtype=np.float32)
    return EmbeddingMatrix(vectors=flat)


def hash_embed(texts: Sequence[str], dim: int, rng_seed: int) -> EmbeddingMatrix:
    """Feature-hashed bag-of-words with TF-IDF weighting and a sign hash.

    Tokens are lowercased whitespace words; each token hashes to one of
    ``dim`` buckets with a +/-1 sign, weighted by tf * ln(n / (1 + df)).
    Rows are L2-normalized; all-zero rows are left as zeros.  Fully
    deterministic given (texts, dim, rng_seed).
    """
    if dim < 2:
        raise EmbeddingError("dim must be >= 2")
    key = (rng_seed % (1 << 64)).to_bytes(8, "little") * 2
    token_lists = [t.lower().split() for t in texts]
    n = len(texts)
    df: Counter[str] = Counter()
    for tokens in token_lists:
        df.update(set(tokens))

    bucket_cache: dict[str, tuple[int, float]] = {}

    def slot(token: str) -> tuple[int, float]:
        cached = bucket_cache.get(token)
        if cached is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=9, key=key).digest()
            bucket = int.from_bytes(digest[:8], "little") % dim
            sign = 1.0 if digest[8] & 1 else -1.0
            cached = (bucket, sign)
            bucket_cache[token] = cached
        return cached

    out = np.zeros((n, dim), dtype=np.float64)
    for i, tokens in enumerate(token_lists):
        for token, tf in Counter(tokens).items():
            bucket, sign = slot(token)
            out[i, bucket] += sign * tf * math.log(n / (1 + df[token]))
    norms = np.linalg.norm(out, axis=1)
    nonzero = norms > 0
    out[nonzero] /= norms[nonzero, None]
    return EmbeddingMatrix(vectors=out.astype(np.float32))


@dataclass(frozen=True)
class HashEmbedder:
    """Deterministic test embedder; see :func:`hash_embed`."""

    dim: int = 768
    rng_seed: int = 0

    def embed(self, texts: Sequence[str]) -> EmbeddingMatrix:
        return hash_embed(texts, self.dim, self.rng_seed)


@dataclass(frozen=True)
class RemoteEmbedder:
    """Remote endpoint provider; see :func:`fetch_remote`."""

    endpoint: str
    batch_size: int = 32
    retries: int = 3
    backoff: float = 0.5
    concurrency: int = 1
    timeout: float = 60.0

    def embed(self, texts: Sequence[str]) -> EmbeddingMatrix:
        return fetch_remote(
            self.endpoint,
            texts,
            self.batch_size,
            retries=self.retries,
            backoff=self.backoff,
            concurrency=self.concurrency,
            timeout=self.timeout,
        )
