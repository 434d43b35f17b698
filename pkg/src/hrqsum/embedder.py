"""Sentence embeddings: a deterministic built-in embedder and the HRQE
binary load/save format for externally computed embeddings."""

from __future__ import annotations

import hashlib
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, bigrams, tokenize

HRQE_MAGIC = b"HRQE"
HRQE_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_N_BUCKETS = 1 << 18


class HrqeFormatError(ValueError):
    """Raised for malformed HRQE embedding files."""


@dataclass
class EmbeddingMatrix:
    """One float32 row per sentence, in canonical corpus order."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding matrix contains non-finite values")
        self.values = arr

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


def _bucket(feature: str) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % _N_BUCKETS


def _projection_row(seed: int, bucket: int, dim: int) -> np.ndarray:
    return np.random.default_rng([seed, bucket]).standard_normal(dim)


def embed_builtin(corpus: Corpus, dim: int, seed: int) -> EmbeddingMatrix:
    """Hashed unigram+bigram tf-idf, randomly projected to `dim` and
    L2-normalized. Deterministic in (corpus, dim, seed); rows follow
    canonical corpus order.
    """
    if dim < 2:
        raise ValueError("embedding dim must be >= 2")
    sentences = corpus.sentences()
    bucket_counts = []
    for sent in sentences:
        tokens = tokenize(sent.text)
        features = tokens + [f"{a} {b}" for a, b in bigrams(tokens)]
        if not features:
            features = ["\x00empty"]
        bucket_counts.append(Counter(_bucket(f) for f in features))
    df: Counter = Counter()
    for counts in bucket_counts:
        df.update(counts.keys())
    n = max(len(sentences), 1)

    row_cache: dict[int, np.ndarray] = {}
    rows = np.zeros((len(sentences), dim), dtype=np.float64)
    for i, counts in enumerate(bucket_counts):
        acc = rows[i]
        for bucket, count in counts.items():
            weight = count * np.log(n / df[bucket])
            if weight == 0.0:
                continue
            row = row_cache.get(bucket)
            if row is None:
                row = _projection_row(seed, bucket, dim)
                row_cache[bucket] = row
            acc += weight * row
    norms = np.linalg.norm(rows, axis=1)
    fallback = _projection_row(seed, _N_BUCKETS, dim)
    fallback /= np.linalg.norm(fallback)
    zero = norms == 0.0
    rows[zero] = fallback
    norms[zero] = 1.0
    rows /= norms[:, None]
    return EmbeddingMatrix(rows.astype(np.float32))


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write an HRQE v1 file: magic, u32 version, u32 dim, u64 count, then
    count*dim little-endian float32 values, row-major, no padding."""
    values = np.ascontiguousarray(matrix.values, dtype="<f4")
    count, dim = values.shape
    with open(path, "wb") as handle:
        handle.write(_HEADER.pack(HRQE_MAGIC, HRQE_VERSION, dim, count))
        handle.write(values.tobytes())


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read an HRQE v1 file; byte-exact inverse of save_embeddings."""
    with open(path, "rb") as handle:
        header = handle.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise HrqeFormatError("file too short for HRQE header")
        magic, version, dim, count = _HEADER.unpack(header)
        if magic != HRQE_MAGIC:
            raise HrqeFormatError(f"bad magic {magic!r}, expected {HRQE_MAGIC!r}")
        if version != HRQE_VERSION:
            raise HrqeFormatError(f"unsupported HRQE version {version}")
        payload = handle.read()
    expected = count * dim * 4
    if len(payload) != expected:
        raise HrqeFormatError(
            f"payload is {len(payload)} bytes, header implies {expected}")
    values = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    return EmbeddingMatrix(values.copy())
