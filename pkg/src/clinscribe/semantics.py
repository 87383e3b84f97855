"""Embedding-based semantic similarity between transcripts.

Transcripts are segmented line by line (one line per turn, speaker label
excluded) to respect embedder input limits, lines are paired across the
two transcripts, and the per-pair cosine similarities are averaged.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .align import EditOpKind, global_align
from .metrics import AggregateStat, aggregate
from .service import SchemaMismatchError, ServiceEndpoint, post_json
from .transcript import Transcript

logger = logging.getLogger(__name__)

EmbeddingVector = np.ndarray


@dataclass(frozen=True)
class EmbedderDescriptor:
    name: str
    max_input_tokens: int
    dim: int

    def __post_init__(self):
        if self.max_input_tokens < 1:
            raise ValueError("max_input_tokens must be at least 1")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")


class Embedder(Protocol):
    descriptor: EmbedderDescriptor

    def embed(self, text: str) -> EmbeddingVector: ...


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; zero vectors and dim mismatches fail."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    value = float(np.dot(a, b)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def _clip_to_limit(text: str, descriptor: EmbedderDescriptor) -> str:
    tokens = text.split()
    if len(tokens) <= descriptor.max_input_tokens:
        return text
    logger.warning(
        "truncating %d-token text to %s's %d-token limit",
        len(tokens), descriptor.name, descriptor.max_input_tokens,
    )
    return " ".join(tokens[: descriptor.max_input_tokens])


class HashEmbedder:
    """Deterministic offline embedder: hashed bag of words, L2-normalized.

    Byte-identical text maps to a bit-identical vector, in and across
    processes (the bucket hash is SHA-256, not the salted builtin).
    """

    def __init__(self, dim: int = 512, max_input_tokens: int = 8192):
        self.descriptor = EmbedderDescriptor(
            name=f"hash-{dim}", max_input_tokens=max_input_tokens, dim=dim
        )

    def embed(self, text: str) -> EmbeddingVector:
        tokens = _clip_to_limit(text, self.descriptor).split()
        if not tokens:
            raise ValueError("cannot embed empty text")
        vector = np.zeros(self.descriptor.dim, dtype=float)
        for token in tokens:
            vector[_bucket(token, self.descriptor.dim)] += 1.0
        return vector / np.linalg.norm(vector)


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dim


class ExternalEmbedder:
    """Client for the embedding service contract.

    Request: ``POST {"text": string}``. Response: ``{"vector": [numbers]}``.
    """

    def __init__(self, endpoint: ServiceEndpoint, descriptor: EmbedderDescriptor):
        self.endpoint = endpoint
        self.descriptor = descriptor

    def embed(self, text: str) -> EmbeddingVector:
        body = post_json(self.endpoint, {"text": _clip_to_limit(text, self.descriptor)})
        raw = body.get("vector")
        if not isinstance(raw, list):
            raise SchemaMismatchError(f"{self.endpoint.url}: response has no 'vector' list")
        vector = np.asarray(raw, dtype=float)
        if vector.shape != (self.descriptor.dim,):
            raise SchemaMismatchError(
                f"{self.endpoint.url}: expected {self.descriptor.dim} dimensions, "
                f"got shape {vector.shape}"
            )
        if not np.all(np.isfinite(vector)):
            raise SchemaMismatchError(f"{self.endpoint.url}: vector has non-finite values")
        return vector


def segment_lines(t: Transcript) -> list[str]:
    """One string per turn, in order, text only."""
    return [turn.text for turn in t.turns]


def transcript_similarity(
    hyp: Transcript,
    ref: Transcript,
    embedder: Embedder,
    pairing: str = "aligned",
) -> AggregateStat:
    """Average line-level cosine similarity between two transcripts.

    With the default "aligned" pairing, the two line sequences are globally
    aligned (lines compare equal when their whitespace tokens agree) and
    match/substitute positions become pairs; unpaired lines contribute
    similarity 0 to the average. "indexed" pairs lines by position
    instead, with length overhang contributing 0.
    """
    if not hyp.turns or not ref.turns:
        raise ValueError("cannot score similarity of an empty transcript")
    hyp_lines = segment_lines(hyp)
    ref_lines = segment_lines(ref)

    pairs: list[tuple[int | None, int | None]] = []
    if pairing == "aligned":
        hyp_keys = [tuple(line.split()) for line in hyp_lines]
        ref_keys = [tuple(line.split()) for line in ref_lines]
        for op in global_align(hyp_keys, ref_keys).ops:
            if op.kind in (EditOpKind.MATCH, EditOpKind.SUBSTITUTE):
                pairs.append((op.hyp_index, op.ref_index))
            else:
                pairs.append((None, None))
    elif pairing == "indexed":
        longer = max(len(hyp_lines), len(ref_lines))
        for i in range(longer):
            if i < len(hyp_lines) and i < len(ref_lines):
                pairs.append((i, i))
            else:
                pairs.append((None, None))
    else:
        raise ValueError(f"unknown pairing strategy {pairing!r}")

    similarities = []
    for hyp_index, ref_index in pairs:
        if hyp_index is None or ref_index is None:
            similarities.append(0.0)
            continue
        similarities.append(
            cosine(
                embedder.embed(hyp_lines[hyp_index]),
                embedder.embed(ref_lines[ref_index]),
            )
        )
    return aggregate(similarities)
