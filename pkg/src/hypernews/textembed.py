"""News content features.

Two embedders stand in for a pretrained language model: a deterministic
signed feature-hashing bag of n-grams, and a loader for vectors computed
elsewhere (one ``edge_id<TAB>v1,...,vd`` record per line).
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, MissingId, ParseError

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "hashed_ngram"
    dimension: int = 768
    ngram_min: int = 1
    ngram_max: int = 2
    hash_seed: int = 0
    lowercase: bool = True
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("hashed_ngram", "precomputed"):
            raise InvalidConfig(f"unknown embedder kind {self.kind!r}")
        if self.dimension < 8:
            raise InvalidConfig("embedding dimension must be >= 8")
        if not 1 <= self.ngram_min <= self.ngram_max:
            raise InvalidConfig("need 1 <= ngram_min <= ngram_max")
        if self.kind == "precomputed" and not self.path:
            raise InvalidConfig("precomputed embedder needs a path")


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    if lowercase:
        text = text.lower()
    return _TOKEN.findall(text)


def _ngrams(tokens: list[str], lo: int, hi: int) -> Iterable[str]:
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i:i + n])


def _hash64(token: str, seed: int) -> int:
    key = seed.to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def embed_text(text: str, config: EmbedderConfig) -> np.ndarray:
    d = config.dimension
    vec = np.zeros(d)
    seed = config.hash_seed & 0xFFFFFFFFFFFFFFFF
    for gram in _ngrams(tokenize(text, config.lowercase), config.ngram_min, config.ngram_max):
        h = _hash64(gram, seed)
        # low bits pick the bucket, the top bit picks the sign
        vec[h % d] += -1.0 if h >> 63 else 1.0
    norm = np.sqrt(vec @ vec)
    if norm > 0:
        vec /= norm
    return vec


def embed_texts(texts: list[str], config: EmbedderConfig) -> np.ndarray:
    return np.vstack([embed_text(s, config) for s in texts]) if texts else np.zeros((0, config.dimension))


def load_precomputed(path, expected_ids: Iterable[str]) -> dict[str, np.ndarray]:
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    dim = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected 'edge_id<TAB>v1,v2,...'", path, lineno)
            ident, raw = parts
            try:
                vec = np.array([float(x) for x in raw.split(",")])
            except ValueError as exc:
                raise ParseError(f"bad float: {exc}", path, lineno) from None
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DimensionMismatch(f"{path}:{lineno}: vector of length {vec.size}, expected {dim}")
            if ident in out:
                raise ParseError(f"duplicate id {ident!r}", path, lineno)
            out[ident] = vec
    for ident in expected_ids:
        if ident not in out:
            raise MissingId(ident)
    return out


def edge_features(hg, config: EmbedderConfig) -> np.ndarray:
    """Text feature matrix (t x d) for every hyperedge of ``hg``."""
    if config.kind == "precomputed":
        vectors = load_precomputed(config.path, hg.edge_ids)
        Ze = np.vstack([vectors[i] for i in hg.edge_ids])
        if Ze.shape[1] != config.dimension:
            raise DimensionMismatch(
                f"precomputed vectors have dimension {Ze.shape[1]}, configured {config.dimension}"
            )
        return Ze
    return embed_texts(hg.edge_texts, config)
