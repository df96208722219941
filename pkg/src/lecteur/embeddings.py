"""Token embedding providers.

Two implementations of one interface: a file-backed table for real corpora
and a deterministic hash-based embedder, so the whole pipeline trains and
tests without external downloads. Both mix a fixed fraction of the adjacent
tokens' embeddings into each row, making embeddings context-sensitive (the
same word in different sentences gets different rows).
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import DataError


def _hash_seed(token: str) -> int:
    return int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "little")


def hash_vector(token: str, dim: int) -> np.ndarray:
    """Fixed pseudo-random unit-scale vector for a token; stable across runs."""
    rng = np.random.default_rng(_hash_seed(token))
    return (rng.standard_normal(dim) / np.sqrt(dim)).astype(np.float32)


class EmbeddingProvider(nn.Module):
    """Interface: encode(tokens) -> [n_tokens, dim] float tensor."""

    dim: int
    mix: float = 0.25  # weight of each adjacent token mixed into a row

    def _base(self, tokens: list[str]) -> torch.Tensor:
        raise NotImplementedError

    def encode(self, tokens: list[str]) -> torch.Tensor:
        if not tokens:
            return torch.zeros(0, self.dim)
        e = self._base(tokens)
        prev = torch.cat([torch.zeros(1, self.dim), e[:-1]], dim=0)
        nxt = torch.cat([e[1:], torch.zeros(1, self.dim)], dim=0)
        return e + self.mix * (prev + nxt)


class HashEmbedder(EmbeddingProvider):
    """Deterministic toy embedder: fixed hash-derived base vector per token
    plus a small trainable residual table over hash buckets."""

    def __init__(self, dim: int = 32, n_buckets: int = 4096):
        super().__init__()
        self.dim = dim
        self.n_buckets = n_buckets
        self.residual = nn.Embedding(n_buckets, dim)
        nn.init.zeros_(self.residual.weight)
        self._cache: dict[str, torch.Tensor] = {}

    def _bucket(self, token: str) -> int:
        return _hash_seed("bucket:" + token) % self.n_buckets

    def _base(self, tokens: list[str]) -> torch.Tensor:
        rows = []
        for t in tokens:
            if t not in self._cache:
                self._cache[t] = torch.from_numpy(hash_vector(t, self.dim))
            rows.append(self._cache[t])
        idx = torch.tensor([self._bucket(t) for t in tokens], dtype=torch.long)
        return torch.stack(rows) + self.residual(idx)


class TableEmbedder(EmbeddingProvider):
    """Word vectors loaded from a TSV file (word TAB v1 .. vd); words absent
    from the table fall back to the deterministic hash vector."""

    def __init__(self, path: str | Path):
        super().__init__()
        self.table: dict[str, torch.Tensor] = {}
        dim = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) < 2:
                    raise DataError(f"{path}:{lineno}: expected word TAB values")
                try:
                    vec = torch.tensor([float(v) for v in parts[1:]])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric vector") from None
                if dim is None:
                    dim = len(vec)
                elif len(vec) != dim:
                    raise DataError(
                        f"{path}:{lineno}: dim {len(vec)} != first row's {dim}"
                    )
                self.table[parts[0]] = vec
        if dim is None:
            raise DataError(f"{path}: empty embedding table")
        self.dim = dim

    def _base(self, tokens: list[str]) -> torch.Tensor:
        rows = [
            self.table.get(t, torch.from_numpy(hash_vector(t, self.dim)))
            for t in tokens
        ]
        return torch.stack(rows)
