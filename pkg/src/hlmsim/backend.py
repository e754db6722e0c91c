"""Synthetic SLM/LLM pair and single-head attention rows.

Base logits for a position are a seeded Gaussian draw keyed on the last
``window`` tokens of the context, so the models are deterministic and
context-sensitive without any training. The SLM adds independent noise scaled
by ``divergence``; at divergence 0 the two models agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    LogitVector,
    SequenceError,
    TokenSequence,
    ValidationError,
    Vocabulary,
    softmax,
    total_variation,
)

_TAG_BASE = 1
_TAG_NOISE = 2
_TAG_ATTN = 3


@dataclass(frozen=True)
class AttentionState:
    queries: np.ndarray
    keys: np.ndarray
    d_k: int
    recency_slope: float = 0.0

    def __post_init__(self) -> None:
        q = np.atleast_2d(np.asarray(self.queries, dtype=np.float64))
        k = np.atleast_2d(np.asarray(self.keys, dtype=np.float64))
        if np.asarray(self.queries).size == 0:
            q = q.reshape(0, self.d_k)
        if np.asarray(self.keys).size == 0:
            k = k.reshape(0, self.d_k)
        if self.d_k < 1:
            raise ValidationError("d_k must be >= 1")
        if q.shape[1] != self.d_k or k.shape[1] != self.d_k:
            raise ValidationError(f"embedding dimension mismatch: expected d_k={self.d_k}")
        if q.shape[0] != k.shape[0]:
            raise ValidationError("queries and keys cover different numbers of positions")
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "keys", k)

    @property
    def positions(self) -> int:
        return self.queries.shape[0]


@dataclass(frozen=True)
class ModelOutput:
    logits: LogitVector
    attention: AttentionState


def attention_row(state: AttentionState, i: int) -> np.ndarray:
    """Normalized attention of position ``i`` (1-based) over positions ``1..i-1``.

    Position 1 has nothing to attend to and yields an empty row.
    """
    if i < 1 or i > state.positions:
        raise ValidationError(f"position {i} outside 1..{state.positions}")
    if i == 1:
        return np.empty(0)
    scores = state.keys[: i - 1] @ state.queries[i - 1] / math.sqrt(state.d_k)
    if state.recency_slope:
        distance = np.arange(i - 2, -1, -1, dtype=np.float64)
        scores = scores - state.recency_slope * distance
    e = np.exp(scores - scores.max())
    return e / e.sum()


def attention_matrix_values(state: AttentionState, upto: int | None = None) -> np.ndarray:
    """All defined entries a_ij (j < i) of rows 2..upto, flattened."""
    upto = state.positions if upto is None else upto
    rows = [attention_row(state, i) for i in range(2, upto + 1)]
    return np.concatenate(rows) if rows else np.empty(0)


@dataclass(frozen=True)
class SyntheticPairConfig:
    vocab: Vocabulary
    d_k: int = 4
    divergence: float = 0.5
    logit_scale: float = 1.0
    seed: int = 0
    window: int = 4
    attn_scale: float = 1.0
    recency_slope: float = 0.0
    position_jitter: float = 1.0
    eos_token: int | None = None
    eos_logit_bias: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.divergence <= 1.0:
            raise ValidationError(f"divergence must lie in [0, 1], got {self.divergence}")
        if not self.logit_scale > 0:
            raise ValidationError("logit_scale must be positive")
        if self.d_k < 1:
            raise ValidationError("d_k must be >= 1")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if self.attn_scale < 0:
            raise ValidationError("attn_scale must be >= 0")
        if self.position_jitter < 0:
            raise ValidationError("position_jitter must be >= 0")
        if self.eos_token is not None and not 0 <= self.eos_token < self.vocab.size:
            raise ValidationError("eos_token outside vocabulary")


class SyntheticPair:
    """Deterministic SLM/LLM twins. Forward calls are pure; the caches only
    memoize deterministic draws."""

    def __init__(self, cfg: SyntheticPairConfig) -> None:
        self.cfg = cfg
        self._logit_cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}
        self._embed_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def vocab_size(self) -> int:
        return self.cfg.vocab.size

    def _tokens(self, context) -> tuple[int, ...]:
        if isinstance(context, TokenSequence):
            return context.tokens
        tokens = tuple(int(t) for t in context)
        if any(t < 0 or t >= self.vocab_size for t in tokens):
            raise SequenceError("token id outside vocabulary")
        return tokens

    def _suffix(self, tokens: tuple[int, ...]) -> tuple[int, ...]:
        w = self.cfg.window
        bos = self.vocab_size  # out-of-vocabulary pad id
        tail = tokens[-w:]
        return (bos,) * (w - len(tail)) + tail

    def _draws(self, tokens: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        suffix = self._suffix(tokens)
        hit = self._logit_cache.get(suffix)
        if hit is not None:
            return hit
        V = self.vocab_size
        base = np.random.default_rng([self.cfg.seed, _TAG_BASE, *suffix]).standard_normal(V)
        noise = np.random.default_rng([self.cfg.seed, _TAG_NOISE, *suffix]).standard_normal(V)
        base = self.cfg.logit_scale * base
        if self.cfg.eos_token is not None:
            base[self.cfg.eos_token] += self.cfg.eos_logit_bias
        noise = self.cfg.logit_scale * noise
        base.setflags(write=False)
        noise.setflags(write=False)
        self._logit_cache[suffix] = (base, noise)
        return base, noise

    def _embedding(self, position: int, token: int) -> tuple[np.ndarray, np.ndarray]:
        """(query, key) at a 1-based position: a per-token vector plus
        ``position_jitter`` times a per-(token, position) vector."""
        key = (position, token)
        hit = self._embed_cache.get(key)
        if hit is None:
            d_k = self.cfg.d_k
            shared = np.random.default_rng([self.cfg.seed, _TAG_ATTN, token]).standard_normal(2 * d_k)
            local = np.random.default_rng([self.cfg.seed, _TAG_ATTN, token, position]).standard_normal(2 * d_k)
            z = shared + self.cfg.position_jitter * local
            hit = (self.cfg.attn_scale * z[:d_k], z[d_k:])
            self._embed_cache[key] = hit
        return hit

    def attention(self, context) -> AttentionState:
        """Query/key embeddings for every position of ``context``."""
        tokens = self._tokens(context)
        d_k = self.cfg.d_k
        if not tokens:
            return AttentionState(np.empty((0, d_k)), np.empty((0, d_k)), d_k, self.cfg.recency_slope)
        pairs = [self._embedding(j + 1, t) for j, t in enumerate(tokens)]
        q = np.stack([p[0] for p in pairs])
        k = np.stack([p[1] for p in pairs])
        return AttentionState(q, k, d_k, self.cfg.recency_slope)

    def llm_logits(self, context) -> np.ndarray:
        base, _ = self._draws(self._tokens(context))
        return base

    def slm_logits(self, context) -> np.ndarray:
        base, noise = self._draws(self._tokens(context))
        if self.cfg.divergence == 0.0:
            return base
        return base + self.cfg.divergence * noise

    def llm_forward(self, context) -> ModelOutput:
        return ModelOutput(LogitVector(self.llm_logits(context)), self.attention(context))

    def slm_forward(self, context) -> ModelOutput:
        return ModelOutput(LogitVector(self.slm_logits(context)), self.attention(context))


def random_contexts(vocab_size: int, n: int, length: int, seed: int) -> list[tuple[int, ...]]:
    rng = np.random.default_rng(seed)
    return [tuple(int(t) for t in rng.integers(0, vocab_size, size=length)) for _ in range(n)]


def mean_tv_distance(pair: SyntheticPair, contexts: Sequence[Sequence[int]]) -> float:
    tv = [total_variation(softmax(pair.slm_logits(c)), softmax(pair.llm_logits(c))) for c in contexts]
    return float(np.mean(tv))
