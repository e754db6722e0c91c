"""Shared value types, softmax/sampling primitives and the seeded RNG."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PROB_TOL = 1e-9
RENORM_TOL = 1e-6
MAX_SEED = 2**64


class SimError(Exception):
    """Base class for simulator errors."""


class ValidationError(SimError, ValueError):
    pass


class ParameterError(SimError, ValueError):
    pass


class SequenceError(SimError, ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    size: int

    def __post_init__(self) -> None:
        if int(self.size) != self.size or self.size < 2:
            raise ValidationError(f"vocabulary size must be an integer >= 2, got {self.size!r}")


class ProbabilityVector:
    """Immutable distribution over token ids.

    Inputs drifting from unit mass by at most ``RENORM_TOL`` are renormalized
    once; anything further off is rejected.
    """

    __slots__ = ("_probs",)

    def __init__(self, probs: Iterable[float]) -> None:
        p = np.array(probs, dtype=np.float64).ravel()
        if p.size == 0:
            raise ValidationError("probability vector is empty")
        if not np.all(np.isfinite(p)):
            raise ValidationError("probability vector has non-finite entries")
        if np.any(p < 0):
            raise ValidationError("probability vector has negative entries")
        total = p.sum()
        if abs(total - 1.0) > RENORM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        if abs(total - 1.0) > 0:
            p = p / total
        p.setflags(write=False)
        self._probs = p

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    def __len__(self) -> int:
        return self._probs.size

    def __getitem__(self, v: int) -> float:
        return float(self._probs[v])

    def __repr__(self) -> str:
        return f"ProbabilityVector({np.array2string(self._probs, precision=4)})"


class LogitVector:
    __slots__ = ("_logits",)

    def __init__(self, logits: Iterable[float]) -> None:
        z = np.array(logits, dtype=np.float64).ravel()
        if z.size == 0:
            raise ValidationError("logit vector is empty")
        if not np.all(np.isfinite(z)):
            raise ValidationError("logit vector has non-finite entries")
        z.setflags(write=False)
        self._logits = z

    @property
    def logits(self) -> np.ndarray:
        return self._logits

    def __len__(self) -> int:
        return self._logits.size

    def __repr__(self) -> str:
        return f"LogitVector({np.array2string(self._logits, precision=4)})"


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]
    max_len: int
    vocab_size: int
    eos_token: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if self.max_len < 1:
            raise SequenceError("max_len must be positive")
        if len(self.tokens) > self.max_len:
            raise SequenceError(f"sequence length {len(self.tokens)} exceeds s_max={self.max_len}")
        if any(t < 0 or t >= self.vocab_size for t in self.tokens):
            raise SequenceError("token id outside vocabulary")
        if self.eos_token is not None and not 0 <= self.eos_token < self.vocab_size:
            raise SequenceError("eos_token outside vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def append(self, token: int) -> TokenSequence:
        return TokenSequence(self.tokens + (int(token),), self.max_len, self.vocab_size, self.eos_token)

    @property
    def full(self) -> bool:
        return len(self.tokens) >= self.max_len


@dataclass
class SeededRng:
    """PCG64 stream addressed by ``(seed, key)``.

    Child streams come from numpy's ``SeedSequence`` spawn-key mechanism, so
    ``rng.child(t)`` is the same stream no matter how much the parent (or any
    sibling) has already consumed.
    """

    seed: int
    key: tuple[int, ...] = ()
    algorithm: str = field(default="PCG64/SeedSequence", init=False)

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < MAX_SEED:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        self.seed = int(self.seed)
        self.key = tuple(int(k) for k in self.key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> SeededRng:
        return SeededRng(self.seed, self.key + tuple(key))

    def uniform(self) -> float:
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def exponential(self, size: int | None = None):
        if size is None:
            return float(self._gen.standard_exponential())
        return self._gen.standard_exponential(size)

    def normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from integer parts (order-sensitive)."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _as_logits(logits) -> np.ndarray:
    if isinstance(logits, LogitVector):
        return logits.logits
    return LogitVector(logits).logits


def softmax(logits: LogitVector | Sequence[float], temperature: float = 1.0) -> ProbabilityVector:
    if not temperature > 0 or not np.isfinite(temperature):
        raise ParameterError(f"temperature must be positive and finite, got {temperature!r}")
    z = _as_logits(logits) / temperature
    e = np.exp(z - z.max())
    return ProbabilityVector(e / e.sum())


def softmax_rows(logits: np.ndarray, temperatures: np.ndarray) -> np.ndarray:
    """Batched softmax: one row per temperature."""
    z = logits[None, :] / temperatures[:, None]
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def inverse_cdf(probs: np.ndarray, u):
    """Map uniform(s) in [0, 1) to token ids through the cumulative sum.

    Rounding can leave the last CDF entry a hair under 1; draws landing in
    that gap go to the last id with positive mass.
    """
    cdf = np.cumsum(probs, axis=-1)
    if probs.ndim == 1:
        v = int(np.searchsorted(cdf, u, side="right"))
        if v >= probs.size:
            v = int(np.flatnonzero(probs > 0)[-1])
        return v
    # count of cdf entries <= u is searchsorted(side="right") row by row
    out = (cdf <= np.asarray(u)[:, None]).sum(axis=1).astype(np.int64)
    overflow = out >= probs.shape[1]
    if overflow.any():
        for r in np.flatnonzero(overflow):
            out[r] = np.flatnonzero(probs[r] > 0)[-1]
    return out


def sample(dist: ProbabilityVector, rng: SeededRng) -> int:
    """Draw one token id; consumes exactly one uniform."""
    return inverse_cdf(dist.probs, rng.uniform())


def total_variation(p, q) -> float:
    p = p.probs if isinstance(p, ProbabilityVector) else np.asarray(p, dtype=float)
    q = q.probs if isinstance(q, ProbabilityVector) else np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())
