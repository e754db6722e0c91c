"""Temperature-perturbation uncertainty of a draft token.

The SLM logits are rescaled by ``n_samples`` temperatures drawn uniformly
from ``temp_range``; one token is sampled from each rescaled distribution and
the draft's uncertainty is the fraction of those tokens that differ from it.
No extra forward pass is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LogitVector, ParameterError, SeededRng, _as_logits, inverse_cdf, softmax_rows


@dataclass(frozen=True)
class UncertaintyConfig:
    n_samples: int = 64
    temp_range: tuple[float, float] = (0.5, 2.0)
    threshold: float = 0.2

    def __post_init__(self) -> None:
        lo, hi = self.temp_range
        if not 0 < lo <= hi:
            raise ParameterError(f"temp_range must satisfy 0 < lo <= hi, got {self.temp_range}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ParameterError("n_samples must be a positive integer")
        if not 0.0 <= self.threshold <= 1.0:
            raise ParameterError("threshold must lie in [0, 1]")
        object.__setattr__(self, "temp_range", (float(lo), float(hi)))


def sample_temperatures(cfg: UncertaintyConfig, rng: SeededRng) -> np.ndarray:
    lo, hi = cfg.temp_range
    return lo + (hi - lo) * rng.uniforms(cfg.n_samples)


def mismatch_fraction(logits, draft: int, temps: np.ndarray, rng: SeededRng) -> float:
    """Sample one token per temperature; return the share differing from ``draft``."""
    z = _as_logits(logits)
    if not 0 <= draft < z.size:
        raise ParameterError(f"draft {draft} outside vocabulary of size {z.size}")
    probs = softmax_rows(z, np.asarray(temps, dtype=np.float64))
    drawn = inverse_cdf(probs, rng.uniforms(len(temps)))
    return float(np.count_nonzero(drawn != draft)) / len(temps)


def estimate_uncertainty(logits: LogitVector, draft: int, cfg: UncertaintyConfig, rng: SeededRng) -> float:
    """Monte Carlo uncertainty; consumes ``2 * n_samples`` uniforms (temperatures first)."""
    temps = sample_temperatures(cfg, rng)
    return mismatch_fraction(logits, draft, temps, rng)


def exact_uncertainty(logits: LogitVector, draft: int, temps) -> float:
    """Expectation of the Monte Carlo estimate given the temperature draws."""
    temps = np.asarray(temps, dtype=np.float64)
    if temps.size == 0 or np.any(temps <= 0):
        raise ParameterError("temperatures must be positive")
    probs = softmax_rows(_as_logits(logits), temps)
    return float(np.mean(1.0 - probs[:, draft]))
