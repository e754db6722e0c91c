"""Draft verification and residual resampling."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ProbabilityVector, SeededRng, SimError, inverse_cdf


class ContractViolation(SimError):
    """The draft token has zero probability under the drafting model."""


class DegenerateResidualError(SimError):
    """Residual ``max(y - x, 0)`` has no mass; nothing could have been rejected."""


class Decision(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


@dataclass(frozen=True)
class VerifyOutcome:
    decision: Decision
    emitted_token: int
    acceptance_draw: float | None = None

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPTED


def residual_distribution(x: ProbabilityVector, y: ProbabilityVector) -> ProbabilityVector:
    diff = np.maximum(y.probs - x.probs, 0.0)
    mass = diff.sum()
    if mass <= 0.0:
        raise DegenerateResidualError("y - x has no positive part")
    return ProbabilityVector(diff / mass)


def resample_residual(x: ProbabilityVector, y: ProbabilityVector, rng: SeededRng) -> int:
    """Draw from the normalized positive part of ``y - x`` (one uniform)."""
    return inverse_cdf(residual_distribution(x, y).probs, rng.uniform())


def verify(draft: int, x: ProbabilityVector, y: ProbabilityVector, rng: SeededRng) -> VerifyOutcome:
    """Metropolis-Hastings check of ``draft`` drawn from ``x`` against target ``y``.

    Uniform consumption is fixed per branch: none when ``x_d <= y_d``, one for
    the acceptance test otherwise, and one more if a resample follows.
    """
    x_d, y_d = x[draft], y[draft]
    if x_d <= 0.0:
        raise ContractViolation(f"draft {draft} has zero probability under the drafting model")
    if x_d <= y_d:
        return VerifyOutcome(Decision.ACCEPTED, draft)
    u = rng.uniform()
    if u < y_d / x_d:
        return VerifyOutcome(Decision.ACCEPTED, draft, u)
    return VerifyOutcome(Decision.REJECTED, resample_residual(x, y, rng), u)
