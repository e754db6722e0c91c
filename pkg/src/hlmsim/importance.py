"""Attention-based importance gate and the combined upload decision."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ParameterError, SimError


class ConfigurationError(SimError):
    pass


class Scope(str, Enum):
    ROW = "row"
    MATRIX = "matrix"


@dataclass(frozen=True)
class ImportanceConfig:
    k: int = 3
    gamma: float = 1.0
    scope: Scope = Scope.ROW

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"k must be a positive integer, got {self.k!r}")
        if not self.gamma >= 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma!r}")
        object.__setattr__(self, "scope", Scope(self.scope))


@dataclass(frozen=True)
class GateDecision:
    delta: int
    u_value: float
    uncertainty_pass: bool
    importance_pass: bool
    theta_imp: float
    topk_value: float


def importance_threshold(row, gamma: float) -> float:
    """``max(row) - gamma * std(row)`` with the population standard deviation."""
    row = np.asarray(row, dtype=np.float64)
    if row.size == 0:
        raise ParameterError("importance threshold of an empty row is undefined")
    return float(row.max() - gamma * row.std())


def topk_value(values, k: int) -> float:
    """k-th largest value, or ``-inf`` when fewer than ``k`` values exist."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    values = np.asarray(values, dtype=np.float64).ravel()
    if k > values.size:
        return float("-inf")
    return float(np.partition(values, values.size - k)[values.size - k])


def importance_test(row, full_matrix_values, cfg: ImportanceConfig) -> tuple[bool, float, float]:
    """Return ``(passed, theta_imp, topk)``; an empty row never passes."""
    row = np.asarray(row, dtype=np.float64)
    if cfg.scope is Scope.MATRIX and full_matrix_values is None:
        raise ConfigurationError("scope=matrix requires the flattened attention matrix")
    if row.size == 0:
        return False, float("nan"), float("-inf")
    theta = importance_threshold(row, cfg.gamma)
    pool = row if cfg.scope is Scope.ROW else full_matrix_values
    top = topk_value(pool, cfg.k)
    return top > theta, theta, top


def decide_upload(u: float, row, full_matrix_values, cfg: ImportanceConfig, theta_u: float) -> GateDecision:
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"uncertainty must lie in [0, 1], got {u!r}")
    imp_pass, theta, top = importance_test(row, full_matrix_values, cfg)
    u_pass = u > theta_u
    return GateDecision(
        delta=int(u_pass and imp_pass),
        u_value=u,
        uncertainty_pass=u_pass,
        importance_pass=imp_pass,
        theta_imp=theta,
        topk_value=top,
    )
