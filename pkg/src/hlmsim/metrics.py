"""Throughput, energy and run-level aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Sequence

from .core import ParameterError, SimError

if TYPE_CHECKING:
    from .harness import DecodeStepRecord

SLM_THROUGHPUT = 0.53
HLM_THROUGHPUT = 0.25
BITS_PER_MEGABIT = 1_000_000


class EmptyRunError(SimError):
    pass


class PayloadFactor(str, Enum):
    LITERAL = "literal"  # B in bits
    NORMALIZED = "normalized"  # B in megabits


class SlmCountMode(str, Enum):
    ALL = "all"
    LOCAL_ONLY = "local_only"


@dataclass(frozen=True)
class LatencyParams:
    mu_slm: float = 1.0 / SLM_THROUGHPUT
    mu_llm: float = 0.0

    def __post_init__(self) -> None:
        if not (self.mu_slm >= 0 and self.mu_llm >= 0):
            raise ParameterError("latencies must be >= 0")


def calibrate_mu_llm(mu_slm: float, mu_uplink: float, target_throughput: float = HLM_THROUGHPUT) -> float:
    """LLM latency that makes an always-upload step run at ``target_throughput``."""
    mu_llm = 1.0 / target_throughput - mu_slm - mu_uplink
    if mu_llm < 0:
        raise ParameterError(
            f"cannot reach {target_throughput} tok/s: SLM ({mu_slm:.4g} s) plus uplink "
            f"({mu_uplink:.4g} s) already exceed {1.0 / target_throughput:.4g} s per token"
        )
    return mu_llm


@dataclass(frozen=True)
class EnergyParams:
    eps_u: float = 300.0
    eps_r: float = 350.0
    eps_s: float = 100.0
    payload_factor: PayloadFactor = PayloadFactor.NORMALIZED
    slm_count_mode: SlmCountMode = SlmCountMode.ALL

    def __post_init__(self) -> None:
        if min(self.eps_u, self.eps_r, self.eps_s) < 0:
            raise ParameterError("energy coefficients must be >= 0")
        object.__setattr__(self, "payload_factor", PayloadFactor(self.payload_factor))
        object.__setattr__(self, "slm_count_mode", SlmCountMode(self.slm_count_mode))

    def payload_units(self, bits: int) -> float:
        if self.payload_factor is PayloadFactor.LITERAL:
            return float(bits)
        return bits / BITS_PER_MEGABIT


def step_time(delta: int, mu_uplink: float, lat: LatencyParams) -> float:
    if delta:
        return lat.mu_slm + mu_uplink + lat.mu_llm
    return lat.mu_slm


def step_throughput(delta: int, mu_uplink: float, lat: LatencyParams) -> float:
    """Tokens per second for one step; 0 during an outage."""
    if not delta and lat.mu_slm <= 0:
        raise ParameterError("mu_slm must be positive for a local step")
    t = step_time(delta, mu_uplink, lat)
    if math.isinf(t):
        return 0.0
    if t <= 0:
        raise ParameterError("step time must be positive")
    return 1.0 / t


def total_energy(counts: tuple[int, int, int], payload: float, ep: EnergyParams) -> float:
    """``l_u * B * eps_u + l_r * eps_r + l_s * eps_s``; ``payload`` is B already in
    the configured units."""
    l_u, l_r, l_s = counts
    if l_r > l_u:
        raise ParameterError("more rejections than uploads")
    return l_u * payload * ep.eps_u + l_r * ep.eps_r + l_s * ep.eps_s


def energy_saving(e_run: float, e_hlm_baseline: float) -> float:
    if e_hlm_baseline <= 0:
        raise ParameterError("baseline energy must be positive")
    return 1.0 - e_run / e_hlm_baseline


@dataclass(frozen=True)
class Baseline:
    """What a run is compared against: the full-verification run on the same
    prompts and seeds."""

    energy_total: float
    sequences: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class RunSummary:
    tokens_total: int
    upload_count: int
    reject_count: int
    local_count: int
    upload_rate: float
    reject_rate: float
    energy_total: float
    energy_saving: float
    mean_throughput: float
    fidelity: float
    method: str = ""
    k: int | None = None
    gamma: float | None = None
    seed: int | None = None


def fidelity(sequences: Sequence[Sequence[int]], reference: Sequence[Sequence[int]]) -> float:
    """Share of positions where emitted tokens match the reference, each pair
    truncated to the shorter sequence."""
    if len(sequences) != len(reference):
        raise ParameterError("fidelity needs one reference sequence per run sequence")
    matched = compared = 0
    for seq, ref in zip(sequences, reference):
        n = min(len(seq), len(ref))
        compared += n
        matched += sum(1 for a, b in zip(seq[:n], ref[:n]) if a == b)
    return matched / compared if compared else 1.0


def emitted_sequences(traces: Sequence[Sequence[DecodeStepRecord]]) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(r.emitted_token for r in trace) for trace in traces)


def summarize(
    traces: Sequence[Sequence[DecodeStepRecord]],
    lat: LatencyParams,
    ep: EnergyParams,
    baseline: Baseline | None = None,
    **labels,
) -> RunSummary:
    """Aggregate per-prompt traces into one summary row.

    Without ``baseline`` the run is treated as its own reference (saving 0,
    fidelity 1), which is how the full-verification run summarizes itself.
    """
    records = [r for trace in traces for r in trace]
    if not records:
        raise EmptyRunError("cannot summarize an empty run")
    n = len(records)
    l_u = sum(1 for r in records if r.delta)
    l_r = sum(1 for r in records if r.verify is not None and not r.verify.accepted)
    local = n - l_u
    l_s = n if ep.slm_count_mode is SlmCountMode.ALL else local
    bits = max(r.payload_bits for r in records)
    e_total = total_energy((l_u, l_r, l_s), ep.payload_units(bits), ep)
    elapsed = sum(r.step_time for r in records)
    throughput = 0.0 if math.isinf(elapsed) else n / elapsed

    if baseline is None:
        saving, fid = 0.0, 1.0
    else:
        saving = energy_saving(e_total, baseline.energy_total)
        fid = fidelity(emitted_sequences(traces), baseline.sequences)
    return RunSummary(
        tokens_total=n,
        upload_count=l_u,
        reject_count=l_r,
        local_count=local,
        upload_rate=l_u / n,
        reject_rate=l_r / l_u if l_u else 0.0,
        energy_total=e_total,
        energy_saving=saving,
        mean_throughput=throughput,
        fidelity=fid,
        **labels,
    )


def as_baseline(summary: RunSummary, traces: Sequence[Sequence[DecodeStepRecord]]) -> Baseline:
    return Baseline(summary.energy_total, emitted_sequences(traces))
