"""Autoregressive hybrid decoding loop and the (method, k, gamma) sweep."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum, IntEnum
from typing import Iterable, Sequence

import numpy as np

from .backend import SyntheticPair, SyntheticPairConfig, attention_matrix_values, attention_row
from .channel import ChannelParams, draw_fading, payload_bits, uplink_time
from .core import ParameterError, SeededRng, TokenSequence, derive_seed, sample, softmax
from .importance import GateDecision, ImportanceConfig, Scope, decide_upload
from .metrics import (
    Baseline,
    EnergyParams,
    LatencyParams,
    RunSummary,
    as_baseline,
    step_time,
    summarize,
)
from .speculative import VerifyOutcome, verify
from .uncertainty import UncertaintyConfig, estimate_uncertainty

log = logging.getLogger(__name__)


class Method(str, Enum):
    # declaration order is the output row order
    SLM_ONLY = "slm_only"
    HLM_FULL = "hlm_full"
    U_ONLY = "u_only"
    I_ONLY = "i_only"
    U_PLUS_I = "u_plus_i"

    @property
    def gated_by_importance(self) -> bool:
        return self in (Method.I_ONLY, Method.U_PLUS_I)

    @property
    def rank(self) -> int:
        return list(Method).index(self)


class Stream(IntEnum):
    """Per-step child stream ids; each random consumer owns one."""

    DRAFT = 0
    UNCERTAINTY = 1
    VERIFY = 2
    FADING = 3


@dataclass(frozen=True)
class RunConfig:
    backend: SyntheticPairConfig
    prompts: tuple[tuple[int, ...], ...]
    s_max: int
    method: Method = Method.U_PLUS_I
    eos_token: int | None = None
    uncertainty: UncertaintyConfig = field(default_factory=UncertaintyConfig)
    importance: ImportanceConfig = field(default_factory=ImportanceConfig)
    channel: ChannelParams | None = None
    latency: LatencyParams = field(default_factory=LatencyParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    master_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "prompts", tuple(tuple(int(t) for t in p) for p in self.prompts))
        if self.channel is None:
            object.__setattr__(self, "channel", ChannelParams(vocab_size=self.backend.vocab.size))
        if self.channel.vocab_size != self.backend.vocab.size:
            raise ParameterError("channel vocab_size disagrees with backend vocabulary")
        for p in self.prompts:
            if len(p) >= self.s_max:
                raise ParameterError(f"prompt of length {len(p)} leaves no room under s_max={self.s_max}")

    @property
    def vocab_size(self) -> int:
        return self.backend.vocab.size

    def prompt_seed(self, index: int) -> int:
        return derive_seed(self.master_seed, index)


@dataclass(frozen=True)
class DecodeStepRecord:
    step_index: int
    draft_token: int
    u_value: float
    gate: GateDecision
    delta: int
    verify: VerifyOutcome | None
    emitted_token: int
    uplink_time: float
    step_time: float
    payload_bits: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verify"] = None if self.verify is None else {
            "decision": self.verify.decision.value,
            "emitted_token": self.verify.emitted_token,
            "acceptance_draw": self.verify.acceptance_draw,
        }
        return _finite_or_none(d)


def _finite_or_none(obj):
    # JSON has no infinities; non-finite numbers serialize as null
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    return obj


def _gate_open(method: Method, gate: GateDecision) -> int:
    if method is Method.SLM_ONLY:
        return 0
    if method is Method.HLM_FULL:
        return 1
    if method is Method.U_ONLY:
        return int(gate.uncertainty_pass)
    if method is Method.I_ONLY:
        return int(gate.importance_pass)
    return gate.delta


def decode(
    cfg: RunConfig,
    prompt: Sequence[int] | TokenSequence,
    prompt_index: int = 0,
    backend: SyntheticPair | None = None,
) -> tuple[TokenSequence, list[DecodeStepRecord]]:
    """Generate until EOS or ``s_max`` tokens; one record per generated token.

    Step ``t`` of prompt ``p`` draws from child streams of
    ``derive_seed(master_seed, p)`` keyed ``(t, purpose)``, so a gate change
    never shifts the randomness of any other step or purpose.
    """
    backend = backend or SyntheticPair(cfg.backend)
    tokens = prompt.tokens if isinstance(prompt, TokenSequence) else tuple(int(t) for t in prompt)
    seq = TokenSequence(tokens, cfg.s_max, cfg.vocab_size, cfg.eos_token)
    if seq.full:
        raise ParameterError("prompt leaves no room to generate")
    root = SeededRng(cfg.prompt_seed(prompt_index))
    bits = payload_bits(cfg.channel)
    records: list[DecodeStepRecord] = []
    t = 0
    while not seq.full:
        rng = root.child(t)
        slm_logits = backend.slm_logits(seq)
        x = softmax(slm_logits)
        draft = sample(x, rng.child(Stream.DRAFT))
        u = estimate_uncertainty(slm_logits, draft, cfg.uncertainty, rng.child(Stream.UNCERTAINTY))

        # the draft's own attention row over everything before it
        state = backend.attention(seq.tokens + (draft,))
        row = attention_row(state, state.positions)
        matrix = attention_matrix_values(state) if cfg.importance.scope is Scope.MATRIX else None
        gate = decide_upload(u, row, matrix, cfg.importance, cfg.uncertainty.threshold)
        delta = _gate_open(cfg.method, gate)

        outcome = None
        mu = 0.0
        if delta:
            h = draw_fading(cfg.channel, rng.child(Stream.FADING))
            mu = uplink_time(cfg.channel, h, bits)
            y = softmax(backend.llm_logits(seq))
            outcome = verify(draft, x, y, rng.child(Stream.VERIFY))
            emitted = outcome.emitted_token
        else:
            emitted = draft

        records.append(
            DecodeStepRecord(
                step_index=t,
                draft_token=draft,
                u_value=u,
                gate=gate,
                delta=delta,
                verify=outcome,
                emitted_token=emitted,
                uplink_time=mu,
                step_time=step_time(delta, mu, cfg.latency),
                payload_bits=bits if delta else 0,
            )
        )
        seq = seq.append(emitted)
        t += 1
        if cfg.eos_token is not None and emitted == cfg.eos_token:
            break
    return seq, records


def run_method(cfg: RunConfig, backend: SyntheticPair | None = None) -> list[list[DecodeStepRecord]]:
    """Decode every prompt; one trace per prompt."""
    if not cfg.prompts:
        raise ParameterError("no prompts to decode")
    backend = backend or SyntheticPair(cfg.backend)
    return [decode(cfg, p, i, backend)[1] for i, p in enumerate(cfg.prompts)]


@dataclass(frozen=True)
class Cell:
    method: Method
    k: int | None = None
    gamma: float | None = None

    @property
    def sort_key(self) -> tuple:
        return (self.method.rank, -1 if self.k is None else self.k, -1.0 if self.gamma is None else self.gamma)


@dataclass
class CellResult:
    cell: Cell
    summary: RunSummary
    traces: list[list[DecodeStepRecord]]


def build_grid(
    methods: Iterable[Method],
    k_values: Sequence[int],
    gamma_values: Sequence[float],
    i_only_gamma: float = 1.0,
    i_only_k: int = 7,
    i_only_sweep_k: bool = False,
) -> list[Cell]:
    """Cells for the sweep, in output order.

    ``u_plus_i`` spans ``k_values x gamma_values``; ``i_only`` either sweeps
    ``k_values`` at ``i_only_gamma`` or is a single ``(i_only_k, i_only_gamma)``
    cell; the other methods are single ungated cells.
    """
    cells = []
    for m in {Method(m) for m in methods}:
        if m is Method.U_PLUS_I:
            cells += [Cell(m, int(k), float(g)) for k in k_values for g in gamma_values]
        elif m is Method.I_ONLY:
            ks = k_values if i_only_sweep_k else [i_only_k]
            cells += [Cell(m, int(k), float(i_only_gamma)) for k in ks]
        else:
            cells.append(Cell(m))
    return sorted(set(cells), key=lambda c: c.sort_key)


def _cell_config(cfg: RunConfig, cell: Cell) -> RunConfig:
    imp = cfg.importance
    if cell.k is not None:
        imp = replace(imp, k=cell.k, gamma=cell.gamma)
    return replace(cfg, method=cell.method, importance=imp)


def _run_cell(cfg: RunConfig, cell: Cell) -> list[list[DecodeStepRecord]]:
    return run_method(_cell_config(cfg, cell))


def run_experiment(cfg: RunConfig, grid: Sequence[Cell], workers: int = 1) -> list[CellResult]:
    """Run every cell over all prompts and summarize against the hlm_full run.

    The full-verification baseline is always decoded once, whether or not it
    is part of ``grid``; every cell shares the same per-prompt seeds.
    """
    if not cfg.prompts:
        raise ParameterError("no prompts to decode")
    grid = sorted(grid, key=lambda c: c.sort_key)
    hlm_cell = Cell(Method.HLM_FULL)
    others = [c for c in grid if c != hlm_cell]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, cfg, c) for c in [hlm_cell, *others]]
            all_traces = [f.result() for f in futures]
    else:
        all_traces = [_run_cell(cfg, c) for c in [hlm_cell, *others]]

    hlm_traces = all_traces[0]
    labels = dict(seed=cfg.master_seed)
    hlm_summary = summarize(hlm_traces, cfg.latency, cfg.energy, None, method=hlm_cell.method.value, **labels)
    baseline: Baseline = as_baseline(hlm_summary, hlm_traces)

    by_cell = {hlm_cell: CellResult(hlm_cell, hlm_summary, hlm_traces)}
    for cell, traces in zip(others, all_traces[1:]):
        s = summarize(
            traces, cfg.latency, cfg.energy, baseline,
            method=cell.method.value, k=cell.k, gamma=cell.gamma, **labels,
        )
        by_cell[cell] = CellResult(cell, s, traces)
        log.info("%s k=%s gamma=%s upload=%.4f", cell.method.value, cell.k, cell.gamma, s.upload_rate)
    return [by_cell[c] for c in grid]
