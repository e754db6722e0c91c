"""Simulator for uncertainty- and importance-aware hybrid speculative decoding.

An edge small model drafts each token; a gate built from temperature-perturbation
uncertainty and attention-row importance decides whether the draft's
distribution is uploaded for verification by a cloud model. The package models
the uplink, throughput and energy of every decision and sweeps the gate's
``k`` and ``gamma`` knobs.
"""

from .backend import AttentionState, ModelOutput, SyntheticPair, SyntheticPairConfig, attention_row
from .channel import ChannelParams, Fading, draw_fading, payload_bits, snr, uplink_time
from .config import ConfigError, Experiment, load_config, parse_config
from .core import (
    LogitVector,
    ProbabilityVector,
    SeededRng,
    SimError,
    TokenSequence,
    Vocabulary,
    sample,
    softmax,
)
from .harness import DecodeStepRecord, Method, RunConfig, decode, run_experiment
from .importance import GateDecision, ImportanceConfig, decide_upload, importance_threshold, topk_value
from .metrics import EnergyParams, LatencyParams, RunSummary, energy_saving, step_throughput, summarize, total_energy
from .speculative import VerifyOutcome, resample_residual, verify
from .uncertainty import UncertaintyConfig, estimate_uncertainty, exact_uncertainty

__version__ = "0.1.0"
