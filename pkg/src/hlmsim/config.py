"""JSON run-config parsing and validation.

A config has the sections ``backend``, ``uncertainty``, ``importance``,
``channel``, ``latency``, ``energy`` and ``run``. Every problem is reported as
a :class:`ConfigError` naming the offending ``section.key``. Powers are given
in dBm and converted to watts here, once.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .backend import SyntheticPairConfig
from .channel import ChannelParams, Fading, dbm_to_watts, uplink_time
from .core import SeededRng, SimError, Vocabulary, derive_seed
from .harness import Cell, Method, RunConfig, build_grid
from .importance import ImportanceConfig, Scope
from .metrics import HLM_THROUGHPUT, EnergyParams, LatencyParams, PayloadFactor, SlmCountMode, calibrate_mu_llm
from .uncertainty import UncertaintyConfig

SECTIONS = ("backend", "uncertainty", "importance", "channel", "latency", "energy", "run")
_PROMPT_STREAM = 0x5052  # keeps synthetic prompts off the decoding streams


class ConfigError(SimError):
    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Experiment:
    run: RunConfig
    k_values: tuple[int, ...]
    gamma_values: tuple[float, ...]
    methods: tuple[Method, ...]
    i_only_k: int = 7
    i_only_gamma: float = 1.0
    i_only_sweep_k: bool = False
    workers: int = 1

    def grid(self) -> list[Cell]:
        return build_grid(
            self.methods, self.k_values, self.gamma_values,
            self.i_only_gamma, self.i_only_k, self.i_only_sweep_k,
        )


class _Section:
    def __init__(self, name: str, data: Any, allowed: set[str]) -> None:
        if not isinstance(data, dict):
            raise ConfigError(name, "section must be a JSON object")
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"{name}.{unknown[0]}", "unknown key")
        self.name = name
        self.data = data

    def get(self, key: str, default: Any = ..., check: Callable[[Any], bool] | None = None, expect: str = ""):
        path = f"{self.name}.{key}"
        if key not in self.data:
            if default is ...:
                raise ConfigError(path, "missing required key")
            return default
        value = self.data[key]
        if check is not None and not check(value):
            raise ConfigError(path, f"expected {expect}, got {value!r}")
        return value


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _pos(v) -> bool:
    return _is_num(v) and v > 0


def _nonneg(v) -> bool:
    return _is_num(v) and v >= 0


def _seed(v) -> bool:
    return _is_int(v) and 0 <= v < 2**64


def _list_of(pred) -> Callable[[Any], bool]:
    return lambda v: isinstance(v, list) and len(v) > 0 and all(pred(x) for x in v)


def _choice(enum) -> Callable[[Any], bool]:
    values = {e.value for e in enum}
    return lambda v: v in values


def parse_int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"not a comma-separated integer list: {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise ValueError(f"k values must be positive integers: {text!r}")
    return values


def parse_float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"not a comma-separated number list: {text!r}") from None
    if not values or any(not math.isfinite(v) or v < 0 for v in values):
        raise ValueError(f"gamma values must be finite and >= 0: {text!r}")
    return values


def synthetic_prompts(vocab_size: int, count: int, length: int, seed: int, eos_token: int | None) -> tuple[tuple[int, ...], ...]:
    """Uniform random prompts that never contain the EOS id."""
    rng = SeededRng(derive_seed(seed, _PROMPT_STREAM))
    ids = np.array([t for t in range(vocab_size) if t != eos_token])
    return tuple(tuple(int(t) for t in ids[rng.integers(0, ids.size, size=length)]) for _ in range(count))


def parse_config(data: dict, seed_override: int | None = None) -> Experiment:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    missing = [s for s in SECTIONS if s not in data]
    if missing:
        raise ConfigError(missing[0], "missing section")

    run = _Section("run", data["run"], {
        "methods", "s_max", "eos_token", "prompts", "master_seed", "workers",
    })
    backend = _Section("backend", data["backend"], {
        "vocab_size", "d_k", "divergence", "logit_scale", "seed", "window",
        "attn_scale", "recency_slope", "position_jitter", "eos_logit_bias",
    })
    vocab_size = backend.get("vocab_size", check=lambda v: _is_int(v) and v >= 2, expect="integer >= 2")
    eos = run.get("eos_token", None, lambda v: v is None or (_is_int(v) and 0 <= v < vocab_size),
                  f"null or token id in [0, {vocab_size})")
    divergence = backend.get("divergence", 0.5, lambda v: _is_num(v) and 0 <= v <= 1, "number in [0, 1]")
    backend_cfg = SyntheticPairConfig(
        vocab=Vocabulary(vocab_size),
        d_k=backend.get("d_k", 4, lambda v: _is_int(v) and v >= 1, "integer >= 1"),
        divergence=float(divergence),
        logit_scale=float(backend.get("logit_scale", 1.0, _pos, "positive number")),
        seed=backend.get("seed", 0, _seed, "64-bit unsigned integer"),
        window=backend.get("window", 4, lambda v: _is_int(v) and v >= 1, "integer >= 1"),
        attn_scale=float(backend.get("attn_scale", 1.0, _nonneg, "number >= 0")),
        recency_slope=float(backend.get("recency_slope", 0.0, _is_num, "number")),
        position_jitter=float(backend.get("position_jitter", 1.0, _nonneg, "number >= 0")),
        eos_token=eos,
        eos_logit_bias=float(backend.get("eos_logit_bias", 0.0, _is_num, "number")),
    )

    unc = _Section("uncertainty", data["uncertainty"], {"n_samples", "temp_range", "threshold"})
    temp_range = unc.get("temp_range", [0.5, 2.0],
                         lambda v: isinstance(v, list) and len(v) == 2 and all(_pos(x) for x in v) and v[0] <= v[1],
                         "[lo, hi] with 0 < lo <= hi")
    unc_cfg = UncertaintyConfig(
        n_samples=unc.get("n_samples", 64, lambda v: _is_int(v) and v >= 1, "integer >= 1"),
        temp_range=(float(temp_range[0]), float(temp_range[1])),
        threshold=float(unc.get("threshold", 0.2, lambda v: _is_num(v) and 0 <= v <= 1, "number in [0, 1]")),
    )

    imp = _Section("importance", data["importance"], {
        "scope", "k_sweep", "gamma_sweep", "i_only_k", "i_only_gamma", "i_only_sweep_k",
    })
    k_values = tuple(imp.get("k_sweep", [3, 5, 7, 9, 11], _list_of(lambda v: _is_int(v) and v >= 1), "list of integers >= 1"))
    gamma_values = tuple(float(g) for g in imp.get("gamma_sweep", [0.5, 1.0, 1.5], _list_of(_nonneg), "list of numbers >= 0"))
    i_only_k = imp.get("i_only_k", 7, lambda v: _is_int(v) and v >= 1, "integer >= 1")
    i_only_gamma = float(imp.get("i_only_gamma", 1.0, _nonneg, "number >= 0"))
    imp_cfg = ImportanceConfig(
        k=k_values[0], gamma=gamma_values[0],
        scope=Scope(imp.get("scope", "row", _choice(Scope), "'row' or 'matrix'")),
    )

    ch = _Section("channel", data["channel"], {
        "bandwidth_hz", "tx_power_dbm", "noise_dbm", "distance_m", "ref_distance_m",
        "pathloss_exp", "fading", "prob_bits", "snr_override",
    })
    channel = ChannelParams(
        bandwidth_hz=float(ch.get("bandwidth_hz", 1e6, _pos, "positive number")),
        tx_power_w=dbm_to_watts(float(ch.get("tx_power_dbm", 23.0, _is_num, "number (dBm)"))),
        noise_w=dbm_to_watts(float(ch.get("noise_dbm", -104.0, _is_num, "number (dBm)"))),
        distance_m=float(ch.get("distance_m", 2500.0, _pos, "positive number")),
        ref_distance_m=float(ch.get("ref_distance_m", 1.0, _pos, "positive number")),
        pathloss_exp=float(ch.get("pathloss_exp", 4.0, lambda v: _is_num(v) and v >= 2, "number >= 2")),
        fading=Fading(ch.get("fading", "constant", _choice(Fading), "'constant' or 'rayleigh'")),
        vocab_size=vocab_size,
        prob_bits=ch.get("prob_bits", 32, lambda v: v in (16, 32), "16 or 32"),
        snr_override=ch.get("snr_override", None, lambda v: v is None or _nonneg(v), "null or number >= 0"),
    )

    lat = _Section("latency", data["latency"], {"mu_slm", "mu_llm", "hlm_throughput"})
    mu_slm = float(lat.get("mu_slm", 1.0 / 0.53, _pos, "positive number"))
    mu_llm = lat.get("mu_llm", "calibrate", lambda v: v == "calibrate" or _nonneg(v), "'calibrate' or number >= 0")
    if mu_llm == "calibrate":
        target = float(lat.get("hlm_throughput", HLM_THROUGHPUT, _pos, "positive number"))
        try:
            mu_llm = calibrate_mu_llm(mu_slm, uplink_time(channel, 1.0), target)
        except SimError as exc:
            raise ConfigError("latency.mu_llm", str(exc)) from None
    latency = LatencyParams(mu_slm, float(mu_llm))

    en = _Section("energy", data["energy"], {"eps_u", "eps_r", "eps_s", "payload_factor", "slm_count_mode"})
    energy = EnergyParams(
        eps_u=float(en.get("eps_u", 300.0, _nonneg, "number >= 0")),
        eps_r=float(en.get("eps_r", 350.0, _nonneg, "number >= 0")),
        eps_s=float(en.get("eps_s", 100.0, _nonneg, "number >= 0")),
        payload_factor=PayloadFactor(en.get("payload_factor", "normalized", _choice(PayloadFactor), "'literal' or 'normalized'")),
        slm_count_mode=SlmCountMode(en.get("slm_count_mode", "all", _choice(SlmCountMode), "'all' or 'local_only'")),
    )

    s_max = run.get("s_max", check=lambda v: _is_int(v) and v >= 2, expect="integer >= 2")
    master_seed = run.get("master_seed", 0, _seed, "64-bit unsigned integer")
    if seed_override is not None:
        master_seed = seed_override
    methods = tuple(Method(m) for m in run.get(
        "methods", [m.value for m in Method], _list_of(_choice(Method)), f"list drawn from {[m.value for m in Method]}"))
    prompts_spec = run.get("prompts", check=lambda v: isinstance(v, (dict, list)), expect="object or list of token lists")
    prompts = _parse_prompts(prompts_spec, vocab_size, s_max, eos, master_seed)
    workers = run.get("workers", 1, lambda v: _is_int(v) and v >= 1, "integer >= 1")

    run_cfg = RunConfig(
        backend=backend_cfg, prompts=prompts, s_max=s_max, method=Method.U_PLUS_I, eos_token=eos,
        uncertainty=unc_cfg, importance=imp_cfg, channel=channel, latency=latency, energy=energy,
        master_seed=master_seed,
    )
    return Experiment(
        run=run_cfg, k_values=k_values, gamma_values=gamma_values, methods=methods,
        i_only_k=i_only_k, i_only_gamma=i_only_gamma,
        i_only_sweep_k=imp.get("i_only_sweep_k", False, lambda v: isinstance(v, bool), "true or false"),
        workers=workers,
    )


def _parse_prompts(spec, vocab_size: int, s_max: int, eos: int | None, master_seed: int):
    if isinstance(spec, list):
        if not spec:
            raise ConfigError("run.prompts", "no prompts given")
        for i, p in enumerate(spec):
            if not isinstance(p, list) or not all(_is_int(t) and 0 <= t < vocab_size for t in p):
                raise ConfigError(f"run.prompts[{i}]", f"expected a list of token ids in [0, {vocab_size})")
            if len(p) >= s_max:
                raise ConfigError(f"run.prompts[{i}]", f"length {len(p)} must be below s_max={s_max}")
        return tuple(tuple(p) for p in spec)
    section = _Section("run.prompts", spec, {"count", "length", "seed"})
    count = section.get("count", check=lambda v: _is_int(v) and v >= 1, expect="integer >= 1")
    length = section.get("length", check=lambda v: _is_int(v) and 0 <= v < s_max, expect=f"integer in [0, {s_max})")
    seed = section.get("seed", master_seed, _seed, "64-bit unsigned integer")
    return synthetic_prompts(vocab_size, count, length, seed, eos)


def load_config(path: str | os.PathLike, seed_override: int | None = None) -> Experiment:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON ({exc})") from None
    return parse_config(data, seed_override)
