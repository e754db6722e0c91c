"""Uplink model: payload size, SNR, Shannon-rate transmission time, fading."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .core import ParameterError, SeededRng


class Fading(str, Enum):
    CONSTANT = "constant"
    RAYLEIGH = "rayleigh"


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Physical uplink parameters, SI units (Hz, W, m).

    Path loss is ``(distance_m / ref_distance_m) ** -pathloss_exp``; the default
    1 m reference means the raw distance in meters enters the SNR.
    ``snr_override`` pins the average-case SNR and bypasses the link budget.
    """

    bandwidth_hz: float = 1e6
    tx_power_w: float = dbm_to_watts(23.0)
    noise_w: float = dbm_to_watts(-104.0)
    distance_m: float = 2500.0
    pathloss_exp: float = 4.0
    fading: Fading = Fading.CONSTANT
    vocab_size: int = 32000
    prob_bits: int = 32
    ref_distance_m: float = 1.0
    snr_override: float | None = None

    def __post_init__(self) -> None:
        for name in ("bandwidth_hz", "tx_power_w", "noise_w", "distance_m", "ref_distance_m"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be strictly positive")
        if not self.pathloss_exp >= 2:
            raise ParameterError("pathloss_exp must be >= 2")
        if self.prob_bits not in (16, 32):
            raise ParameterError("prob_bits must be 16 or 32")
        if int(self.vocab_size) != self.vocab_size or self.vocab_size < 2:
            raise ParameterError("vocab_size must be an integer >= 2")
        if self.snr_override is not None and not self.snr_override >= 0:
            raise ParameterError("snr_override must be >= 0")
        object.__setattr__(self, "fading", Fading(self.fading))


def payload_bits(params: ChannelParams) -> int:
    return int(params.vocab_size) * int(params.prob_bits)


def snr(params: ChannelParams, h: float) -> float:
    if h < 0:
        raise ParameterError("channel gain must be >= 0")
    if params.snr_override is not None:
        return h * params.snr_override
    pathloss = (params.distance_m / params.ref_distance_m) ** (-params.pathloss_exp)
    return h * params.tx_power_w * pathloss / params.noise_w


def transmission_time(bits: float, bandwidth_hz: float, rho: float) -> float:
    if bits == 0:
        return 0.0
    if rho <= 0:
        return math.inf
    return bits / (bandwidth_hz * math.log2(1.0 + rho))


def uplink_time(params: ChannelParams, h: float, bits: int | None = None) -> float:
    """Seconds to push one distribution upstream; ``inf`` on outage."""
    bits = payload_bits(params) if bits is None else bits
    return transmission_time(bits, params.bandwidth_hz, snr(params, h))


def draw_fading(params: ChannelParams, rng: SeededRng) -> float:
    if params.fading is Fading.CONSTANT:
        return 1.0
    return rng.exponential()
