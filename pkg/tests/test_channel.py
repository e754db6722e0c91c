import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import kstest

from hlmsim.channel import (
    ChannelParams,
    Fading,
    dbm_to_watts,
    draw_fading,
    payload_bits,
    snr,
    transmission_time,
    uplink_time,
)
from hlmsim.core import ParameterError, SeededRng

# 23 dBm, -104 dBm, 2500 m, alpha 4, h = 1, path loss in raw meters;
# evaluated with mpmath at 40 digits: 0.12830393180858170496...
DEFAULT_SNR = 0.1283039318085817


class TestPayload:
    def test_full_vocab_sizes(self):
        assert payload_bits(ChannelParams(vocab_size=32000, prob_bits=32)) == 1_024_000
        assert payload_bits(ChannelParams(vocab_size=32000, prob_bits=16)) == 512_000

    def test_small(self):
        bits = payload_bits(ChannelParams(vocab_size=8, prob_bits=16))
        assert bits == 128 and isinstance(bits, int)

    def test_bits_validated(self):
        with pytest.raises(ParameterError):
            ChannelParams(prob_bits=8)


class TestSnr:
    def test_unit_cancellation(self):
        p = ChannelParams(tx_power_w=2e-3, noise_w=2e-3, distance_m=1.0, pathloss_exp=4)
        assert snr(p, 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_zero_gain_is_outage(self):
        p = ChannelParams()
        assert snr(p, 0.0) == 0.0
        assert uplink_time(p, 0.0) == math.inf

    def test_default_parameters(self):
        assert snr(ChannelParams(), 1.0) == pytest.approx(DEFAULT_SNR, rel=1e-12)

    def test_dbm_conversion(self):
        assert dbm_to_watts(30.0) == 1.0
        assert dbm_to_watts(23.0) == pytest.approx(0.19952623149688797, rel=1e-15)

    def test_override(self):
        assert snr(ChannelParams(snr_override=3.0), 0.5) == 1.5

    def test_reference_distance(self):
        a = ChannelParams(distance_m=2500.0)
        b = ChannelParams(distance_m=2.5, ref_distance_m=1e-3)
        assert snr(a, 1.0) == pytest.approx(snr(b, 1.0), rel=1e-12)

    @pytest.mark.parametrize("kw", [{"distance_m": 0.0}, {"pathloss_exp": 1.5}, {"bandwidth_hz": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            ChannelParams(**kw)


class TestUplinkTime:
    def test_examples(self):
        assert transmission_time(1_024_000, 1e6, 1.0) == 1.024
        assert transmission_time(1_024_000, 1e6, 3.0) == 0.512
        assert transmission_time(0, 1e6, 0.0) == 0.0

    def test_through_params(self):
        p = ChannelParams(vocab_size=32000, prob_bits=32, snr_override=1.0)
        assert uplink_time(p, 1.0) == 1.024

    def test_doubling_payload_doubles_time(self):
        p = ChannelParams()
        assert uplink_time(p, 1.0, 2 * 512_000) == 2 * uplink_time(p, 1.0, 512_000)

    @given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
    def test_monotone(self, r1, r2):
        lo, hi = sorted((r1, r2))
        if lo < hi:
            assert transmission_time(1000, 1e6, lo) > transmission_time(1000, 1e6, hi)
        assert transmission_time(2000, 1e6, lo) > transmission_time(1000, 1e6, lo)


class TestFading:
    def test_constant(self):
        p = ChannelParams(fading=Fading.CONSTANT)
        rng = SeededRng(0)
        assert all(draw_fading(p, rng) == 1.0 for _ in range(10))

    def test_rayleigh_mean(self):
        p = ChannelParams(fading="rayleigh")
        rng = SeededRng(11)
        h = np.array([draw_fading(p, rng) for _ in range(100_000)])
        assert abs(h.mean() - 1.0) <= 0.01

    def test_rayleigh_ks(self):
        p = ChannelParams(fading="rayleigh")
        rng = SeededRng(12)
        h = [draw_fading(p, rng) for _ in range(100_000)]
        assert kstest(h, "expon").pvalue > 0.001

    def test_reproducible(self):
        p = ChannelParams(fading="rayleigh")
        a, b = SeededRng(5), SeededRng(5)
        assert [draw_fading(p, a) for _ in range(5)] == [draw_fading(p, b) for _ in range(5)]
