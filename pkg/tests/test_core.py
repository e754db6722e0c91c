import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from hlmsim.core import (
    LogitVector,
    ParameterError,
    ProbabilityVector,
    SeededRng,
    SequenceError,
    TokenSequence,
    ValidationError,
    Vocabulary,
    derive_seed,
    inverse_cdf,
    sample,
    softmax,
)

finite_logits = st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=16)


def mp_softmax(logits, temperature):
    with mpmath.workdps(50):
        e = [mpmath.exp(mpmath.mpf(z) / mpmath.mpf(temperature)) for z in logits]
        s = mpmath.fsum(e)
        return [float(x / s) for x in e]


class TestSoftmax:
    def test_uniform_logits(self):
        np.testing.assert_allclose(softmax([0, 0, 0, 0]).probs, [0.25] * 4, atol=1e-15)

    def test_two_to_one(self):
        np.testing.assert_allclose(softmax([math.log(2), 0.0]).probs, [2 / 3, 1 / 3], rtol=1e-14)

    def test_matches_high_precision_oracle(self):
        logits = [3.1, -0.7, 1.2]
        np.testing.assert_allclose(softmax(logits, 0.5).probs, mp_softmax(logits, 0.5), rtol=1e-13)

    @pytest.mark.parametrize("t", [0.0, -1.0, float("nan")])
    def test_rejects_bad_temperature(self, t):
        with pytest.raises(ParameterError):
            softmax([1.0, 2.0], t)

    def test_rejects_non_finite_logits(self):
        with pytest.raises(ValidationError):
            softmax([1.0, float("inf")])
        with pytest.raises(ValidationError):
            LogitVector([float("nan"), 0.0])

    def test_extreme_logits_stay_finite(self):
        p = softmax([1000.0, -1000.0, 0.0], 1e-3).probs
        assert p[0] == 1.0 and np.isfinite(p).all()

    @given(finite_logits, st.floats(1e-3, 1e3))
    def test_sums_to_one(self, logits, t):
        assert abs(softmax(logits, t).probs.sum() - 1.0) <= 1e-9

    @given(finite_logits, st.floats(-100, 100), st.floats(0.1, 10))
    def test_shift_invariant(self, logits, c, t):
        a = softmax(logits, t).probs
        b = softmax([z + c for z in logits], t).probs
        np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)

    @given(finite_logits, st.floats(1e-3, 1e3))
    def test_argmax_preserved(self, logits, t):
        z = np.array(logits)
        top = np.sort(z)[-2:]
        assume(top[1] - top[0] > 1e-6)
        assert np.argmax(softmax(z, t).probs) == np.argmax(z)


class TestProbabilityVector:
    def test_small_drift_is_renormalized(self):
        p = ProbabilityVector([0.5, 0.5 + 5e-7])
        assert abs(p.probs.sum() - 1.0) <= 1e-12

    def test_large_drift_rejected(self):
        with pytest.raises(ValidationError):
            ProbabilityVector([0.5, 0.51])

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            ProbabilityVector([1.5, -0.5])

    def test_immutable(self):
        p = ProbabilityVector([0.25] * 4)
        with pytest.raises(ValueError):
            p.probs[0] = 1.0


class TestSequenceTypes:
    def test_vocabulary_minimum(self):
        with pytest.raises(ValidationError):
            Vocabulary(1)

    def test_sequence_limits(self):
        s = TokenSequence((1, 2), max_len=3, vocab_size=4)
        s = s.append(3)
        assert s.full and s.tokens == (1, 2, 3)
        with pytest.raises(SequenceError):
            s.append(0)
        with pytest.raises(SequenceError):
            TokenSequence((4,), max_len=3, vocab_size=4)


class TestSample:
    def test_one_hot(self):
        dist = ProbabilityVector([0, 0, 0, 1, 0])
        rng = SeededRng(1)
        assert all(sample(dist, rng) == 3 for _ in range(1000))

    def test_uniform_frequencies(self):
        dist = ProbabilityVector([0.25] * 4)
        rng = SeededRng(7)
        counts = np.bincount([sample(dist, rng) for _ in range(100_000)], minlength=4)
        np.testing.assert_allclose(counts / 100_000, 0.25, atol=0.01)

    def test_deterministic(self):
        dist = softmax([0.3, 1.2, -0.4, 0.9])
        a, b = SeededRng(42), SeededRng(42)
        assert [sample(dist, a) for _ in range(20)] == [sample(dist, b) for _ in range(20)]

    def test_one_uniform_per_call(self):
        dist = softmax([0.3, 1.2, -0.4])
        a, b = SeededRng(3), SeededRng(3)
        sample(dist, a)
        b.uniform()
        assert a.uniform() == b.uniform()

    @pytest.mark.parametrize("seed,size", [(0, 2), (1, 5), (2, 8), (3, 16)])
    def test_chi_square(self, seed, size):
        probs = np.random.default_rng(seed).dirichlet(np.ones(size))
        dist = ProbabilityVector(probs)
        rng = SeededRng(100 + seed)
        counts = np.bincount([sample(dist, rng) for _ in range(100_000)], minlength=size)
        assert chisquare(counts, dist.probs * 100_000).pvalue > 0.001

    def test_zero_mass_ids_never_drawn(self):
        probs = np.array([0.0, 0.5, 0.0, 0.5, 0.0])
        u = np.linspace(0, 1, 10_001, endpoint=False)
        drawn = inverse_cdf(np.tile(probs, (u.size, 1)), u)
        assert set(drawn.tolist()) == {1, 3}
        assert inverse_cdf(probs, 0.0) == 1
        assert inverse_cdf(probs, 1.0 - 1e-17) == 3


class TestSeededRng:
    def test_child_stream_independent_of_parent_consumption(self):
        a, b = SeededRng(9), SeededRng(9)
        a.uniforms(100)
        assert a.child(4, 2).uniform() == b.child(4, 2).uniform()

    def test_children_differ(self):
        r = SeededRng(9)
        assert r.child(0).uniform() != r.child(1).uniform()

    def test_bit_exact_replay(self):
        assert SeededRng(123, (1, 2)).uniforms(5).tolist() == SeededRng(123, (1, 2)).uniforms(5).tolist()

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(ParameterError):
            SeededRng(seed)

    def test_derive_seed_stable(self):
        assert derive_seed(1, 2) == derive_seed(1, 2)
        assert derive_seed(1, 2) != derive_seed(2, 1)
