import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hlmsim.core import ParameterError
from hlmsim.importance import (
    ConfigurationError,
    ImportanceConfig,
    Scope,
    decide_upload,
    importance_test,
    importance_threshold,
    topk_value,
)

ROW = [0.1, 0.2, 0.7]


def mp_threshold(row, gamma):
    with mpmath.workdps(40):
        r = [mpmath.mpf(str(v)) for v in row]
        mean = mpmath.fsum(r) / len(r)
        std = mpmath.sqrt(mpmath.fsum((v - mean) ** 2 for v in r) / len(r))
        return max(r) - mpmath.mpf(str(gamma)) * std


rows = st.integers(2, 40).flatmap(
    lambda n: st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n).map(lambda v: np.array(v) / np.sum(v))
)


class TestThreshold:
    def test_hand_example(self):
        expected = float(mp_threshold(ROW, 1.0))
        assert expected == pytest.approx(0.4375330708662730, abs=1e-15)
        assert abs(importance_threshold(ROW, 1.0) - expected) <= 1e-9

    @pytest.mark.parametrize("gamma", [0.0, 0.5, 3.0])
    def test_constant_row(self, gamma):
        assert importance_threshold([0.25] * 4, gamma) == 0.25

    def test_gamma_zero_is_max(self):
        assert importance_threshold(ROW, 0.0) == 0.7

    def test_large_gamma_goes_negative(self):
        assert importance_threshold(ROW, 10.0) < 0

    def test_empty_row(self):
        with pytest.raises(ParameterError):
            importance_threshold([], 1.0)


class TestTopk:
    def test_examples(self):
        assert topk_value([0.1, 0.5, 0.4], 1) == 0.5
        assert topk_value([0.1, 0.5, 0.4], 3) == 0.1
        assert topk_value([0.1, 0.5], 5) == float("-inf")

    def test_invalid_k(self):
        with pytest.raises(ParameterError):
            topk_value([0.1], 0)


class TestDecideUpload:
    def test_both_conditions_pass(self):
        g = decide_upload(0.5, ROW, None, ImportanceConfig(k=1, gamma=1.0), theta_u=0.2)
        assert g.delta == 1 and g.topk_value == 0.7 and g.theta_imp == pytest.approx(0.43753307, abs=1e-8)

    def test_low_uncertainty_blocks(self):
        g = decide_upload(0.1, ROW, None, ImportanceConfig(k=1, gamma=1.0), theta_u=0.2)
        assert g.delta == 0 and g.importance_pass

    def test_uncertainty_boundary_is_strict(self):
        assert decide_upload(0.2, ROW, None, ImportanceConfig(k=1), theta_u=0.2).delta == 0

    def test_insufficient_values_fail(self):
        g = decide_upload(0.9, [0.4, 0.6], None, ImportanceConfig(k=5), theta_u=0.2)
        assert not g.importance_pass and g.delta == 0

    def test_empty_row_never_uploads(self):
        g = decide_upload(1.0, [], None, ImportanceConfig(k=1, gamma=5.0), theta_u=0.0)
        assert g.delta == 0 and not g.importance_pass

    def test_matrix_scope_needs_values(self):
        with pytest.raises(ConfigurationError):
            decide_upload(0.5, ROW, None, ImportanceConfig(scope=Scope.MATRIX), theta_u=0.2)

    def test_matrix_scope_sorts_the_whole_matrix(self):
        # the row alone has only one weight above its threshold; the matrix has more
        cfg = ImportanceConfig(k=2, gamma=0.5, scope=Scope.MATRIX)
        row = [0.1, 0.1, 0.8]
        assert not importance_test(row, None, ImportanceConfig(k=2, gamma=0.5))[0]
        assert importance_test(row, [1.0, 0.9, 0.1, 0.1, 0.8], cfg)[0]

    def test_u_out_of_range(self):
        with pytest.raises(ParameterError):
            decide_upload(1.2, ROW, None, ImportanceConfig(), 0.2)


class TestProperties:
    @given(rows, st.floats(0, 3))
    def test_monotone_in_k(self, row, gamma):
        passes = [importance_test(row, None, ImportanceConfig(k=k, gamma=gamma))[0] for k in range(1, row.size + 2)]
        # once the gate fails at some k it fails for every larger k
        assert passes == sorted(passes, reverse=True)

    @given(rows, st.integers(1, 12))
    def test_monotone_in_gamma(self, row, k):
        gammas = np.linspace(0, 3, 13)
        passes = [importance_test(row, None, ImportanceConfig(k=k, gamma=g))[0] for g in gammas]
        assert passes == sorted(passes)

    @given(st.integers(1, 30), st.integers(1, 10))
    def test_flat_row_with_zero_gamma_never_passes(self, n, k):
        row = np.full(n, 1.0 / n)
        assert not importance_test(row, None, ImportanceConfig(k=k, gamma=0.0))[0]

    @given(rows, st.floats(0, 1), st.floats(0, 1), st.integers(1, 5), st.floats(0, 2))
    def test_conjunction(self, row, u, theta_u, k, gamma):
        g = decide_upload(u, row, None, ImportanceConfig(k=k, gamma=gamma), theta_u)
        assert g.delta == int((u > theta_u) and g.importance_pass)
        assert g.uncertainty_pass == (u > theta_u)
