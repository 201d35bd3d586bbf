import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foragelab.errors import ContractViolation, InsufficientSamplesError
from foragelab.stats import mann_whitney_u, relative_change, relative_drop, significant_change, significant_drop

from oracles import mann_whitney_brute, u_by_ranks

BASE10 = [50, 51, 49, 52, 50, 48, 53, 50, 51, 49]


class TestMannWhitney:
    @pytest.mark.parametrize("seed", range(50))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n1, n2 = rng.integers(2, 9, size=2)
        # small integer range forces plenty of ties
        x = rng.integers(0, 6, n1).tolist()
        y = rng.integers(0, 6, n2).tolist()
        got = mann_whitney_u(x, y)
        u, p = mann_whitney_brute(x, y)
        assert got.u == u == u_by_ranks(x, y)
        assert abs(got.p_value - p) <= 1e-9

    def test_all_tied(self):
        r = mann_whitney_u([3, 3, 3], [3, 3])
        assert r.u == 3.0 and r.p_value == 1.0

    def test_complete_separation(self):
        r = mann_whitney_u(BASE10, [1, 0, 2, 1, 0, 1, 2, 0, 1, 1])
        assert r.u == 100.0
        assert r.p_value < 0.001

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=8),
           st.lists(st.integers(0, 20), min_size=1, max_size=8))
    def test_u_symmetry(self, x, y):
        a, b = mann_whitney_u(x, y), mann_whitney_u(y, x)
        assert a.u + b.u == len(x) * len(y)
        assert a.p_value == pytest.approx(b.p_value, abs=1e-12)

    def test_empty(self):
        with pytest.raises(InsufficientSamplesError):
            mann_whitney_u([], [1])


class TestSignificance:
    def test_identical_samples(self):
        assert not significant_drop([50, 51, 49, 52, 50], [50, 51, 49, 52, 50])

    def test_collapse_is_significant(self):
        assert significant_drop(BASE10, [1, 0, 2, 1, 0, 1, 2, 0, 1, 1])

    def test_small_drop_below_threshold(self):
        assert not significant_drop(BASE10, [v - 1 for v in BASE10])

    def test_increase_is_not_a_drop_but_is_a_change(self):
        more = [2 * v for v in BASE10]
        assert not significant_drop(BASE10, more)
        assert significant_change(BASE10, more)

    def test_needs_five(self):
        with pytest.raises(InsufficientSamplesError):
            significant_drop([1, 2, 3, 4], [1, 2, 3, 4])

    def test_paired_lengths(self):
        with pytest.raises(ContractViolation):
            significant_drop([1, 2, 3, 4, 5], [1, 2, 3, 4, 5, 6])

    def test_relative_change(self):
        assert relative_change([10, 10, 10], [5, 5, 5]) == -0.5
        assert relative_drop([10, 10, 10], [5, 5, 5]) == 0.5
        assert relative_change([0, 0, 0], [0, 0, 0]) == 0.0
        assert relative_change([0, 0, 0], [1, 1, 1]) == math.inf
