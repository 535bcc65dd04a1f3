"""Tests for exact penalty expansion (lambda tables) of PK and MPK kernels."""
import time

import numpy as np
import pytest

from mpktools.errors import DataError, DimensionError, GuardExceededError
from mpktools.kernels import (
    MAX_MONOMIALS,
    MpkParams,
    PenaltyTable,
    PkParams,
    expand_penalties,
    kernel_eval,
    reconstruct_kernel,
)
from mpktools.volterra import enumerate_monomials

PK_TABLE = {
    (0, 0): 1, (1, 0): 3, (0, 1): 3, (2, 0): 3, (1, 1): 6, (0, 2): 3,
    (3, 0): 1, (2, 1): 3, (1, 2): 3, (0, 3): 1,
}

# the eight MPK entries on which the published table and the exact expansion agree
MPK_CONSISTENT = {(0, 3): 0, (1, 2): 0, (0, 2): 0, (3, 0): 1, (2, 1): 1, (1, 1): 2, (0, 1): 1, (0, 0): 1}


def eq12_params():
    return MpkParams.from_derived([1.0, 1.0, 1.0], [[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]])


class TestPkExpansion:
    """Multinomial coefficients of (1 + u^T v)^r."""

    def test_memory_one_order_three(self):
        start = time.perf_counter()
        table = expand_penalties(PkParams(3), 2, 3)
        assert time.perf_counter() - start < 1.0
        assert len(table) == 10
        for degrees, value in PK_TABLE.items():
            assert table[degrees] == value

    def test_order_one(self):
        table = expand_penalties(PkParams(1), 3, 1)
        assert [idx.total_degree for idx in table.entries] == [0, 1, 1, 1]
        np.testing.assert_array_equal(table.as_vector(), [1, 1, 1, 1])

    def test_keys_follow_enumeration(self):
        table = expand_penalties(PkParams(3), 3, 3)
        assert list(table.entries) == enumerate_monomials(2, 3)


class TestMpkExpansion:
    """Polynomial multiplication of the MPK factors."""

    def test_consistent_entries(self):
        table = expand_penalties(eq12_params(), 2, 3)
        for degrees, value in MPK_CONSISTENT.items():
            assert table[degrees] == value

    def test_errata_entries(self):
        """The published table lists 2 for (2,0) and (1,0); the exact expansion gives 3."""
        table = expand_penalties(eq12_params(), 2, 3)
        published = {(2, 0): 2, (1, 0): 2}
        for degrees, value in published.items():
            assert table[degrees] == 3
            assert table[degrees] != value

    def test_constant_kernel(self):
        params = MpkParams.from_derived([1.0, 1.0], np.zeros((2, 3)))
        table = expand_penalties(params, 3, 2)
        vec = table.as_vector()
        assert vec[0] == 1.0
        assert np.all(vec[1:] == 0.0)

    def test_all_lambda_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            params = MpkParams(3, 3, rng.normal(size=3), rng.normal(size=(3, 3)))
            assert np.all(expand_penalties(params, 3, 3).as_vector() >= 0)

    def test_degree_and_dimension_checks(self):
        with pytest.raises(ValueError, match="degree"):
            expand_penalties(eq12_params(), 2, 2)
        with pytest.raises(DimensionError):
            expand_penalties(eq12_params(), 3, 3)


class TestReconstruction:
    """sum lambda phi(u) phi(v) equals the kernel."""

    def test_random_pairs_both_kernels(self):
        rng = np.random.default_rng(42)
        start = time.perf_counter()
        for trial in range(100):
            m = int(rng.integers(0, 5))
            d = m + 1
            if trial % 2:
                kernel = PkParams(3)
            else:
                kernel = MpkParams(3, d, rng.uniform(0.2, 1.0, 3), rng.uniform(0.0, 1.0, (3, d)))
            table = expand_penalties(kernel, d, 3)
            u, v = rng.normal(size=d), rng.normal(size=d)
            expected = kernel_eval(u, v, kernel)
            assert reconstruct_kernel(table, u, v) == pytest.approx(expected, rel=1e-10, abs=1e-12)
        assert time.perf_counter() - start < 10.0


class TestGuard:
    """Expansion guard."""

    def test_guard_exceeded(self):
        with pytest.raises(GuardExceededError) as info:
            expand_penalties(PkParams(4), 100, 4)
        assert info.value.limit == MAX_MONOMIALS
        assert info.value.count > MAX_MONOMIALS


class TestPenaltyTable:
    """Table validation and CSV files."""

    def test_keys_must_match(self):
        with pytest.raises(DimensionError):
            PenaltyTable({(0, 0): 1.0, (1, 0): 1.0}, degree=1, input_dim=2)

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            PenaltyTable({(0,): 1.0, (1,): -1.0}, degree=1, input_dim=1)

    def test_csv_round_trip(self, tmp_path):
        table = expand_penalties(eq12_params(), 2, 3)
        path = tmp_path / "lambda.csv"
        table.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "d_0,d_1,lambda"
        assert len(lines) == 11
        again = PenaltyTable.from_csv(path)
        np.testing.assert_array_equal(again.as_vector(), table.as_vector())

    def test_csv_bad_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("d_0,lambda\n0,1.0\n1,abc\n")
        with pytest.raises(DataError, match="bad.csv:3"):
            PenaltyTable.from_csv(path)
