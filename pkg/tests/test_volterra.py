"""Tests for mpktools.volterra (monomials, series, benchmark systems, metrics).

Organized into test classes:
- TestMonomials: enumeration order, counts, multinomial coefficients
- TestFeatureMap: feature vectors and batched feature matrices
- TestSeries: Volterra series evaluation, simulation and JSON documents
- TestBenchmarkSystems: the memory-6 benchmark and the penalty example map
- TestDataset: datasets and input normalization
- TestMetrics: Fit% and RMSE
"""
import math

import numpy as np
import pytest

from mpktools.errors import DataError, DimensionError, NumericalError
from mpktools.volterra import (
    Dataset,
    MonomialIndex,
    Normalization,
    VolterraSeries,
    enumerate_monomials,
    exponent_matrix,
    feature_map,
    feature_matrix,
    fit_percent,
    lagged_windows,
    make_rng,
    monomial_count,
    multinomial_coeff,
    penalty_example_series,
    rmse,
    simulate_series,
    spl_output,
    spl_outputs,
    spl_series,
)


class TestMonomials:
    """Monomial enumeration and multinomial coefficients."""

    def test_memory_one_order_three_has_ten_indices(self):
        """m=1, r=3 gives the ten monomials of the worked penalty table."""
        monomials = enumerate_monomials(1, 3)
        assert len(monomials) == 10
        assert [m.degrees for m in monomials] == [
            (0, 0),
            (1, 0), (0, 1),
            (2, 0), (1, 1), (0, 2),
            (3, 0), (2, 1), (1, 2), (0, 3),
        ]

    def test_memory_zero_order_one(self):
        """m=0, r=1 gives the constant and one linear term."""
        assert [m.degrees for m in enumerate_monomials(0, 1)] == [(0,), (1,)]

    def test_memory_six_order_three_count(self):
        """1 + 7 + 28 + 84 = 120 monomials for the benchmark system."""
        assert len(enumerate_monomials(6, 3)) == 120
        assert monomial_count(6, 3) == 120

    @pytest.mark.parametrize("m,r", [(0, 1), (1, 2), (2, 3), (4, 2), (3, 4)])
    def test_count_matches_binomial_sum(self, m, r):
        """Closed form agrees with 1 + sum_i C(m+i, i)."""
        expected = 1 + sum(math.comb(m + i, i) for i in range(1, r + 1))
        assert len(enumerate_monomials(m, r)) == expected == monomial_count(m, r)

    def test_graded_order_and_no_duplicates(self):
        """Total degree never decreases along the list and every index appears once."""
        monomials = enumerate_monomials(3, 3)
        degrees = [m.total_degree for m in monomials]
        assert degrees == sorted(degrees)
        assert len(set(monomials)) == len(monomials)

    def test_order_is_stable_across_calls(self):
        assert enumerate_monomials(2, 3) == enumerate_monomials(2, 3)

    def test_index_equality_is_elementwise(self):
        assert MonomialIndex((1, 2)) == MonomialIndex([1, 2])
        assert MonomialIndex((1, 2)) != MonomialIndex((2, 1))

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            MonomialIndex((1, -1))

    def test_str(self):
        assert str(MonomialIndex((2, 0, 1))) == "(2,0,1)"

    @pytest.mark.parametrize(
        "degrees,i,expected", [((2, 1), 3, 3), ((3, 0), 3, 1), ((1, 1, 1), 3, 6), ((0, 0), 0, 1)]
    )
    def test_multinomial_coeff(self, degrees, i, expected):
        assert multinomial_coeff(MonomialIndex(degrees), i) == expected

    def test_multinomial_coeff_degree_mismatch(self):
        with pytest.raises(ValueError, match="total degree"):
            multinomial_coeff((2, 1), 2)

    def test_multinomial_theorem(self):
        """Sum over degree-i monomials of coeff * monomial equals (sum u)^i."""
        rng = np.random.default_rng(3)
        u = rng.normal(size=4)
        for i in range(4):
            total = sum(
                multinomial_coeff(idx, i) * idx.monomial(u)
                for idx in enumerate_monomials(3, 3)
                if idx.total_degree == i
            )
            assert total == pytest.approx(u.sum() ** i, rel=1e-12)

    def test_exponent_matrix_is_read_only(self):
        exps = exponent_matrix(1, 2)
        assert exps.shape == (6, 2)
        with pytest.raises(ValueError):
            exps[0, 0] = 5


class TestFeatureMap:
    """Feature vectors aligned with the enumeration."""

    def test_worked_example(self):
        """u=[2,3], m=1, r=2 -> [1, 2, 3, 4, 6, 9]."""
        np.testing.assert_allclose(feature_map([2.0, 3.0], 1, 2), [1, 2, 3, 4, 6, 9], rtol=0, atol=0)

    def test_zero_window(self):
        phi = feature_map(np.zeros(3), 2, 3)
        assert phi[0] == 1.0
        assert np.all(phi[1:] == 0.0)

    def test_ones_window(self):
        phi = feature_map(np.ones(4), 3, 3)
        np.testing.assert_array_equal(phi, np.ones(monomial_count(3, 3)))

    def test_length_matches_enumeration(self):
        assert feature_map(np.ones(3), 2, 3).shape[0] == len(enumerate_monomials(2, 3))

    def test_wrong_window_length(self):
        with pytest.raises(DimensionError, match="m\\+1"):
            feature_map([1.0, 2.0, 3.0], 1, 2)

    def test_matrix_rows_match_single_windows(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(5, 3))
        Phi = feature_matrix(X, 3)
        for t in range(5):
            np.testing.assert_allclose(Phi[t], feature_map(X[t], 2, 3), rtol=1e-14)

    def test_entries_are_monomials(self):
        rng = np.random.default_rng(1)
        u = rng.normal(size=3)
        phi = feature_map(u, 2, 3)
        for value, idx in zip(phi, enumerate_monomials(2, 3)):
            assert value == pytest.approx(idx.monomial(u), rel=1e-13)


class TestSeries:
    """Volterra series construction, evaluation and simulation."""

    def test_penalty_example_value(self):
        """u_k^3 + u_k^2 u_{k-1} + 0.5 at u=[1,1] is 2.5."""
        data, z = simulate_series(penalty_example_series(), [1.0, 1.0], 0.0, seed=0)
        np.testing.assert_allclose(z, [2.5])
        np.testing.assert_allclose(data.outputs, [2.5])

    def test_zero_signal_gives_h0(self):
        data, z = simulate_series(penalty_example_series(), np.zeros(10), 0.0, seed=0)
        assert z.shape == (9,)
        np.testing.assert_array_equal(z, np.full(9, 0.5))

    def test_windows_drop_first_m_samples(self):
        windows = lagged_windows(np.arange(5.0), 2)
        np.testing.assert_array_equal(windows, [[2, 1, 0], [3, 2, 1], [4, 3, 2]])

    def test_signal_shorter_than_memory(self):
        with pytest.raises(DimensionError, match="at least"):
            simulate_series(spl_series(), np.zeros(4), 0.0, seed=0)

    def test_seeded_noise_is_reproducible(self):
        u = np.random.default_rng(5).normal(size=50)
        a, _ = simulate_series(penalty_example_series(), u, 0.3, seed=11)
        b, _ = simulate_series(penalty_example_series(), u, 0.3, seed=11)
        c, _ = simulate_series(penalty_example_series(), u, 0.3, seed=12)
        np.testing.assert_array_equal(a.outputs, b.outputs)
        assert not np.array_equal(a.outputs, c.outputs)

    def test_noise_statistics(self):
        u = np.zeros(20001)
        data, z = simulate_series(penalty_example_series(), u, 2.0, seed=4)
        noise = data.outputs - z
        assert noise.mean() == pytest.approx(0.0, abs=0.05)
        assert noise.std() == pytest.approx(2.0, rel=0.03)

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError, match="noise_std"):
            simulate_series(penalty_example_series(), np.zeros(3), -1.0, seed=0)

    def test_evaluate_matches_feature_weights(self):
        """Noiseless simulation equals phi(u_k)^T w for random weights."""
        rng = np.random.default_rng(8)
        monomials = enumerate_monomials(2, 3)
        weights = rng.normal(size=len(monomials))
        series = VolterraSeries(3, 2, weights[0], dict(zip(monomials[1:], weights[1:])))
        u = rng.normal(size=40)
        _, z = simulate_series(series, u, 0.0, seed=0)
        expected = feature_matrix(lagged_windows(u, 2), 3) @ weights
        np.testing.assert_allclose(z, expected, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(series.weights(), weights)

    def test_invalid_keys(self):
        with pytest.raises(DimensionError):
            VolterraSeries(3, 1, 0.0, {(1, 0, 0): 1.0})
        with pytest.raises(ValueError, match="total degree"):
            VolterraSeries(2, 1, 0.0, {(3, 0): 1.0})
        with pytest.raises(ValueError, match="total degree"):
            VolterraSeries(2, 1, 0.0, {(0, 0): 1.0})

    def test_document_round_trip(self):
        series = spl_series()
        again = VolterraSeries.from_dict(series.to_dict())
        np.testing.assert_array_equal(again.weights(), series.weights())

    def test_document_errors(self):
        with pytest.raises(DataError, match="Volterra series"):
            VolterraSeries.from_dict({"m": 1})

    def test_make_rng_rejects_negative_seed(self):
        with pytest.raises(ValueError, match="seed"):
            make_rng(-1)


class TestBenchmarkSystems:
    """The memory-6 benchmark system."""

    def test_zero_window(self):
        assert spl_output(np.zeros(7)) == 0.0

    def test_ones_window(self):
        """Sum of all coefficients: 4.85."""
        assert spl_output(np.ones(7)) == pytest.approx(4.85, abs=1e-12)

    def test_only_lag_three(self):
        """Only 0.9 u_{k-3} and -0.25 u_{k-3}^2 fire."""
        window = np.zeros(7)
        window[3] = 1.0
        assert spl_output(window) == pytest.approx(0.65, abs=1e-12)

    def test_wrong_window_length(self):
        with pytest.raises(DimensionError, match="7"):
            spl_output(np.ones(6))

    def test_series_matches_closed_form(self):
        rng = np.random.default_rng(2)
        windows = rng.normal(0.0, 2.0, size=(200, 7))
        np.testing.assert_allclose(spl_series().evaluate(windows), spl_outputs(windows), rtol=1e-11, atol=1e-11)

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(9)
        windows = rng.normal(size=(10, 7))
        expected = [spl_output(w) for w in windows]
        np.testing.assert_allclose(spl_outputs(windows), expected, rtol=1e-14)


class TestDataset:
    """Datasets and normalization."""

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError, match="outputs"):
            Dataset(np.zeros((3, 2)), np.zeros(4))

    def test_one_dimensional_inputs_become_columns(self):
        data = Dataset(np.arange(4.0), np.arange(4.0))
        assert data.inputs.shape == (4, 1)
        assert data.size == 4 and data.input_dim == 1

    def test_normalization_z_scores_columns(self):
        rng = np.random.default_rng(0)
        data = Dataset(rng.normal(3.0, 5.0, size=(100, 3)), rng.normal(size=100)).with_normalization()
        X = data.scaled_inputs()
        np.testing.assert_allclose(X.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(X.std(axis=0), 1.0, rtol=1e-12)

    def test_constant_column_gets_unit_std(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        norm = Normalization.fit(X)
        assert norm.std[0] == 1.0
        assert np.all(norm.std > 0)

    def test_nonpositive_std_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            Normalization([0.0], [0.0])

    def test_subset_keeps_normalization(self):
        data = Dataset(np.arange(10.0).reshape(5, 2), np.arange(5.0)).with_normalization()
        sub = data.subset([4, 0])
        assert sub.normalization is data.normalization
        np.testing.assert_array_equal(sub.outputs, [4.0, 0.0])

    def test_normalization_document(self):
        norm = Normalization([1.0, 2.0], [3.0, 4.0])
        again = Normalization.from_dict(norm.to_dict())
        np.testing.assert_array_equal(again.mean, norm.mean)
        np.testing.assert_array_equal(again.std, norm.std)

    def test_output_standardization(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.normal(size=(50, 2)), rng.normal(300.0, 1e3, size=50)).with_normalization(outputs=True)
        y = data.scaled_outputs()
        assert data.normalization.scales_outputs
        assert y.mean() == pytest.approx(0.0, abs=1e-12)
        assert y.std() == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(data.normalization.invert_outputs(y), data.outputs, rtol=1e-12)
        again = Normalization.from_dict(data.normalization.to_dict())
        assert (again.output_mean, again.output_std) == (data.normalization.output_mean, data.normalization.output_std)

    def test_inputs_only_normalization_keeps_outputs(self):
        data = Dataset(np.arange(10.0).reshape(5, 2), np.arange(5.0) * 7.0).with_normalization()
        assert not data.normalization.scales_outputs
        np.testing.assert_array_equal(data.scaled_outputs(), data.outputs)
        # documents written before output statistics existed
        norm = Normalization.from_dict({"mean": [0.0, 1.0], "std": [1.0, 2.0]})
        assert (norm.output_mean, norm.output_std) == (0.0, 1.0)

    def test_constant_outputs_get_unit_std(self):
        norm = Normalization.fit(np.arange(6.0).reshape(3, 2), np.full(3, 2.5))
        assert norm.output_std == 1.0 and norm.output_mean == 2.5


class TestMetrics:
    """Fit% and RMSE."""

    def test_perfect_fit(self):
        z = np.array([1.0, 3.0, 2.0])
        assert fit_percent(z, z) == 100.0

    def test_mean_predictor(self):
        z = np.array([1.0, 3.0, 2.0, 6.0])
        assert fit_percent(z, np.full(4, z.mean())) == pytest.approx(0.0, abs=1e-12)

    def test_worked_example(self):
        assert fit_percent([0.0, 2.0], [1.0, 1.0]) == pytest.approx(0.0, abs=1e-12)

    def test_can_be_negative(self):
        assert fit_percent([0.0, 2.0], [2.0, 0.0]) < 0

    def test_constant_reference(self):
        with pytest.raises(NumericalError, match="constant"):
            fit_percent([1.0, 1.0], [1.0, 2.0])

    def test_shift_invariance(self):
        rng = np.random.default_rng(6)
        z, zhat = rng.normal(size=20), rng.normal(size=20)
        assert fit_percent(z + 7.5, zhat + 7.5) == pytest.approx(fit_percent(z, zhat), rel=1e-12)

    def test_length_checks(self):
        with pytest.raises(DimensionError):
            fit_percent([1.0, 2.0], [1.0])
        with pytest.raises(DimensionError):
            fit_percent([1.0], [1.0])
        with pytest.raises(DimensionError):
            rmse([], [])

    @pytest.mark.parametrize("z,zhat,expected", [([1.0, 2.0], [1.0, 2.0], 0.0), ([0.0, 0.0], [1.0, 1.0], 1.0), ([0.0, 2.0], [1.0, 1.0], 1.0)])
    def test_rmse(self, z, zhat, expected):
        assert rmse(z, zhat) == pytest.approx(expected)
