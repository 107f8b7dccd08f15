import numpy as np
import pytest

from binsel import (ConfigError, simulate_scenario1, simulate_scenario2,
                    surrogate_expression_matrix)
from binsel.simulate import SimTruth, load_truth, save_truth


class TestScenario1:
    def test_paper_dimensions(self):
        dataset, truth = simulate_scenario1(100, 500, 100, seed=7)
        assert dataset.x.shape == (100, 500)
        assert dataset.y.shape == (100,)
        assert truth.true_indices == (0, 1, 2, 3, 4)
        assert np.all(truth.beta_true[:5] == 2.0)
        assert np.all(truth.beta_true[5:] == 0.0)

    def test_not_standardized(self):
        dataset, _ = simulate_scenario1(200, 50, 10, seed=1)
        # columns are x* + w with variance 2; deliberately raw
        assert abs(dataset.x.var(axis=0, ddof=1).mean() - 2.0) < 0.3

    def test_block_correlation_structure(self):
        n = 10_000
        dataset, _ = simulate_scenario1(n, 30, 10, seed=2)
        x = dataset.x
        corr = np.corrcoef(x, rowvar=False)
        # same block, different position
        assert abs(corr[0, 1] - 0.5) < 0.05
        # different block, same latent position
        assert abs(corr[0, 10] - 0.5) < 0.05
        # different block, different position
        assert abs(corr[0, 11]) < 0.05

    def test_block_size_must_divide(self):
        with pytest.raises(ConfigError):
            simulate_scenario1(50, 55, 10)

    def test_determinism(self):
        a, _ = simulate_scenario1(20, 10, 5, seed=3)
        b, _ = simulate_scenario1(20, 10, 5, seed=3)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)

    def test_response_follows_logistic_law(self):
        rng = np.random.default_rng(4)
        dataset, truth = simulate_scenario1(5000, 10, 5, rng)
        eta = dataset.x @ truth.beta_true
        prob = 1.0 / (1.0 + np.exp(-eta))
        bins = np.digitize(prob, [0.25, 0.5, 0.75])
        for b in range(4):
            mask = bins == b
            if mask.sum() < 50:
                continue
            se = np.sqrt(prob[mask].mean() * (1 - prob[mask].mean()) / mask.sum())
            assert abs(dataset.y[mask].mean() - prob[mask].mean()) < 5 * se + 0.02


class TestScenario2:
    def test_standardized_output(self):
        rng = np.random.default_rng(5)
        matrix = rng.standard_normal((104, 800))
        dataset, truth = simulate_scenario2(matrix, 50, rng)
        assert dataset.x.shape == (104, 50)
        assert np.abs(dataset.x.mean(axis=0)).max() < 1e-9
        assert np.abs(dataset.x.std(axis=0, ddof=1) - 1.0).max() < 1e-9
        assert truth.true_indices == (0, 1, 2, 3, 4)

    def test_needs_enough_columns(self):
        rng = np.random.default_rng(6)
        with pytest.raises(ConfigError):
            simulate_scenario2(rng.standard_normal((10, 20)), 50, rng)

    def test_iid_surrogate_correlations_stay_small(self):
        rng = np.random.default_rng(7)
        matrix = rng.standard_normal((104, 600))
        dataset, _ = simulate_scenario2(matrix, 50, rng)
        corr = np.corrcoef(dataset.x, rowvar=False)
        off = np.abs(corr[~np.eye(50, dtype=bool)])
        assert off.max() < 0.5


class TestSurrogate:
    def test_shape_and_block_structure(self):
        matrix = surrogate_expression_matrix(104, 400, seed=8, n_blocks=20)
        assert matrix.shape == (104, 400)
        corr = np.corrcoef(matrix, rowvar=False)
        within = [abs(corr[i, i + 1]) for i in range(0, 380, 20)]
        assert np.median(within) > 0.25   # co-expression blocks exist

    def test_determinism(self):
        a = surrogate_expression_matrix(50, 100, seed=9)
        b = surrogate_expression_matrix(50, 100, seed=9)
        np.testing.assert_array_equal(a, b)


class TestTruthIO:
    def test_round_trip(self, tmp_path):
        truth = SimTruth.first_five(20, "blocks")
        path = tmp_path / "truth.csv"
        save_truth(truth, path)
        back = load_truth(path)
        assert back.true_indices == truth.true_indices
        np.testing.assert_array_equal(back.beta_true, truth.beta_true)
