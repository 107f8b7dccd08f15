import numpy as np
import pytest

from binsel import (ConfigError, analyze_traces, efficiency_ratio, ess_ar,
                    ess_star, fp_fn_counts, inclusion_probabilities)
from binsel.samplers import TraceSet


def binary_markov_chain(m, lag1_corr, seed):
    """Symmetric two-state chain with autocorrelation lag1_corr^k at lag k."""
    rng = np.random.default_rng(seed)
    flip = 0.5 * (1.0 - lag1_corr)
    x = np.empty(m, dtype=np.uint8)
    x[0] = rng.integers(0, 2)
    flips = rng.random(m) < flip
    for t in range(1, m):
        x[t] = x[t - 1] ^ flips[t]
    return x


def make_traces(gamma_rows, cpu=60.0):
    gamma_trace = [tuple(np.flatnonzero(row).tolist()) for row in gamma_rows]
    sizes = np.array([len(g) for g in gamma_trace])
    return TraceSet(gamma_rows.shape[1], gamma_trace, np.zeros(len(gamma_trace)),
                    sizes, np.arange(1, len(gamma_trace) + 1), cpu)


class TestEssAr:
    def test_constant_traces_are_zero(self):
        assert ess_ar(np.zeros(500)) == 0.0
        assert ess_ar(np.ones(500)) == 0.0

    def test_single_inclusion_is_m(self):
        m = 5000
        trace = np.zeros(m)
        trace[2718] = 1.0
        assert ess_ar(trace) == m

    def test_iid_trace_is_near_m(self):
        rng = np.random.default_rng(0)
        m = 20_000
        trace = (rng.random(m) < 0.3).astype(float)
        assert ess_ar(trace) > 0.85 * m

    def test_ar1_binary_chain_oracle(self):
        m = 100_000
        trace = binary_markov_chain(m, 0.5, seed=1)
        want = m * (1.0 - 0.5) / (1.0 + 0.5)
        assert abs(ess_ar(trace) - want) / want < 0.2

    def test_strong_autocorrelation(self):
        m = 100_000
        trace = binary_markov_chain(m, 0.9, seed=2)
        want = m * (1.0 - 0.9) / (1.0 + 0.9)
        assert abs(ess_ar(trace) - want) / want < 0.25

    def test_relabel_invariance(self):
        trace = binary_markov_chain(5000, 0.4, seed=3)
        assert ess_ar(trace) == pytest.approx(ess_ar(1 - trace), rel=1e-9)

    def test_capped_at_m(self):
        rng = np.random.default_rng(4)
        trace = (rng.random(2000) < 0.5).astype(float)
        assert ess_ar(trace) <= 2000

    def test_requires_two_points(self):
        with pytest.raises(ConfigError):
            ess_ar(np.array([1.0]))


class TestEssStar:
    def test_all_visited_is_plain_median(self):
        ess = np.array([5.0, 1.0, 3.0])
        assert ess_star(ess, np.ones(3, bool)) == 3.0

    def test_weighted_example(self):
        ess = np.array([10.0, 20.0, 0.0, 0.0])
        visited = np.array([True, True, False, False])
        assert ess_star(ess, visited) == pytest.approx(7.5)

    def test_empty_visited(self):
        assert ess_star(np.zeros(4), np.zeros(4, bool)) == 0.0

    def test_never_exceeds_max(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            ess = rng.uniform(0, 100, 8)
            visited = rng.random(8) < 0.7
            assert ess_star(ess, visited) <= ess.max() + 1e-12


class TestEfficiencyRatio:
    def test_homogeneity(self):
        assert efficiency_ratio(3024.0, 168.0) == pytest.approx(18.0)
        assert efficiency_ratio(3024.0, 336.0) == pytest.approx(9.0)

    def test_zero_ess(self):
        assert efficiency_ratio(0.0, 5.0) == 0.0

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ConfigError):
            efficiency_ratio(10.0, 0.0)


class TestInclusionProbabilities:
    def test_counting(self):
        rows = np.zeros((100, 3), dtype=int)
        rows[:37, 0] = 1
        rows[:, 2] = 1
        traces = make_traces(rows)
        p_hat = inclusion_probabilities(traces)
        np.testing.assert_allclose(p_hat, [0.37, 0.0, 1.0])

    def test_sum_equals_mean_model_size(self):
        rng = np.random.default_rng(6)
        rows = (rng.random((200, 7)) < 0.3).astype(int)
        traces = make_traces(rows)
        p_hat = inclusion_probabilities(traces)
        assert p_hat.sum() == pytest.approx(traces.model_size_trace.mean())


class TestFpFn:
    def test_exact_recovery(self):
        p_hat = np.array([1.0, 1.0, 0.0, 0.0])
        assert fp_fn_counts(p_hat, {0, 1}, 0.05) == (0, 0)

    def test_boundary_is_strict(self):
        p_hat = np.array([0.05, 0.2])
        fp, fn = fp_fn_counts(p_hat, {0}, 0.05)
        assert fn == 1 and fp == 1

    def test_bookkeeping_bounds(self):
        rng = np.random.default_rng(7)
        p_hat = rng.random(20)
        truth = set(range(5))
        fp, fn = fp_fn_counts(p_hat, truth, 0.3)
        assert fn <= 5 and fp <= 15


class TestAnalyzeTraces:
    def test_report_shapes(self):
        rng = np.random.default_rng(8)
        rows = (rng.random((400, 5)) < 0.4).astype(int)
        rows[:, 4] = 0
        traces = make_traces(rows, cpu=120.0)
        report, ess, p_hat = analyze_traces(traces)
        assert ess.shape == (5,) and p_hat.shape == (5,)
        assert ess[4] == 0.0
        assert report.visited_count == 4
        assert report.efficiency_ratio == pytest.approx(report.ess_star / 2.0)
