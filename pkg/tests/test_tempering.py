import numpy as np
import pytest

from binsel import (Dataset, KernelSpec, LadderSpec, ModelState, PriorSpec,
                    RunConfig, run_chain, run_parallel_tempering,
                    swap_log_acceptance)
from binsel.errors import ConfigError
from binsel.model import GammaConditional
from binsel.rng import chain_streams, swap_stream
from binsel.samplers import kernel_full_gibbs
from oracles import FrozenCtx, enumeration_target, gamma_code, random_instance, tv_distance


def _state(gamma, beta, z, lam, t=1.0):
    return ModelState(np.asarray(gamma, bool), np.asarray(beta, float),
                      np.asarray(z, float), np.asarray(lam, float), t)


class TestSwapLogAcceptance:
    def _dataset(self):
        return Dataset(np.array([[1.0], [2.0]]), [1, 0])

    def test_equal_temperatures_always_accept(self):
        ds = self._dataset()
        a = _state([1], [0.5], [0.4, -0.2], [1.0, 2.0])
        b = _state([1], [-0.3], [1.2, -0.5], [0.5, 1.5])
        assert swap_log_acceptance(a, b, 2.0, 2.0, ds) == 0.0

    def test_identical_states_always_accept(self):
        ds = self._dataset()
        a = _state([1], [0.5], [0.4, -0.2], [1.0, 2.0], 1.0)
        b = _state([1], [0.5], [0.4, -0.2], [1.0, 2.0], 2.0)
        assert swap_log_acceptance(a, b, 1.0, 2.0, ds) == 0.0

    def test_scalar_hand_value(self):
        # residual quadratic forms 4 and 1 at temperatures 1 and 2:
        # (1 - 1/2) * (4 - 1) / 2 = 0.75 -> always accept
        ds = Dataset(np.array([[0.0], [0.0]]), [1, 0])
        a = _state([0], [], [2.0, 0.0], [1.0, 1.0], 1.0)
        b = _state([0], [], [1.0, 0.0], [1.0, 1.0], 2.0)
        assert swap_log_acceptance(a, b, 1.0, 2.0, ds) == 0.0
        # reversed order gives the strictly negative branch
        assert swap_log_acceptance(b, a, 1.0, 2.0, ds) == pytest.approx(-0.75)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.standard_normal((4, 2)), [1, 0, 1, 0])
        a = _state([1, 0], [0.7], rng.standard_normal(4),
                   rng.uniform(0.5, 2, 4), 1.0)
        b = _state([0, 1], [-0.2], rng.standard_normal(4),
                   rng.uniform(0.5, 2, 4), 1.2)
        assert (swap_log_acceptance(a, b, 1.0, 1.2, ds)
                == swap_log_acceptance(b, a, 1.2, 1.0, ds))


class TestRunParallelTempering:
    def _toy(self, seed=0, p=6, n=25):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, p))
        y = rng.integers(0, 2, n)
        return Dataset(x, y), PriorSpec.constant(p, 0.2, 2.0)

    def test_single_chain_reproduces_run_chain(self):
        dataset, prior = self._toy()
        cfg = RunConfig(120, 30, seed=21)
        plain = run_chain(dataset, prior, KernelSpec("add_delete"), cfg,
                          log_every=0)
        ladder = LadderSpec(tau=1.2, n_chains=1, pt_burn_in=0)
        cold = run_parallel_tempering(dataset, prior, KernelSpec("add_delete"),
                                      ladder, cfg, log_every=0)
        assert cold.gamma_trace == plain.gamma_trace
        np.testing.assert_array_equal(cold.deviance_trace, plain.deviance_trace)

    def test_near_unit_ladder_accepts_everything(self):
        dataset, prior = self._toy(seed=3)
        ladder = LadderSpec(tau=1.0 + 1e-9, n_chains=3, swap_interval=1,
                            pt_burn_in=10)
        cfg = RunConfig(400, 50, seed=5)
        traces = run_parallel_tempering(dataset, prior,
                                        KernelSpec("add_delete"), ladder, cfg,
                                        log_every=0)
        attempts = sum(a for _, a, _ in traces.swap_stats)
        accepts = sum(acc for _, _, acc in traces.swap_stats)
        assert attempts == 390
        assert accepts / attempts > 0.999

    def test_swap_statistics_recorded_per_pair(self):
        dataset, prior = self._toy(seed=4)
        ladder = LadderSpec(tau=1.3, n_chains=4, swap_interval=2, pt_burn_in=0)
        cfg = RunConfig(100, 10, seed=6)
        traces = run_parallel_tempering(dataset, prior,
                                        KernelSpec("add_delete"), ladder, cfg,
                                        log_every=0)
        pairs = [pair for pair, _, _ in traces.swap_stats]
        assert pairs == [0, 1, 2]
        assert sum(a for _, a, _ in traces.swap_stats) == 50

    def test_ladder_validation(self):
        with pytest.raises(ConfigError):
            LadderSpec(tau=1.0, n_chains=3)
        with pytest.raises(ConfigError):
            LadderSpec(tau=1.2, n_chains=0)
        with pytest.raises(ConfigError):
            LadderSpec(tau=1.2, n_chains=2, swap_interval=0)

    def test_temperature_multiset_invariant(self):
        ladder = LadderSpec(tau=1.2, n_chains=5)
        np.testing.assert_allclose(ladder.temperatures(),
                                   [1.0, 1.2, 1.44, 1.728, 2.0736])


class TestColdChainInvariance:
    def test_k2_fixed_latent_toy_target(self):
        # Both chains share one frozen (z, lambda); kernels update only
        # (gamma, beta) at their own temperature and full states swap.
        # The cold chain's gamma law must still match exact enumeration.
        rng = np.random.default_rng(30)
        dataset, prior, z, lam = random_instance(rng, p=3, n=4)
        p = dataset.p
        tau = 1.5
        cold_ctx = FrozenCtx(GammaConditional(dataset, prior, z, lam, 1.0), p)
        hot_ctx = FrozenCtx(GammaConditional(dataset, prior, z, lam, tau), p)
        target = enumeration_target(cold_ctx, prior, p)

        states = [ModelState(np.zeros(p, bool), np.zeros(0), z.copy(),
                             lam.copy(), t) for t in (1.0, tau)]
        streams = [chain_streams(31, c) for c in range(2)]
        swaps = swap_stream(31)
        counts = np.zeros(2 ** p)
        n_iter = 40_000
        for _ in range(n_iter):
            kernel_full_gibbs(states[0], dataset, prior, streams[0][0],
                              streams[0][1], 1.0, cold_ctx)
            kernel_full_gibbs(states[1], dataset, prior, streams[1][0],
                              streams[1][1], tau, hot_ctx)
            log_alpha = swap_log_acceptance(states[0], states[1], 1.0, tau,
                                            dataset)
            if np.log(max(swaps.random(), 1e-300)) < log_alpha:
                states = [states[1], states[0]]
                states[0].temperature = 1.0
                states[1].temperature = tau
            counts[gamma_code(states[0])] += 1
        assert tv_distance(counts / n_iter, target) < 0.015
