"""Parallel tempering: geometric ladder, un-coupled burn-in, adjacent swaps.

K chains run the same kernel against targets flattened by temperatures
{1, tau, tau^2, ...}; after an un-coupled burn-in, one uniformly chosen
adjacent pair is proposed for a full state exchange every swap_interval
iterations.  The swap acceptance is

    log alpha = (1/T_a - 1/T_b) * (r_a' lam_a^{-1} r_a - r_b' lam_b^{-1} r_b) / 2

with r = z - x_g beta_g.  States move between temperature slots; the slot
temperatures never change, so slot 0 is always the cold (target) trace.
Swap decisions draw from a dedicated stream, keeping every chain's own
streams reproducible regardless of the swap schedule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import Dataset, ModelState, PriorSpec, deviance_from_margin
from .rng import chain_streams, swap_stream
from .samplers import (KernelSpec, RunConfig, TraceSet, advance_iteration,
                       init_state_from_prior)


@dataclass
class LadderSpec:
    """Geometric temperature ladder and swap schedule.

    K = 1 is allowed as the degenerate no-tempering ladder; it reproduces
    a plain chain exactly.
    """

    tau: float = 1.2
    n_chains: int = 5
    swap_interval: int = 1
    pt_burn_in: int = 0

    def __post_init__(self):
        if self.n_chains < 1:
            raise ConfigError("need at least one chain")
        if self.n_chains > 1 and not self.tau > 1.0:
            raise ConfigError("tau must exceed 1 for a real ladder")
        if self.swap_interval < 1:
            raise ConfigError("swap_interval must be a positive integer")
        if self.pt_burn_in < 0:
            raise ConfigError("pt_burn_in must be nonnegative")

    def temperatures(self) -> np.ndarray:
        return self.tau ** np.arange(self.n_chains)


def swap_log_acceptance(state_a: ModelState, state_b: ModelState,
                        t_a: float, t_b: float, dataset: Dataset) -> float:
    """log of the swap acceptance probability, capped at 0.

    Symmetric in its arguments: both the temperature factor and the
    residual bracket change sign together.
    """
    r_a = state_a.z - state_a.margin(dataset)
    r_b = state_b.z - state_b.margin(dataset)
    quad_a = float(r_a @ (r_a / state_a.lambda_diag))
    quad_b = float(r_b @ (r_b / state_b.lambda_diag))
    log_alpha = (1.0 / t_a - 1.0 / t_b) * 0.5 * (quad_a - quad_b)
    return min(0.0, log_alpha)


def run_parallel_tempering(dataset: Dataset, prior: PriorSpec,
                           kernel: KernelSpec, ladder: LadderSpec,
                           config: RunConfig,
                           log_every: int = 10_000, echo=print) -> TraceSet:
    """Advance K tempered chains with swaps; return the cold-chain trace.

    No swaps are attempted during the first `pt_burn_in` iterations.
    Recording, burn-in discard, and CPU accounting follow the cold chain
    and match `run_chain`; with K = 1 the output is identical to it.
    """
    if prior.pi.size == 1 and dataset.p > 1:
        prior = PriorSpec(np.full(dataset.p, float(prior.pi[0])), prior.c2,
                          prior.link, prior.prior_form)
    temps = ladder.temperatures()
    k_chains = ladder.n_chains
    streams = [chain_streams(config.seed, c) for c in range(k_chains)]
    swaps = swap_stream(config.seed) if k_chains > 1 else None
    states = [init_state_from_prior(dataset, prior, streams[c][0], temps[c])
              for c in range(k_chains)]

    attempts = np.zeros(max(k_chains - 1, 0), dtype=int)
    accepts = np.zeros(max(k_chains - 1, 0), dtype=int)
    gamma_trace: list[tuple[int, ...]] = []
    dev_trace: list[float] = []
    size_trace: list[int] = []
    its: list[int] = []
    cpu = 0.0
    for it in range(1, config.n_iterations + 1):
        tick = time.process_time()
        for c in range(k_chains):
            advance_iteration(states[c], dataset, prior, kernel,
                              streams[c][0], streams[c][1], temps[c])
        if (k_chains > 1 and it > ladder.pt_burn_in
                and it % ladder.swap_interval == 0):
            j = int(swaps.integers(k_chains - 1))
            attempts[j] += 1
            log_alpha = swap_log_acceptance(states[j], states[j + 1],
                                            temps[j], temps[j + 1], dataset)
            if np.log(max(swaps.random(), 1e-300)) < log_alpha:
                accepts[j] += 1
                states[j], states[j + 1] = states[j + 1], states[j]
                states[j].temperature = temps[j]
                states[j + 1].temperature = temps[j + 1]
        if it > config.burn_in:
            cpu += time.process_time() - tick
            if (it - config.burn_in - 1) % config.record_every == 0:
                cold = states[0]
                gamma_trace.append(tuple(int(i) for i in cold.included))
                dev_trace.append(deviance_from_margin(dataset, cold.margin(dataset)))
                size_trace.append(cold.model_size)
                its.append(it)
        if log_every and it % log_every == 0:
            echo(f"[pt:{kernel.label()}] iteration {it}/{config.n_iterations}")

    swap_stats = [(j, int(attempts[j]), int(accepts[j]))
                  for j in range(max(k_chains - 1, 0))]
    return TraceSet(dataset.p, gamma_trace, np.array(dev_trace),
                    np.array(size_trace, dtype=int), np.array(its, dtype=int),
                    cpu, f"pt:{kernel.label()}", config.n_iterations,
                    config.burn_in, config.seed, swap_stats)
