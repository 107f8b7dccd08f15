"""Indicator-update kernels and the outer blocked Gibbs loop.

Each outer iteration draws the latent block (z then lambda) given the
coefficients, then updates the indicator vector with one of five kernels:

    add_delete          Metropolis-Hastings flip of one random site
    full_gibbs          Gibbs sweep over all p sites
    neighbourhood_gibbs Gibbs sweep over a random site and its graph neighbours
    restricted_gibbs    as neighbourhood, but at most d random members
    joint_gibbs         exact joint draw over at most d members (2^d states)

Site-selection randomness comes from a dedicated stream so that kernels
which visit the same sites in the same order consume the draw stream
identically -- the complete-graph neighbourhood sweep reproduces the full
Gibbs sweep draw for draw.

Coefficients are redrawn from their conditional Gaussian after every sweep
(and only on acceptance for add/delete, where the proposal ratio cancels
them).  Both single-site marginals are evaluated fresh at every step; a
rank-one up/downdating scheme is a possible optimization, not a semantic
requirement.
"""

from __future__ import annotations

import csv
import math
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augmentation import sample_beta, sample_lambda, sample_z
from .dependence import NeighbourhoodGraph
from .errors import ConfigError
from .model import (Dataset, GammaConditional, ModelState, PriorSpec,
                    deviance_from_margin)
from .rng import chain_streams

KERNEL_KINDS = ("add_delete", "full_gibbs", "neighbourhood_gibbs",
                "restricted_gibbs", "joint_gibbs")

# 2^d marginal evaluations per joint update; beyond this the move is absurd.
MAX_JOINT_SIZE = 20


@dataclass
class KernelSpec:
    """Which gamma kernel to run, with its graph and subset size."""

    kind: str
    graph: NeighbourhoodGraph | None = None
    d: int | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"kernel kind must be one of {KERNEL_KINDS}")
        if self.kind in ("neighbourhood_gibbs", "restricted_gibbs", "joint_gibbs"):
            if self.graph is None:
                raise ConfigError(f"kernel {self.kind} requires a graph")
        if self.kind in ("restricted_gibbs", "joint_gibbs"):
            if self.d is None or self.d < 1:
                raise ConfigError(f"kernel {self.kind} requires d >= 1")
        if self.kind == "joint_gibbs" and self.d > MAX_JOINT_SIZE:
            raise ConfigError(
                f"joint_gibbs enumerates 2^d states; d={self.d} exceeds {MAX_JOINT_SIZE}")

    def label(self) -> str:
        if self.kind in ("restricted_gibbs", "joint_gibbs"):
            return f"{self.kind}({self.d})"
        return self.kind


@dataclass
class RunConfig:
    """Iteration counts and reproducibility knobs for one chain."""

    n_iterations: int
    burn_in: int
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iterations:
            raise ConfigError("need 0 <= burn_in < n_iterations")
        if self.record_every < 1:
            raise ConfigError("record_every must be a positive integer")


@dataclass
class TraceSet:
    """Post-burn-in record of one chain: indicators, deviance, size, timing."""

    p: int
    gamma_trace: list[tuple[int, ...]]
    deviance_trace: np.ndarray
    model_size_trace: np.ndarray
    iterations: np.ndarray
    cpu_seconds: float
    kernel_label: str = ""
    n_iterations: int = 0
    burn_in: int = 0
    seed: int = 0
    swap_stats: list[tuple[int, int, int]] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.gamma_trace)

    def inclusion_matrix(self) -> np.ndarray:
        """Dense M x p uint8 indicator matrix."""
        out = np.zeros((self.M, self.p), dtype=np.uint8)
        for m, idx in enumerate(self.gamma_trace):
            if idx:
                out[m, list(idx)] = 1
        return out


def init_state_from_prior(dataset: Dataset, prior: PriorSpec,
                          rng: np.random.Generator,
                          temperature: float = 1.0) -> ModelState:
    """Start a chain from prior draws of (gamma, beta); z sign-matched to y."""
    p = dataset.p
    gamma = rng.random(p) < prior.pi
    idx = np.flatnonzero(gamma)
    if prior.prior_form == "independence" or idx.size == 0:
        beta = math.sqrt(prior.c2) * rng.standard_normal(idx.size)
    else:
        xs = dataset.x[:, idx]
        chol = np.linalg.cholesky(xs.T @ xs + 1e-12 * np.eye(idx.size))
        beta = math.sqrt(prior.c2) * np.linalg.solve(chol.T,
                                                     rng.standard_normal(idx.size))
    state = ModelState(gamma, beta, np.zeros(dataset.n), np.ones(dataset.n),
                       temperature)
    state.z = sample_z(state, dataset, prior, rng, temperature)
    return state


# ---------------------------------------------------------------------------
# Gamma kernels.  Every kernel mutates `state` in place and returns it.
# `ctx` injects a marginal-likelihood evaluator for a fixed (z, lambda, T);
# callers that have not precomputed one get a fresh exact evaluator.
# ---------------------------------------------------------------------------

def _context(state, dataset, prior, temperature, ctx) -> GammaConditional:
    if ctx is not None:
        return ctx
    return GammaConditional(dataset, prior, state.z, state.lambda_diag, temperature)


# The active set travels through the kernels as a sorted tuple of ints:
# splicing one site in or out is then a couple of slice copies, and the
# tuple doubles as a memoization key for evaluators over fixed (z, lambda).

def _included_tuple(state: ModelState) -> tuple[int, ...]:
    return tuple(state.included.tolist())


def _with_site(idx: tuple[int, ...], i: int) -> tuple[int, ...]:
    pos = bisect_left(idx, i)
    if pos < len(idx) and idx[pos] == i:
        return idx
    return idx[:pos] + (i,) + idx[pos:]


def _without_site(idx: tuple[int, ...], i: int) -> tuple[int, ...]:
    pos = bisect_left(idx, i)
    if pos >= len(idx) or idx[pos] != i:
        return idx
    return idx[:pos] + idx[pos + 1:]


def _redraw_beta(state: ModelState, ctx: GammaConditional,
                 rng: np.random.Generator,
                 idx: tuple[int, ...] | None = None) -> None:
    if idx is None:
        idx = _included_tuple(state)
    state.beta_gamma = sample_beta(ctx.posterior(idx), rng)


def kernel_add_delete(state: ModelState, dataset: Dataset, prior: PriorSpec,
                      rng: np.random.Generator,
                      select_rng: np.random.Generator | None = None,
                      temperature: float = 1.0,
                      ctx: GammaConditional | None = None) -> ModelState:
    """Propose flipping one uniformly chosen indicator; MH accept/reject.

    The acceptance ratio is the marginal-likelihood ratio times the prior
    odds factor (1 - pi_k)/pi_k for a delete and pi_k/(1 - pi_k) for an
    add; beta is redrawn from its conditional only when the move accepts.
    """
    select_rng = select_rng if select_rng is not None else rng
    ctx = _context(state, dataset, prior, temperature, ctx)
    k = int(select_rng.integers(dataset.p))
    idx = _included_tuple(state)
    deleting = bool(state.gamma[k])
    new_idx = _without_site(idx, k) if deleting else _with_site(idx, k)
    log_prior = prior.log_prior_odds(k)
    log_alpha = ctx.log_marginal(new_idx) - ctx.log_marginal(idx)
    log_alpha += -log_prior if deleting else log_prior
    u = rng.random()
    if log_alpha >= 0.0 or math.log(max(u, 1e-300)) < log_alpha:
        state.gamma[k] = not deleting
        _redraw_beta(state, ctx, rng, new_idx)
    return state


def _gibbs_site_sweep(state: ModelState, prior: PriorSpec, sites,
                      ctx: GammaConditional,
                      rng: np.random.Generator) -> tuple[int, ...]:
    """Univariate Gibbs updates of the given sites, ascending order.

    Pinned sites (prior probability exactly 0 or 1) are set without
    consuming a uniform, so they never advance the draw stream.  Returns
    the active set after the sweep.
    """
    idx = _included_tuple(state)
    gamma = state.gamma
    prior_lo = prior.log_odds
    random = rng.random
    log_marginal = ctx.log_marginal
    for i in sorted(sites):
        with_i = _with_site(idx, i)
        without_i = _without_site(idx, i)
        log_odds = (log_marginal(with_i) - log_marginal(without_i)
                    + prior_lo[i])
        if log_odds == math.inf:
            include = True
        elif log_odds == -math.inf:
            include = False
        else:
            include = random() < 1.0 / (1.0 + math.exp(-log_odds))
        gamma[i] = include
        idx = with_i if include else without_i
    return idx


def kernel_full_gibbs(state: ModelState, dataset: Dataset, prior: PriorSpec,
                      rng: np.random.Generator,
                      select_rng: np.random.Generator | None = None,
                      temperature: float = 1.0,
                      ctx: GammaConditional | None = None) -> ModelState:
    """Gibbs-resample every indicator from its full conditional, then beta."""
    ctx = _context(state, dataset, prior, temperature, ctx)
    idx = _gibbs_site_sweep(state, prior, range(dataset.p), ctx, rng)
    _redraw_beta(state, ctx, rng, idx)
    return state


def kernel_neighbourhood_gibbs(state: ModelState, dataset: Dataset,
                               prior: PriorSpec, graph: NeighbourhoodGraph,
                               rng: np.random.Generator,
                               select_rng: np.random.Generator | None = None,
                               temperature: float = 1.0,
                               ctx: GammaConditional | None = None) -> ModelState:
    """Gibbs-update a random site k together with its direct neighbours."""
    select_rng = select_rng if select_rng is not None else rng
    ctx = _context(state, dataset, prior, temperature, ctx)
    k = int(select_rng.integers(dataset.p))
    sites = graph.nb(k).tolist()
    sites.append(k)
    idx = _gibbs_site_sweep(state, prior, sites, ctx, rng)
    _redraw_beta(state, ctx, rng, idx)
    return state


def _restricted_sites(graph: NeighbourhoodGraph, d: int,
                      select_rng: np.random.Generator, p: int) -> list[int]:
    k = int(select_rng.integers(p))
    members = graph.nb(k).tolist()
    members.append(k)
    if d < len(members):
        members = [int(i) for i in
                   select_rng.choice(members, size=d, replace=False)]
    return members


def kernel_restricted_gibbs(state: ModelState, dataset: Dataset,
                            prior: PriorSpec, graph: NeighbourhoodGraph, d: int,
                            rng: np.random.Generator,
                            select_rng: np.random.Generator | None = None,
                            temperature: float = 1.0,
                            ctx: GammaConditional | None = None) -> ModelState:
    """Neighbourhood Gibbs restricted to at most d randomly chosen members."""
    select_rng = select_rng if select_rng is not None else rng
    ctx = _context(state, dataset, prior, temperature, ctx)
    sites = _restricted_sites(graph, d, select_rng, dataset.p)
    idx = _gibbs_site_sweep(state, prior, sites, ctx, rng)
    _redraw_beta(state, ctx, rng, idx)
    return state


def kernel_joint_gibbs(state: ModelState, dataset: Dataset, prior: PriorSpec,
                       graph: NeighbourhoodGraph, d: int,
                       rng: np.random.Generator,
                       select_rng: np.random.Generator | None = None,
                       temperature: float = 1.0,
                       ctx: GammaConditional | None = None) -> ModelState:
    """Exact joint draw of up to d neighbourhood members.

    All 2^m configurations of the chosen sites are scored by marginal
    likelihood plus prior and one is drawn from the normalized categorical.
    """
    if d > MAX_JOINT_SIZE:
        raise ConfigError(f"joint update size d={d} exceeds {MAX_JOINT_SIZE}")
    select_rng = select_rng if select_rng is not None else rng
    ctx = _context(state, dataset, prior, temperature, ctx)
    sites = sorted(_restricted_sites(graph, d, select_rng, dataset.p))
    m = len(sites)
    site_set = set(sites)
    base_idx = tuple(i for i in _included_tuple(state) if i not in site_set)
    log_pi = [prior.log_prior_odds(i) for i in sites]
    log_marginal = ctx.log_marginal
    scores: list[float] = []
    configs: list[tuple[int, ...]] = []
    for code in range(2 ** m):
        prior_term = 0.0
        valid = True
        chosen = []
        for b in range(m):
            lp = log_pi[b]
            if code >> b & 1:
                if lp == -math.inf:       # pinned-out site included
                    valid = False
                    break
                if lp != math.inf:
                    prior_term += lp
                chosen.append(sites[b])
            elif lp == math.inf:          # pinned-in site excluded
                valid = False
                break
        if not valid:
            scores.append(-math.inf)
            configs.append(())
            continue
        idx = tuple(sorted(base_idx + tuple(chosen)))
        scores.append(log_marginal(idx) + prior_term)
        configs.append(idx)
    top = max(scores)
    weights = [math.exp(s - top) for s in scores]
    target = rng.random() * sum(weights)
    acc = 0.0
    code = 2 ** m - 1
    for c, w in enumerate(weights):
        acc += w
        if target < acc:
            code = c
            break
    for b, i in enumerate(sites):
        state.gamma[i] = bool(code >> b & 1)
    _redraw_beta(state, ctx, rng, configs[code])
    return state


def apply_kernel(spec: KernelSpec, state: ModelState, dataset: Dataset,
                 prior: PriorSpec, rng: np.random.Generator,
                 select_rng: np.random.Generator,
                 temperature: float = 1.0,
                 ctx: GammaConditional | None = None) -> ModelState:
    if spec.kind == "add_delete":
        return kernel_add_delete(state, dataset, prior, rng, select_rng,
                                 temperature, ctx)
    if spec.kind == "full_gibbs":
        return kernel_full_gibbs(state, dataset, prior, rng, select_rng,
                                 temperature, ctx)
    if spec.kind == "neighbourhood_gibbs":
        return kernel_neighbourhood_gibbs(state, dataset, prior, spec.graph,
                                          rng, select_rng, temperature, ctx)
    if spec.kind == "restricted_gibbs":
        return kernel_restricted_gibbs(state, dataset, prior, spec.graph,
                                       spec.d, rng, select_rng, temperature, ctx)
    return kernel_joint_gibbs(state, dataset, prior, spec.graph, spec.d,
                              rng, select_rng, temperature, ctx)


def advance_iteration(state: ModelState, dataset: Dataset, prior: PriorSpec,
                      spec: KernelSpec, rng: np.random.Generator,
                      select_rng: np.random.Generator,
                      temperature: float = 1.0) -> ModelState:
    """One full outer iteration: (z, lambda) block, then (gamma, beta)."""
    state.z = sample_z(state, dataset, prior, rng, temperature)
    if prior.link == "logistic":
        resid = state.z - state.margin(dataset)
        state.lambda_diag = sample_lambda(resid * resid, rng, temperature)
    return apply_kernel(spec, state, dataset, prior, rng, select_rng,
                        temperature)


def run_chain(dataset: Dataset, prior: PriorSpec, kernel: KernelSpec,
              config: RunConfig, rng: np.random.Generator | None = None,
              select_rng: np.random.Generator | None = None,
              log_every: int = 10_000, echo=print) -> TraceSet:
    """Run one untempered chain and record its post-burn-in trace.

    CPU time covers post-burn-in iterations only, matching how effective
    samples per second are reported.
    """
    if prior.pi.size == 1 and dataset.p > 1:
        prior = PriorSpec(np.full(dataset.p, float(prior.pi[0])), prior.c2,
                          prior.link, prior.prior_form)
    if rng is None or select_rng is None:
        rng, select_rng = chain_streams(config.seed)
    state = init_state_from_prior(dataset, prior, rng)

    gamma_trace: list[tuple[int, ...]] = []
    dev_trace: list[float] = []
    size_trace: list[int] = []
    its: list[int] = []
    cpu = 0.0
    for it in range(1, config.n_iterations + 1):
        tick = time.process_time()
        advance_iteration(state, dataset, prior, kernel, rng, select_rng)
        if it > config.burn_in:
            cpu += time.process_time() - tick
            if (it - config.burn_in - 1) % config.record_every == 0:
                gamma_trace.append(tuple(int(i) for i in state.included))
                dev_trace.append(deviance_from_margin(dataset, state.margin(dataset)))
                size_trace.append(state.model_size)
                its.append(it)
        if log_every and it % log_every == 0:
            echo(f"[{kernel.label()}] iteration {it}/{config.n_iterations}")
    return TraceSet(dataset.p, gamma_trace, np.array(dev_trace),
                    np.array(size_trace, dtype=int), np.array(its, dtype=int),
                    cpu, kernel.label(), config.n_iterations, config.burn_in,
                    config.seed)


# ---------------------------------------------------------------------------
# Trace persistence: three CSV files per run.
# ---------------------------------------------------------------------------

def save_traces(traces: TraceSet, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trace_scalar.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "deviance", "model_size"])
        for it, dev, size in zip(traces.iterations, traces.deviance_trace,
                                 traces.model_size_trace):
            writer.writerow([int(it), f"{dev:.17g}", int(size)])
    with open(out / "trace_gamma.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "included"])
        for it, idx in zip(traces.iterations, traces.gamma_trace):
            writer.writerow([int(it), " ".join(str(i) for i in idx)])
    with open(out / "meta.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value"])
        writer.writerow(["kernel", traces.kernel_label])
        writer.writerow(["N", traces.n_iterations])
        writer.writerow(["B", traces.burn_in])
        writer.writerow(["M", traces.M])
        writer.writerow(["seed", traces.seed])
        writer.writerow(["cpu_seconds", f"{traces.cpu_seconds:.17g}"])
        writer.writerow(["p", traces.p])
        for pair, attempts, accepts in traces.swap_stats:
            writer.writerow([f"swap.pair{pair}.attempts", attempts])
            writer.writerow([f"swap.pair{pair}.accepts", accepts])
        for key, value in traces.config_echo.items():
            writer.writerow([f"config.{key}", value])


def load_traces(trace_dir) -> TraceSet:
    trace_dir = Path(trace_dir)
    scalar = trace_dir / "trace_scalar.csv"
    gamma = trace_dir / "trace_gamma.csv"
    meta = trace_dir / "meta.csv"
    for f in (scalar, gamma, meta):
        if not f.exists():
            raise ConfigError(f"trace directory {trace_dir} is missing {f.name}")
    meta_map: dict[str, str] = {}
    with open(meta, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row and row[0] != "key":
                meta_map[row[0]] = row[1]
    its, devs, sizes = [], [], []
    with open(scalar, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row and row[0] != "iteration":
                its.append(int(row[0]))
                devs.append(float(row[1]))
                sizes.append(int(row[2]))
    gammas: list[tuple[int, ...]] = []
    with open(gamma, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row and row[0] != "iteration":
                cell = row[1] if len(row) > 1 else ""
                gammas.append(tuple(int(t) for t in cell.split()) if cell else ())
    swap_stats = []
    for key, value in meta_map.items():
        if key.startswith("swap.pair") and key.endswith(".attempts"):
            pair = int(key[len("swap.pair"):-len(".attempts")])
            accepts = int(meta_map.get(f"swap.pair{pair}.accepts", 0))
            swap_stats.append((pair, int(value), accepts))
    config_echo = {k[len("config."):]: v for k, v in meta_map.items()
                   if k.startswith("config.")}
    return TraceSet(int(meta_map["p"]), gammas, np.array(devs),
                    np.array(sizes, dtype=int), np.array(its, dtype=int),
                    float(meta_map["cpu_seconds"]), meta_map.get("kernel", ""),
                    int(meta_map.get("N", 0)), int(meta_map.get("B", 0)),
                    int(meta_map.get("seed", 0)), sorted(swap_stats),
                    config_echo)
