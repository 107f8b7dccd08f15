"""Batch command-line front door.

Four subcommands: `simulate` writes a dataset with known truth,
`estimate-deps` builds a neighbourhood graph, `run` executes one (possibly
tempered) MCMC run from a flat key-value config file, and `diagnose` turns
trace files into mixing reports.  Every artifact is CSV with a header row
and 17 significant digits.  Exit codes: 0 success, 2 configuration error,
3 numerical error.  Environment variables are never consulted.

Config file grammar (for `run`): one `key = value` per line, `#` starts a
comment, blank lines ignored, unknown keys rejected.  See README for the
key reference.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dependence, diagnostics, simulate
from .errors import BinselError, ConfigError, NumericalError
from .model import Dataset, PriorSpec, load_dataset, save_dataset, standardize
from .samplers import (KernelSpec, RunConfig, load_traces, run_chain,
                       save_traces)
from .tempering import LadderSpec, run_parallel_tempering

_CONFIG_DEFAULTS: dict[str, str] = {
    "dataset": "",
    "pi": "",                 # blank: default 5/p
    "pi_file": "",
    "c2": "5.0",
    "link": "logistic",
    "prior_form": "independence",
    "kernel": "add_delete",
    "d": "0",
    "graph": "",
    "graph_source": "",       # pcor | corr | random, when no graph file given
    "threshold_c": "0.9",
    "mean_degree": "0",
    "n_iterations": "0",
    "burn_in": "0",
    "seed": "0",
    "record_every": "1",
    "tempering": "off",
    "n_chains": "5",
    "tau": "1.2",
    "swap_interval": "1",
    "pt_burn_in": "50000",
    "output_dir": "",
}

_KERNEL_ALIASES = {
    "add_delete": "add_delete",
    "ad": "add_delete",
    "full_gibbs": "full_gibbs",
    "full": "full_gibbs",
    "neighbourhood_gibbs": "neighbourhood_gibbs",
    "neighbourhood": "neighbourhood_gibbs",
    "gibbs": "neighbourhood_gibbs",
    "restricted_gibbs": "restricted_gibbs",
    "rgibbs": "restricted_gibbs",
    "joint_gibbs": "joint_gibbs",
    "joint": "joint_gibbs",
}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat `key = value` lines into a dict; unknown keys are rejected."""
    values = dict(_CONFIG_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in values:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


@dataclass
class ExperimentConfig:
    """Validated, fully resolved run configuration."""

    values: dict[str, str]

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        return cls(parse_config_text(text))

    def effective(self) -> dict[str, str]:
        return dict(self.values)

    def serialize(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.values.items()) + "\n"


def _build_prior(values: dict[str, str], dataset: Dataset) -> PriorSpec:
    if values["pi_file"]:
        pi = np.loadtxt(values["pi_file"], delimiter=",", ndmin=1)
        if pi.size != dataset.p:
            raise ConfigError("pi_file length does not match the dataset")
    elif values["pi"]:
        pi = np.full(dataset.p, float(values["pi"]))
    else:
        pi = np.full(dataset.p, 5.0 / dataset.p)
        values["pi"] = f"{5.0 / dataset.p:.17g}"
    return PriorSpec(pi, float(values["c2"]), values["link"],
                     values["prior_form"])


def _build_graph(values: dict[str, str], dataset: Dataset, seed: int):
    if values["graph"]:
        return dependence.load_graph(values["graph"], dataset.p)
    source = values["graph_source"]
    if not source:
        raise ConfigError("neighbourhood kernels need `graph` or `graph_source`")
    if source == "random":
        rng = np.random.default_rng(np.random.SeedSequence((seed, 777)))
        return dependence.random_graph(dataset.p, float(values["mean_degree"]), rng)
    estimate = dependence.shrinkage_correlation(dataset.x)
    if source == "pcor":
        coefs = dependence.partial_correlation(estimate)
        return dependence.threshold_graph(coefs, float(values["threshold_c"]),
                                          "partial_correlation")
    if source == "corr":
        return dependence.threshold_graph(estimate.r_hat,
                                          float(values["threshold_c"]),
                                          "correlation")
    raise ConfigError(f"unknown graph_source {source!r}")


def _build_kernel(values: dict[str, str], dataset: Dataset, seed: int) -> KernelSpec:
    name = values["kernel"].strip().lower()
    if name not in _KERNEL_ALIASES:
        raise ConfigError(f"unknown kernel {values['kernel']!r}")
    kind = _KERNEL_ALIASES[name]
    values["kernel"] = kind
    graph = None
    d = None
    if kind in ("neighbourhood_gibbs", "restricted_gibbs", "joint_gibbs"):
        graph = _build_graph(values, dataset, seed)
    if kind in ("restricted_gibbs", "joint_gibbs"):
        d = int(values["d"])
    return KernelSpec(kind, graph, d)


def cmd_run(config_path, quiet: bool = False) -> Path:
    config = ExperimentConfig.from_file(config_path)
    values = config.values
    if not values["dataset"]:
        raise ConfigError("config must set `dataset`")
    if not values["output_dir"]:
        raise ConfigError("config must set `output_dir`")
    dataset = load_dataset(values["dataset"])
    prior = _build_prior(values, dataset)
    seed = int(values["seed"])
    kernel = _build_kernel(values, dataset, seed)
    run_cfg = RunConfig(int(values["n_iterations"]), int(values["burn_in"]),
                        seed, int(values["record_every"]))
    echo = (lambda s: None) if quiet else print
    if values["tempering"].lower() in ("on", "true", "yes", "1"):
        ladder = LadderSpec(float(values["tau"]), int(values["n_chains"]),
                            int(values["swap_interval"]),
                            int(values["pt_burn_in"]))
        traces = run_parallel_tempering(dataset, prior, kernel, ladder,
                                        run_cfg, echo=echo)
    else:
        traces = run_chain(dataset, prior, kernel, run_cfg, echo=echo)
    traces.config_echo = config.effective()
    out = Path(values["output_dir"])
    save_traces(traces, out)
    return out


def cmd_simulate(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    if args.scenario == 1:
        dataset, truth = simulate.simulate_scenario1(args.n, args.p, args.q, rng)
    else:
        if args.matrix:
            matrix = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
        elif args.surrogate:
            matrix = simulate.surrogate_expression_matrix(
                args.surrogate_n, args.surrogate_genes, rng)
        else:
            raise ConfigError(
                "scenario 2 needs --matrix or --surrogate (no data is bundled)")
        dataset, truth = simulate.simulate_scenario2(matrix, args.p, rng)
    save_dataset(dataset, out / "dataset.csv")
    simulate.save_truth(truth, out / "truth.csv")


def cmd_estimate_deps(args) -> None:
    dataset = load_dataset(args.dataset)
    if args.source == "random":
        rng = np.random.default_rng(args.seed)
        graph = dependence.random_graph(dataset.p, args.mean_degree, rng)
    else:
        x = dataset.x if not args.standardize else standardize(dataset.x)
        estimate = dependence.shrinkage_correlation(x)
        if args.source == "pcor":
            coefs = dependence.partial_correlation(estimate)
            graph = dependence.threshold_graph(coefs, args.threshold,
                                               "partial_correlation")
        else:
            coefs = estimate.r_hat
            graph = dependence.threshold_graph(coefs, args.threshold,
                                               "correlation")
        if args.save_estimate:
            dependence.save_matrix(coefs, args.save_estimate)
    dependence.save_graph(graph, args.out)


def cmd_diagnose(args) -> None:
    traces = load_traces(args.trace_dir)
    truth_set = None
    if args.truth:
        truth_set = simulate.load_truth(args.truth).true_indices
    diagnostics.save_reports(traces, args.out, truth_set, args.cutoff)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="binsel",
                                 description="Bayesian variable selection "
                                             "for binary regression")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a dataset with known truth")
    sim.add_argument("--scenario", type=int, choices=(1, 2), required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--n", type=int, default=100)
    sim.add_argument("--p", type=int, default=500)
    sim.add_argument("--q", type=int, default=100,
                     help="block size for scenario 1")
    sim.add_argument("--matrix", default="",
                     help="expression matrix CSV for scenario 2")
    sim.add_argument("--surrogate", action="store_true",
                     help="use the synthetic expression surrogate")
    sim.add_argument("--surrogate-n", type=int, default=104)
    sim.add_argument("--surrogate-genes", type=int, default=2000)

    deps = sub.add_parser("estimate-deps", help="build a neighbourhood graph")
    deps.add_argument("--dataset", required=True)
    deps.add_argument("--source", choices=("pcor", "corr", "random"),
                      default="pcor")
    deps.add_argument("--threshold", type=float, default=0.9,
                      help="percentile C in [0, 1)")
    deps.add_argument("--mean-degree", type=float, default=0.0)
    deps.add_argument("--seed", type=int, default=0)
    deps.add_argument("--standardize", action="store_true")
    deps.add_argument("--save-estimate", default="")
    deps.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run one MCMC experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--quiet", action="store_true")

    diag = sub.add_parser("diagnose", help="mixing reports from trace files")
    diag.add_argument("--trace-dir", required=True)
    diag.add_argument("--truth", default="")
    diag.add_argument("--cutoff", type=float, default=0.05)
    diag.add_argument("--out", required=True)

    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args)
        elif args.command == "estimate-deps":
            cmd_estimate_deps(args)
        elif args.command == "run":
            cmd_run(args.config, quiet=args.quiet)
        elif args.command == "diagnose":
            cmd_diagnose(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BinselError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
