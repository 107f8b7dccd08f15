"""Mixing diagnostics: per-variable ESS, weighted-median ESS*, and reports.

The effective sample size of an indicator trace is M / tau with tau the
integrated autocorrelation time of an AR(k) model fitted by least squares
on the centered sequence.  The order k is chosen by AIC among 1..10 log10(M),
and tau is the fitted model's full integrated autocorrelation

    tau = sigma^2 / ((1 - sum alpha_i)^2 Var(x)),

i.e. one plus twice the sum of the model-implied autocorrelations over all
lags.  Constant traces get ESS 0 (never-selected variables); tau is floored
at one and ESS capped at M, which in particular makes a single lone
inclusion among M - 1 zeros evaluate to M.

ESS*(gamma) weights the median ESS over ever-visited variables by the
visited fraction; unvisited variables contribute a zero-median term.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .samplers import TraceSet


@dataclass
class EssReport:
    """Summary of one chain's mixing: ESS values, ESS*, #I, time, and R."""

    ess_per_variable: np.ndarray
    ess_star: float
    visited_count: int
    cpu_seconds: float
    efficiency_ratio: float   # ESS* per minute of post-burn-in CPU time


def ess_ar(trace) -> float:
    """Effective sample size of one binary (or real) sequence.

    All candidate orders share the maximal-lag sample window, so one QR of
    the widest lagged design yields the exact OLS fit and residual sum of
    squares of every nested model at once.
    """
    x = np.asarray(trace, dtype=float)
    m = x.size
    if m < 2:
        raise ConfigError("need a trace of length >= 2")
    if np.all(x == x[0]):
        return 0.0
    xc = x - x.mean()
    var = float(xc @ xc) / m
    k_max = int(10.0 * math.log10(m))
    k_max = max(1, min(k_max, m // 2 - 1, 50))

    # column j holds lag j+1: rows are t = k_max .. m-1
    design = np.column_stack([xc[k_max - j - 1: m - j - 1]
                              for j in range(k_max)])
    target = xc[k_max:]
    # sequential regression through the Gram Cholesky (same R as QR up to
    # signs); exact QR fallback when lag columns are linearly dependent
    try:
        chol = np.linalg.cholesky(design.T @ design)
        r = chol.T
        qty = np.linalg.solve(chol, design.T @ target)
    except np.linalg.LinAlgError:
        q, r = np.linalg.qr(design)
        qty = q.T @ target
    yty = float(target @ target)
    partial = yty - np.cumsum(qty ** 2)
    best_k = 1
    best_aic = math.inf
    for k in range(1, k_max + 1):
        rss = max(float(partial[k - 1]), 1e-300)
        aic = m * math.log(rss / m) + 2.0 * k
        if aic < best_aic:
            best_aic = aic
            best_k = k
    sub = r[:best_k, :best_k]
    if float(np.min(np.abs(np.diag(sub)))) < 1e-12:
        return 0.0
    coef = np.linalg.solve(sub, qty[:best_k])
    rss = max(float(partial[best_k - 1]), 1e-300)
    sigma2 = rss / m
    denom = (1.0 - float(coef.sum())) ** 2 * var
    if denom <= 0.0 or not math.isfinite(denom):
        return 0.0
    tau = max(sigma2 / denom, 1.0)
    return min(m / tau, float(m))


def ess_star(ess_per_variable, visited) -> float:
    """Visited-fraction-weighted median ESS over ever-visited variables."""
    ess = np.asarray(ess_per_variable, dtype=float)
    visited = np.asarray(visited, dtype=bool)
    if ess.shape != visited.shape:
        raise ConfigError("ess and visited vectors must have equal length")
    p = ess.size
    n_visited = int(visited.sum())
    if n_visited == 0:
        return 0.0
    return (n_visited / p) * float(np.median(ess[visited]))


def efficiency_ratio(ess_star_value: float, cpu_time: float) -> float:
    """ESS* divided by CPU time (caller chooses the time unit)."""
    if not cpu_time > 0.0:
        raise ConfigError("CPU time must be positive")
    return ess_star_value / cpu_time


def inclusion_probabilities(traces: TraceSet) -> np.ndarray:
    """Per-variable posterior inclusion frequency over recorded iterations."""
    if traces.M < 1:
        raise ConfigError("need at least one recorded iteration")
    counts = np.zeros(traces.p)
    for idx in traces.gamma_trace:
        if idx:
            counts[list(idx)] += 1.0
    return counts / traces.M


def fp_fn_counts(p_hat, truth_set, cutoff: float) -> tuple[int, int]:
    """False positives / negatives at a strict posterior-probability cutoff."""
    if not 0.0 < cutoff < 1.0:
        raise ConfigError("cutoff must lie in (0, 1)")
    p_hat = np.asarray(p_hat, dtype=float)
    truth = np.zeros(p_hat.size, dtype=bool)
    truth[list(truth_set)] = True
    selected = p_hat > cutoff
    fp = int(np.sum(selected & ~truth))
    fn = int(np.sum(~selected & truth))
    return fp, fn


def analyze_traces(traces: TraceSet) -> tuple[EssReport, np.ndarray, np.ndarray]:
    """Per-variable ESS plus the aggregate report for one TraceSet.

    Returns (report, ess_per_variable, p_hat).  The efficiency ratio uses
    minutes, matching how results are tabulated.
    """
    inclusion = traces.inclusion_matrix()
    visited = inclusion.any(axis=0)
    ess = np.zeros(traces.p)
    for i in np.flatnonzero(visited):
        ess[i] = ess_ar(inclusion[:, i])
    star = ess_star(ess, visited)
    minutes = traces.cpu_seconds / 60.0
    ratio = efficiency_ratio(star, minutes) if minutes > 0.0 else 0.0
    report = EssReport(ess, star, int(visited.sum()), traces.cpu_seconds, ratio)
    return report, ess, inclusion_probabilities(traces)


def save_reports(traces: TraceSet, out_dir, truth_set=None,
                 cutoff: float = 0.05) -> EssReport:
    """Write diagnostics.csv (per variable) and summary.csv (aggregates)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report, ess, p_hat = analyze_traces(traces)
    visited = ess > 0.0
    inclusion = traces.inclusion_matrix()
    ever = inclusion.any(axis=0)
    with open(out / "diagnostics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "ess", "p_hat", "visited"])
        for i in range(traces.p):
            writer.writerow([i, f"{ess[i]:.17g}", f"{p_hat[i]:.17g}",
                             int(ever[i])])
    row = {
        "ess_star": f"{report.ess_star:.17g}",
        "visited_count": report.visited_count,
        "cpu_seconds": f"{report.cpu_seconds:.17g}",
        "efficiency_ratio_per_min": f"{report.efficiency_ratio:.17g}",
    }
    if truth_set is not None:
        fp, fn = fp_fn_counts(p_hat, truth_set, cutoff)
        row["fp"] = fp
        row["fn"] = fn
        row["cutoff"] = f"{cutoff:.17g}"
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(row.keys()))
        writer.writerow(list(row.values()))
    return report
