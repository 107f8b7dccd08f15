"""Shrinkage (partial) correlation estimation and neighbourhood graphs.

The correlation matrix is estimated by linear shrinkage of the empirical
correlations toward the identity, with the intensity chosen analytically:

    lambda* = sum_{i != k} Var^(r_ik) / sum_{i != k} r_ik^2,  clamped to [0, 1],

where Var^(r_ik) is the unbiased product-moment estimator
n / (n-1)^3 * sum_j (w_jik - wbar_ik)^2 over products w_jik of standardized
residuals.  Only off-diagonal entries are shrunk.  Partial correlations come
from the inverse of the shrunken correlation matrix, and thresholding the
absolute coefficients at a percentile C yields the sparse symmetric graph
that drives the neighbourhood samplers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConstantColumnError, NumericalError

GRAPH_SOURCES = ("partial_correlation", "correlation", "random")


@dataclass
class ShrinkageEstimate:
    """Shrunken correlation matrix with its intensity and column variances."""

    r_hat: np.ndarray
    lambda_star: float
    variances: np.ndarray


@dataclass
class NeighbourhoodGraph:
    """Symmetric loop-free adjacency over variables.

    Neighbour lists are stored per variable, so nb(i) is O(degree).
    """

    neighbours: list[np.ndarray]
    source: str
    threshold_percentile: float = 0.0
    weights: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.source not in GRAPH_SOURCES:
            raise ConfigError(f"graph source must be one of {GRAPH_SOURCES}")

    @property
    def p(self) -> int:
        return len(self.neighbours)

    def nb(self, i: int) -> np.ndarray:
        return self.neighbours[i]

    def degree(self, i: int) -> int:
        return self.neighbours[i].size

    @property
    def n_edges(self) -> int:
        return sum(v.size for v in self.neighbours) // 2

    def edges(self):
        for i, nbrs in enumerate(self.neighbours):
            for k in nbrs:
                if i < k:
                    yield (i, int(k))

    def adjacency(self) -> np.ndarray:
        """Dense boolean matrix (diagnostics and tests only)."""
        a = np.zeros((self.p, self.p), dtype=bool)
        for i, k in self.edges():
            a[i, k] = a[k, i] = True
        return a


def _neighbour_lists(p: int, pairs) -> list[np.ndarray]:
    lists: list[list[int]] = [[] for _ in range(p)]
    for i, k in pairs:
        lists[i].append(k)
        lists[k].append(i)
    return [np.array(sorted(v), dtype=np.intp) for v in lists]


def shrinkage_correlation(x: np.ndarray) -> ShrinkageEstimate:
    """Analytic-intensity shrinkage estimate of the correlation matrix.

    Correlations come from the unbiased (divisor n-1) covariance; the
    intensity uses the product-moment variance estimator of each r_ik.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 3:
        raise ConfigError("shrinkage_correlation expects an n x p matrix with n >= 3")
    n, p = x.shape
    sd = x.std(axis=0, ddof=1)
    bad = np.flatnonzero(sd == 0.0)
    if bad.size:
        raise ConstantColumnError(int(bad[0]))
    variances = sd ** 2

    u = (x - x.mean(axis=0)) / sd           # standardized residuals
    wbar = (u.T @ u) / n                    # mean of w_jik over samples
    r_emp = wbar * (n / (n - 1.0))
    # sum_j (w_jik - wbar_ik)^2 = sum_j w_jik^2 - n wbar_ik^2
    u2 = u * u
    sq = u2.T @ u2 - n * wbar * wbar
    var_r = (n / (n - 1.0) ** 3) * sq

    off = ~np.eye(p, dtype=bool)
    denom = float(np.sum(r_emp[off] ** 2))
    if denom <= 0.0 or p == 1:
        lambda_star = 1.0
    else:
        lambda_star = float(np.sum(var_r[off]) / denom)
        lambda_star = min(max(lambda_star, 0.0), 1.0)

    r_hat = (1.0 - lambda_star) * r_emp
    np.fill_diagonal(r_hat, 1.0)
    r_hat = 0.5 * (r_hat + r_hat.T)
    return ShrinkageEstimate(r_hat, lambda_star, variances)


def partial_correlation(estimate: ShrinkageEstimate) -> np.ndarray:
    """Partial correlations rho_ik = -inv_ik / sqrt(inv_ii inv_kk).

    Computed from the inverse of the shrunken correlation matrix; the
    diagonal is reported as 1 by convention.
    """
    r = np.asarray(estimate.r_hat, dtype=float)
    try:
        chol = np.linalg.cholesky(r)
    except np.linalg.LinAlgError:
        raise NumericalError(
            "correlation matrix is not positive definite; "
            "use a nonzero shrinkage intensity") from None
    inv = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(r.shape[0])))
    d = np.sqrt(np.diag(inv))
    rho = -inv / np.outer(d, d)
    np.fill_diagonal(rho, 1.0)
    return 0.5 * (rho + rho.T)


def threshold_graph(coefficients: np.ndarray, c: float,
                    source: str = "partial_correlation") -> NeighbourhoodGraph:
    """Keep edges whose |coefficient| is at or above the C-th percentile.

    The percentile is taken over the p(p-1)/2 upper-triangle absolute
    values with linear interpolation between order statistics; ties at the
    threshold are all kept, and C = 0 yields the complete graph.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    p = coefficients.shape[0]
    if coefficients.shape != (p, p):
        raise ConfigError("coefficient matrix must be square")
    if not 0.0 <= c < 1.0:
        raise ConfigError("threshold percentile must lie in [0, 1)")
    iu, ku = np.triu_indices(p, k=1)
    absvals = np.abs(coefficients[iu, ku])
    if absvals.size == 0:
        return NeighbourhoodGraph([np.array([], dtype=np.intp)] * p, source, c)
    cut = float(np.quantile(absvals, c))
    keep = absvals >= cut
    pairs = list(zip(iu[keep].tolist(), ku[keep].tolist()))
    graph = NeighbourhoodGraph(_neighbour_lists(p, pairs), source, c)
    graph.weights = {(i, k): float(abs(coefficients[i, k])) for i, k in pairs}
    return graph


def random_graph(p: int, mean_degree: float,
                 rng: np.random.Generator) -> NeighbourhoodGraph:
    """Erdos-Renyi graph with edge probability mean_degree / (p - 1)."""
    if not 0.0 <= mean_degree <= p - 1:
        raise ConfigError("mean_degree must lie in [0, p - 1]")
    prob = 0.0 if p < 2 else mean_degree / (p - 1.0)
    iu, ku = np.triu_indices(p, k=1)
    keep = rng.random(iu.size) < prob
    pairs = list(zip(iu[keep].tolist(), ku[keep].tolist()))
    graph = NeighbourhoodGraph(_neighbour_lists(p, pairs), "random", 0.0)
    graph.weights = {pair: 1.0 for pair in pairs}
    return graph


def complete_graph(p: int, source: str = "partial_correlation") -> NeighbourhoodGraph:
    """All-pairs graph; the C = 0 limit under which every variable updates."""
    pairs = [(i, k) for i in range(p) for k in range(i + 1, p)]
    return NeighbourhoodGraph(_neighbour_lists(p, pairs), source, 0.0)


def save_graph(graph: NeighbourhoodGraph, path) -> None:
    """Edge-list CSV `i,k,weight` with 0-based indices."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "k", "weight"])
        for i, k in graph.edges():
            writer.writerow([i, k, f"{graph.weights.get((i, k), 1.0):.17g}"])


def load_graph(path, p: int, source: str = "partial_correlation") -> NeighbourhoodGraph:
    """Read an edge-list CSV written by save_graph."""
    pairs = []
    weights = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0] == "i":
                continue
            i, k = int(row[0]), int(row[1])
            if i == k:
                raise ConfigError(f"{path}: self-loop on variable {i}")
            if not (0 <= i < p and 0 <= k < p):
                raise ConfigError(f"{path}: edge ({i},{k}) outside 0..{p - 1}")
            pair = (min(i, k), max(i, k))
            if pair not in weights:
                pairs.append(pair)
            weights[pair] = float(row[2]) if len(row) > 2 else 1.0
    graph = NeighbourhoodGraph(_neighbour_lists(p, pairs), source, 0.0)
    graph.weights = weights
    return graph


def save_matrix(matrix: np.ndarray, path) -> None:
    """Plain CSV dump of a square estimate matrix."""
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g")
