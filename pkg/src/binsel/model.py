"""Data, priors, chain state, and the conjugate Gaussian algebra.

Everything the MCMC kernels consume lives here: the marginal likelihood of
the latent utilities with the coefficients integrated out, the conditional
Gaussian posterior of the coefficients, the model deviance, and the
prior-variance heuristic range.  All densities are carried in the log
domain; the marginal likelihood is always evaluated through factorizations
of the small (active-set sized) matrix, never of an n-by-n covariance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConstantColumnError, FactorizationError

LOG_2PI = math.log(2.0 * math.pi)

# Relative diagonal jitter applied once if a Cholesky fails; a second
# failure is a hard error so that genuinely singular g-priors surface.
JITTER_REL = 1e-10

LINKS = ("logistic", "probit")
PRIOR_FORMS = ("independence", "g_prior")


@dataclass
class Dataset:
    """Covariate matrix (n x p) with a binary response vector.

    Columns are not forced to be standardized: `standardize` is an explicit
    preprocessing step and some generators deliberately emit raw columns.
    """

    x: np.ndarray
    y: np.ndarray
    column_labels: list[str] | None = None

    def __post_init__(self):
        self.x = np.ascontiguousarray(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y)
        if self.x.ndim != 2:
            raise ConfigError("covariate matrix must be two-dimensional")
        n, p = self.x.shape
        if n < 2 or p < 1:
            raise ConfigError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if not np.all(np.isfinite(self.x)):
            raise ConfigError("covariate matrix contains non-finite values")
        if self.y.shape != (n,):
            raise ConfigError("response length must match the number of rows")
        yv = np.asarray(self.y, dtype=float)
        if not np.all((yv == 0.0) | (yv == 1.0)):
            raise ConfigError("response entries must be exactly 0 or 1")
        self.y = yv.astype(np.int8)
        if self.column_labels is not None and len(self.column_labels) != p:
            raise ConfigError("column_labels length must equal p")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def y_signed(self) -> np.ndarray:
        """Response recoded to -1/+1 (used by the deviance)."""
        return 2.0 * self.y - 1.0


@dataclass
class PriorSpec:
    """Inclusion probabilities, coefficient variance scale, link, prior form.

    The coefficient prior is N(0, v) with v = c2 * I (independence) or
    v = c2 * (x'x)^-1 restricted to the active columns (g-prior).
    Endpoint inclusion probabilities 0 and 1 are accepted: they pin the
    corresponding indicator and are convenient in tests.
    """

    pi: np.ndarray
    c2: float
    link: str = "logistic"
    prior_form: str = "independence"

    def __post_init__(self):
        self.pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        self._log_odds = None
        if np.any(self.pi < 0.0) or np.any(self.pi > 1.0):
            raise ConfigError("inclusion probabilities must lie in [0, 1]")
        if not (self.c2 > 0.0 and np.isfinite(self.c2)):
            raise ConfigError("c2 must be a positive finite real")
        if self.link not in LINKS:
            raise ConfigError(f"link must be one of {LINKS}")
        if self.prior_form not in PRIOR_FORMS:
            raise ConfigError(f"prior_form must be one of {PRIOR_FORMS}")

    @classmethod
    def constant(cls, p: int, pi: float, c2: float, link: str = "logistic",
                 prior_form: str = "independence") -> "PriorSpec":
        return cls(np.full(p, float(pi)), c2, link, prior_form)

    @property
    def log_odds(self) -> np.ndarray:
        """log(pi / (1 - pi)) per variable, +-inf at the endpoints."""
        if self._log_odds is None:
            with np.errstate(divide="ignore"):
                self._log_odds = np.log(self.pi) - np.log1p(-self.pi)
        return self._log_odds

    def log_prior_odds(self, i: int) -> float:
        return float(self.log_odds[i])


@dataclass
class ModelState:
    """Current (gamma, beta_gamma, z, lambda) of one chain at temperature T.

    `beta_gamma` is aligned with the included indices in ascending order.
    For the probit link `lambda_diag` stays identically one.
    """

    gamma: np.ndarray
    beta_gamma: np.ndarray
    z: np.ndarray
    lambda_diag: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=bool)
        self.beta_gamma = np.asarray(self.beta_gamma, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        self.lambda_diag = np.asarray(self.lambda_diag, dtype=float)
        if self.beta_gamma.shape != (int(self.gamma.sum()),):
            raise ConfigError("beta_gamma length must equal the active-set size")
        if np.any(self.lambda_diag <= 0.0):
            raise ConfigError("lambda entries must be strictly positive")
        if self.temperature < 1.0:
            raise ConfigError("temperature must be >= 1")

    @property
    def included(self) -> np.ndarray:
        return np.flatnonzero(self.gamma)

    @property
    def model_size(self) -> int:
        return int(self.gamma.sum())

    def margin(self, dataset: Dataset) -> np.ndarray:
        """Linear predictor x_gamma beta_gamma (length n)."""
        idx = self.included
        if idx.size == 0:
            return np.zeros(dataset.n)
        return dataset.x[:, idx] @ self.beta_gamma

    def beta_full(self, p: int) -> np.ndarray:
        """Coefficients embedded into length p with zeros off-model."""
        beta = np.zeros(p)
        beta[self.included] = self.beta_gamma
        return beta


@dataclass
class PosteriorGaussian:
    """Mean and lower-Cholesky covariance factor of the beta posterior."""

    included_indices: np.ndarray
    B: np.ndarray
    V_chol: np.ndarray
    log_det_V: float
    quad_form: float

    @property
    def dim(self) -> int:
        return self.B.shape[0]


def standardize(x: np.ndarray) -> np.ndarray:
    """Scale every column to sample mean 0 and standard deviation 1 (divisor n-1).

    Raises ConstantColumnError naming the first offending column if any
    column has zero sample variance.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ConfigError("standardize expects an n x p matrix with n >= 2")
    mean = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    bad = np.flatnonzero(np.ptp(x, axis=0) == 0.0)
    if bad.size == 0:
        bad = np.flatnonzero(sd == 0.0)
    if bad.size:
        raise ConstantColumnError(int(bad[0]))
    return (x - mean) / sd


def _chol_with_jitter(a: np.ndarray, gamma_idx) -> np.ndarray:
    """Lower Cholesky of `a`, retrying once with relative jitter."""
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_REL * float(np.mean(np.diag(a)))
    try:
        return np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
    except np.linalg.LinAlgError:
        raise FactorizationError(
            "posterior precision is not positive definite", gamma_idx
        ) from None


# Below this column count the whitened Gram is formed once per (z, lambda)
# and subset precisions are sliced out of it; above it, subsets stay cheaper
# than the p x p product and are assembled per call.  Either route performs
# the same fresh factorization per evaluation.
GRAM_LIMIT = 600


class GammaConditional:
    """Evaluator of the indicator conditional for fixed (z, lambda, T).

    Precomputes the whitened design once so that per-subset marginal
    likelihoods only require an active-set sized Gram matrix and its
    Cholesky factor.  Used by every gamma kernel; also backs the public
    `log_marginal_z` and `compute_posterior_gaussian` wrappers.
    """

    def __init__(self, dataset: Dataset, prior: PriorSpec, z: np.ndarray,
                 lambda_diag: np.ndarray, temperature: float = 1.0):
        lam = np.asarray(lambda_diag, dtype=float)
        z = np.asarray(z, dtype=float)
        if np.any(lam <= 0.0):
            raise ConfigError("lambda entries must be strictly positive")
        if temperature < 1.0:
            raise ConfigError("temperature must be >= 1")
        n = dataset.n
        scale = 1.0 / np.sqrt(temperature * lam)
        self.dataset = dataset
        self.prior = prior
        self.w = dataset.x * scale[:, None]          # (T lam)^{-1/2} x
        self.zw = z * scale                          # (T lam)^{-1/2} z
        self.log_det_tlam = float(np.sum(np.log(temperature * lam)))
        self.ztz = float(self.zw @ self.zw)
        # log of the gamma-independent Gaussian factor: the p_gamma = 0 value
        self.base = -0.5 * n * LOG_2PI - 0.5 * self.log_det_tlam - 0.5 * self.ztz
        self.log_c2 = math.log(prior.c2)
        self._gram = None
        self._gram_b = None

    def _whitened_gram(self, idx: np.ndarray):
        if self.dataset.p > GRAM_LIMIT:
            ws = self.w[:, idx]
            return ws.T @ ws, ws.T @ self.zw
        if self._gram is None:
            self._gram = self.w.T @ self.w
            self._gram_b = self.w.T @ self.zw
        return self._gram[np.ix_(idx, idx)], self._gram_b[idx]

    def _factor(self, idx: np.ndarray):
        """Cholesky of the posterior precision and prior log-determinant."""
        a, b = self._whitened_gram(idx)
        if self.prior.prior_form == "independence":
            vinv = a + np.eye(idx.size) / self.prior.c2
            log_det_v_prior = idx.size * self.log_c2
        else:
            xs = self.dataset.x[:, idx]
            gram = xs.T @ xs
            vinv = a + gram / self.prior.c2
            gram_chol = _chol_with_jitter(gram, idx)
            log_det_gram = 2.0 * float(np.sum(np.log(np.diag(gram_chol))))
            log_det_v_prior = idx.size * self.log_c2 - log_det_gram
        chol = _chol_with_jitter(vinv, idx)
        return chol, b, log_det_v_prior

    def log_marginal(self, idx: np.ndarray) -> float:
        """log N(z; 0, T lam + x_g v_g x_g') through the active-set route."""
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size == 0:
            return self.base
        chol, b, log_det_v_prior = self._factor(idx)
        half = np.linalg.solve(chol, b)              # L^{-1} b, so |half|^2 = b'Vb
        log_det_v_post = -2.0 * float(np.sum(np.log(np.diag(chol))))
        return (self.base + 0.5 * log_det_v_post - 0.5 * log_det_v_prior
                + 0.5 * float(half @ half))

    def posterior(self, idx: np.ndarray) -> PosteriorGaussian:
        """Conditional Gaussian of beta on the active set (empty if none)."""
        idx = np.asarray(idx, dtype=np.intp)
        if idx.size == 0:
            return PosteriorGaussian(idx, np.zeros(0), np.zeros((0, 0)), 0.0, 0.0)
        chol, b, _ = self._factor(idx)
        half = np.linalg.solve(chol, b)
        mean = np.linalg.solve(chol.T, half)
        v = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(idx.size)))
        v_chol = _chol_with_jitter(0.5 * (v + v.T), idx)
        log_det_v = -2.0 * float(np.sum(np.log(np.diag(chol))))
        return PosteriorGaussian(idx, mean, v_chol, log_det_v, float(half @ half))


def _as_index(gamma, p: int) -> np.ndarray:
    """Length-p 0/1 (or boolean) indicator -> ascending included indices.

    Index arrays are also accepted for convenience, recognized by not
    being a length-p vector of zeros and ones.
    """
    gamma = np.asarray(gamma)
    if gamma.dtype == bool or (gamma.ndim == 1 and gamma.size == p
                               and np.all((gamma == 0) | (gamma == 1))):
        return np.flatnonzero(gamma)
    return np.asarray(gamma, dtype=np.intp)


def compute_posterior_gaussian(dataset: Dataset, gamma, z: np.ndarray,
                               lambda_diag: np.ndarray, prior: PriorSpec,
                               temperature: float = 1.0) -> PosteriorGaussian:
    """Posterior N(B, V) of the active coefficients given (z, lambda).

    B = V x_g'(T lam)^{-1} z and V = (x_g'(T lam)^{-1} x_g + v_g^{-1})^{-1},
    computed through a positive-definite factorization of the active-set
    precision.  `gamma` may be a length-p indicator or an index array.
    """
    ctx = GammaConditional(dataset, prior, z, lambda_diag, temperature)
    return ctx.posterior(_as_index(gamma, dataset.p))


def log_marginal_z(dataset: Dataset, gamma, z: np.ndarray,
                   lambda_diag: np.ndarray, prior: PriorSpec,
                   temperature: float = 1.0) -> float:
    """log N(z; 0, T lam + x_g v_g x_g') with beta integrated out.

    Evaluated entirely in the log domain through p_gamma-sized
    factorizations; the n x n covariance is never formed.
    """
    ctx = GammaConditional(dataset, prior, z, lambda_diag, temperature)
    return ctx.log_marginal(_as_index(gamma, dataset.p))


def deviance(dataset: Dataset, beta_full: np.ndarray) -> float:
    """Model deviance -2 log p(y | x, beta) under +-1 response coding.

    Equals 2 sum_j log(1 + exp(-y~_j x_j'beta)) with y~ = 2y - 1; the
    log-of-exponential is evaluated stably for large margins.
    """
    beta_full = np.asarray(beta_full, dtype=float)
    if beta_full.shape != (dataset.p,):
        raise ConfigError("beta_full must have length p")
    if not np.all(np.isfinite(beta_full)):
        raise ConfigError("beta_full must be finite")
    margin = dataset.x @ beta_full
    return deviance_from_margin(dataset, margin)


def deviance_from_margin(dataset: Dataset, margin: np.ndarray) -> float:
    """Deviance from a precomputed linear predictor (avoids the p-dim dot)."""
    t = dataset.y_signed * np.asarray(margin, dtype=float)
    return 2.0 * float(np.sum(np.logaddexp(0.0, -t)))


def prior_c2_range(eigenvalues) -> tuple[float, float]:
    """Heuristic (low, high) range for c2 from covariance eigenvalues.

    Uses c(e, p) = (1 - p) / (p e) at prior-to-posterior precision ratios
    0.1 and 0.005, applied to the mean eigenvalue: (9 / ebar, 199 / ebar).
    """
    ev = np.atleast_1d(np.asarray(eigenvalues, dtype=float))
    if ev.size == 0:
        raise ConfigError("need at least one eigenvalue")
    if np.any(ev <= 0.0) or not np.all(np.isfinite(ev)):
        raise ConfigError("eigenvalues must be positive finite reals")
    ebar = float(ev.mean())
    return 9.0 / ebar, 199.0 / ebar


# ---------------------------------------------------------------------------
# CSV interchange: header row optional; the response column is named "y"
# (first column when no header is present), remaining columns are covariates.
# ---------------------------------------------------------------------------

def _looks_like_header(row: list[str]) -> bool:
    for cell in row:
        try:
            float(cell)
        except ValueError:
            return True
    return False


def load_dataset(path) -> Dataset:
    """Read a Dataset from CSV (UTF-8 decimal values)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ConfigError(f"{path}: empty dataset file")
    if _looks_like_header(rows[0]):
        header = [h.strip() for h in rows[0]]
        body = rows[1:]
        if "y" not in header:
            raise ConfigError(f"{path}: header present but no column named 'y'")
        y_col = header.index("y")
        labels = [h for j, h in enumerate(header) if j != y_col]
    else:
        body = rows
        y_col = 0
        labels = None
    values = np.array([[float(c) for c in row] for row in body])
    y = values[:, y_col]
    x = np.delete(values, y_col, axis=1)
    return Dataset(x, y, column_labels=labels)


def save_dataset(dataset: Dataset, path) -> None:
    """Write a Dataset to CSV with a header row and 17 significant digits."""
    labels = dataset.column_labels or [f"x{i}" for i in range(dataset.p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", *labels])
        for j in range(dataset.n):
            writer.writerow([int(dataset.y[j]),
                             *(f"{v:.17g}" for v in dataset.x[j])])
