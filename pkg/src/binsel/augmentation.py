"""Latent-layer samplers: truncated z, the mixing variances lambda, and beta.

The utilities z are drawn by inversion from their truncated logistic (or
truncated normal, probit link) conditionals with the mixing variances
integrated out.  Each lambda_jj is then an exact draw from its conditional

    p(lambda | z, beta, gamma) propto N(z; m, T lambda) * KS-mixture prior,

obtained by rejection from a GIG(0.5, 1, r^2/T) proposal realized as
r~ / InverseGaussian(1, r~), with acceptance decided by bracketing a
uniform between partial sums of the alternating series expansion of the
Kolmogorov-Smirnov density.  Partial sums use the right-tail series for
lambda > 4/3 and the theta-transformed left-tail series otherwise; both
have monotone terms on their interval, so the brackets are exact and no
fixed truncation is ever applied.

Tempering enters through the residual only: the tempered conditional of
lambda given residual r coincides exactly with the untempered conditional
at r^2 / T, so one rejection sampler serves every temperature.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

from .errors import ConfigError, RejectionCapError
from .model import Dataset, ModelState, PosteriorGaussian, PriorSpec

# Floor for exact-zero residuals: the GIG proposal is undefined at r = 0
# and the event has probability zero under the model.
RESIDUAL_FLOOR = 1e-8

# Total proposal budget per sample_lambda call; reaching it means a bug.
MAX_REJECTIONS = 10**6

# Series terms per candidate before giving up (the brackets close within a
# handful of terms; this cap only exists to turn a logic bug into an error).
MAX_SERIES_TERMS = 1000

_TINY = np.finfo(float).tiny


def _uniform_open(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniforms clamped away from 0 so inverse CDFs stay finite."""
    return np.maximum(rng.random(size), _TINY)


def sample_z(state: ModelState, dataset: Dataset, prior: PriorSpec,
             rng: np.random.Generator, temperature: float = 1.0) -> np.ndarray:
    """Draw the latent utilities from their truncated conditionals.

    Logistic link: z_j ~ Logistic(m_j, sqrt(T)) restricted to z_j > 0 when
    y_j = 1 and to z_j <= 0 otherwise, by inverse CDF on a uniform mapped
    into the truncation region.  Probit link: truncated N(m_j, T), inverted
    in log space through the complementary quantile so that arbitrarily
    deep tail truncations stay finite.
    """
    m = state.margin(dataset)
    pos = dataset.y == 1
    u = _uniform_open(rng, dataset.n)
    s = math.sqrt(temperature)
    if prior.link == "probit":
        return _truncated_normal(m, s, pos, u)
    return _truncated_logistic(m, s, pos, u)


def _truncated_logistic(m: np.ndarray, s: float, pos: np.ndarray,
                        u: np.ndarray) -> np.ndarray:
    # F(0) = sigmoid(-m/s); u is mapped onto [F(0), 1) above the cut and
    # onto (0, F(0)] below it.  q and 1-q are assembled from products of
    # sigmoids so neither side ever cancels to zero.
    t = m / s
    q0 = _sigmoid(-t)          # mass below the truncation point
    q0c = _sigmoid(t)          # mass above
    omu = np.maximum(1.0 - u, _TINY)
    log_q = np.empty_like(m)
    log_1mq = np.empty_like(m)
    # y = 1: 1 - q = (1 - u)(1 - q0)
    log_1mq[pos] = np.log(omu[pos]) + np.log(np.maximum(q0c[pos], _TINY))
    log_q[pos] = np.log1p(-np.minimum(omu[pos] * q0c[pos], 1.0 - 1e-16))
    # y = 0: q = u q0 and 1 - q = (1 - u) + u (1 - q0)
    neg = ~pos
    log_q[neg] = np.log(u[neg]) + np.log(np.maximum(q0[neg], _TINY))
    log_1mq[neg] = np.log(omu[neg] + u[neg] * q0c[neg])
    return m + s * (log_q - log_1mq)


def _truncated_normal(m: np.ndarray, s: float, pos: np.ndarray,
                      u: np.ndarray) -> np.ndarray:
    # Standardized truncation point: z > 0 iff xi > a with a = -m/s.
    a = -m / s
    xi = np.empty_like(m)
    log_u = np.log(u)
    xi[pos] = -ndtri_exp(log_u[pos] + log_ndtr(-a[pos]))
    neg = ~pos
    xi[neg] = ndtri_exp(log_u[neg] + log_ndtr(a[neg]))
    return m + s * xi


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    nonneg = t >= 0
    out[nonneg] = 1.0 / (1.0 + np.exp(-t[nonneg]))
    e = np.exp(t[~nonneg])
    out[~nonneg] = e / (1.0 + e)
    return out


def sample_lambda(residuals_squared: np.ndarray, rng: np.random.Generator,
                  temperature: float = 1.0) -> np.ndarray:
    """Exact draws of the mixing variances given squared residuals.

    Vectorized over observations: all still-pending entries propose in one
    batch per round and the series brackets advance jointly.
    """
    r2 = np.atleast_1d(np.asarray(residuals_squared, dtype=float))
    if np.any(r2 < 0.0) or not np.all(np.isfinite(r2)):
        raise ConfigError("squared residuals must be finite and nonnegative")
    r = np.maximum(np.sqrt(r2 / temperature), RESIDUAL_FLOOR)

    out = np.empty_like(r)
    pending = np.arange(r.size)
    proposals = 0
    while pending.size:
        proposals += pending.size
        if proposals > MAX_REJECTIONS:
            raise RejectionCapError(
                f"lambda rejection sampler exceeded {MAX_REJECTIONS} proposals")
        lam = _gig_half(r[pending], rng)
        u = _uniform_open(rng, pending.size)
        ok = _ks_accept(u, lam)
        out[pending[ok]] = lam[ok]
        pending = pending[~ok]
    return out


def _gig_half(r: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """GIG(0.5, 1, r^2) as r / InverseGaussian(mean 1, shape r)."""
    nu = rng.standard_normal(r.size) ** 2
    x1 = 1.0 + (nu - np.sqrt(nu * (4.0 * r + nu))) / (2.0 * r)
    x1 = np.maximum(x1, _TINY)
    u = rng.random(r.size)
    y = np.where(u <= 1.0 / (1.0 + x1), x1, 1.0 / x1)
    return r / y


def _ks_accept(u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Bracket u against exp(lam/2) * (KS-mixture density), elementwise."""
    accept = np.zeros(lam.shape, dtype=bool)
    right = lam > 4.0 / 3.0
    if np.any(right):
        accept[right] = _squeeze_right(u[right], lam[right])
    left = ~right
    if np.any(left):
        accept[left] = _squeeze_left(u[left], lam[left])
    return accept


def _squeeze_right(u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # alpha(lam) = 1 - 4 X^3 + 9 X^8 - 16 X^15 + ..., X = exp(-lam/2);
    # term magnitudes decrease for lam > (4/3) log 2, so odd partial sums
    # bound alpha from below and even ones from above.
    x = np.exp(-0.5 * lam)
    z = np.ones_like(lam)
    accept = np.zeros(lam.shape, dtype=bool)
    undecided = np.ones(lam.shape, dtype=bool)
    j = 0
    while np.any(undecided):
        j += 1
        if j > MAX_SERIES_TERMS:
            raise RejectionCapError("right-tail series bracket failed to close")
        coef = (j + 1) ** 2
        z[undecided] -= coef * x[undecided] ** (coef - 1)
        newly = undecided & (z > u)
        accept[newly] = True
        undecided &= ~newly
        j += 1
        coef = (j + 1) ** 2
        z[undecided] += coef * x[undecided] ** (coef - 1)
        undecided &= z > u          # upper bound at or below u: reject
    return accept


def _squeeze_left(u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # Theta-transformed series: alpha(lam) = e^H (1 - K + (9 - K) X^8 + ...)
    # with X = exp(-pi^2 / (2 lam)), K = lam / pi^2, and
    # H = log[sqrt(2) pi^(5/2) lam^(-5/2) e^(-pi^2/(2 lam)) e^(lam/2)].
    # The interleaved sequence 1, K, 9 X^8, K X^8, 25 X^24, ... has
    # decreasing magnitudes for lam <= 4/3, so the brackets are exact.
    pisq = math.pi ** 2
    h = (0.5 * math.log(2.0) + 2.5 * math.log(math.pi) - 2.5 * np.log(lam)
         - pisq / (2.0 * lam) + 0.5 * lam)
    log_u = np.log(u)
    x = np.exp(-pisq / (2.0 * lam))
    k = lam / pisq
    z = np.ones_like(lam)
    accept = np.zeros(lam.shape, dtype=bool)
    undecided = np.ones(lam.shape, dtype=bool)
    j = 0
    while np.any(undecided):
        j += 1
        if j > MAX_SERIES_TERMS:
            raise RejectionCapError("left-tail series bracket failed to close")
        z[undecided] -= k[undecided] * x[undecided] ** (j * j - 1)
        log_z = h + np.log(np.maximum(z, _TINY))
        newly = undecided & (z > 0) & (log_z > log_u)
        accept[newly] = True
        undecided &= ~newly
        j += 1
        coef = (j + 1) ** 2
        z[undecided] += coef * x[undecided] ** (coef - 1)
        log_z = h + np.log(np.maximum(z, _TINY))
        undecided &= (z > 0) & (log_z > log_u)   # upper bound <= u: reject
    return accept


def sample_beta(posterior: PosteriorGaussian, rng: np.random.Generator) -> np.ndarray:
    """One draw B + V_chol eps from the conditional coefficient Gaussian."""
    if posterior.dim == 0:
        return np.zeros(0)
    eps = rng.standard_normal(posterior.dim)
    return posterior.B + posterior.V_chol @ eps
