"""Gibbs sampling of latent utilities under a ranking constraint.

Given a ranking ``pi`` and mean utilities ``mu``, the posterior of the
perceived utilities is a product of normals restricted to the cone
``u[pi[0]] > u[pi[1]] > ... > u[pi[m-1]]``.  A single-site Gibbs sweep
visits the positions in ranking order; each full conditional is a normal
truncated to the interval between the utilities of its two neighbours.

The sweep itself runs in a numba kernel.  Each chain owns a
``numpy.random.Generator`` so that results do not depend on the order in
which chains are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .seeding import rng_for

# Intervals further than this many standard deviations into a tail are
# sampled by rejection from a shifted exponential instead of inverse-CDF.
TAIL_THRESHOLD = 4.0

_SQRT1_2 = 1.0 / math.sqrt(2.0)


@numba.njit(cache=True)
def _ndtri(p):
    # Wichura, Algorithm AS241 (PPND16); relative accuracy about 1e-16.
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@numba.njit(cache=True)
def _norm_sf(x):
    return 0.5 * math.erfc(x * _SQRT1_2)


@numba.njit(cache=True)
def _open_uniform(rng):
    v = rng.random()
    while v == 0.0:
        v = rng.random()
    return v


@numba.njit(cache=True)
def _upper_tail(a, b, rng):
    # Standard normal on (a, b) with a > 0 far in the tail: exponential proposal
    # with rate alpha truncated to (a, b), accepted w.p. exp(-(x - alpha)^2 / 2).
    alpha = 0.5 * (a + math.sqrt(a * a + 4.0))
    span = -math.expm1(-alpha * (b - a)) if b < np.inf else 1.0
    while True:
        x = a - math.log1p(-_open_uniform(rng) * span) / alpha
        if x >= b:
            continue
        if rng.random() <= math.exp(-0.5 * (x - alpha) * (x - alpha)):
            return x


@numba.njit(cache=True)
def _std_trunc(a, b, rng):
    """One draw of a standard normal restricted to ``(a, b)``."""
    if a > TAIL_THRESHOLD:
        return _upper_tail(a, b, rng)
    if b < -TAIL_THRESHOLD:
        return -_upper_tail(-b, -a, rng)
    v = _open_uniform(rng)
    if a >= 0.0:
        # Upper half: invert the survival function to keep precision.
        qa = _norm_sf(a)
        qb = _norm_sf(b)
        x = -_ndtri(qa - v * (qa - qb))
    else:
        pa = _norm_sf(-a)
        pb = _norm_sf(-b)
        x = _ndtri(pa + v * (pb - pa))
    if x < a:
        x = a
    elif x > b:
        x = b
    return x


@numba.njit(cache=True)
def _trunc_many(mean, sd, lower, upper, size, rng):
    out = np.empty(size)
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    for i in range(size):
        v = mean + sd * _std_trunc(a, b, rng)
        if v <= lower:
            v = np.nextafter(lower, np.inf)
        elif v >= upper:
            v = np.nextafter(upper, -np.inf)
        out[i] = v
    return out


@numba.njit(cache=True)
def _chain(order, mu, sigma, burn_in, n_samples, thin, rng, mean_out, m2_out, trace_out):
    m = order.size
    u = np.empty(m)
    ranked_mu = np.sort(mu)[::-1]
    for k in range(m):
        u[order[k]] = ranked_mu[k] + sigma * (m - 1 - k)
    mean_out[:] = 0.0
    m2_out[:, :] = 0.0
    record = trace_out.shape[0] > 0
    kept = 0
    delta = np.empty(m)
    total = burn_in + n_samples * thin
    for sweep in range(total):
        for k in range(m):
            j = order[k]
            upper = u[order[k - 1]] if k > 0 else np.inf
            lower = u[order[k + 1]] if k < m - 1 else -np.inf
            v = mu[j] + sigma * _std_trunc((lower - mu[j]) / sigma, (upper - mu[j]) / sigma, rng)
            if v <= lower:
                v = np.nextafter(lower, np.inf)
            elif v >= upper:
                v = np.nextafter(upper, -np.inf)
            u[j] = v
        if sweep >= burn_in and (sweep - burn_in) % thin == 0:
            if record:
                trace_out[kept, :] = u
            kept += 1
            # Welford update of mean and co-moment matrix.
            for j in range(m):
                delta[j] = u[j] - mean_out[j]
                mean_out[j] += delta[j] / kept
            for j in range(m):
                for l in range(m):
                    m2_out[j, l] += delta[j] * (u[l] - mean_out[l])
    return kept


@dataclass(frozen=True)
class GibbsConfig:
    """Length of a chain: ``burn_in`` discarded sweeps, then ``n_samples`` kept every ``thin``."""

    n_samples: int = 200
    burn_in: int = 50
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValueError(
                f"invalid Gibbs config: n_samples={self.n_samples}, burn_in={self.burn_in}, "
                f"thin={self.thin}"
            )


@dataclass(frozen=True)
class AgentMoments:
    """Monte-Carlo moments of one agent's latent utilities given the ranking.

    ``s`` estimates ``E[u | pi]`` (the conditional means that enter the
    M-step), ``u_cov`` the conditional covariance.  ``mean_score`` and
    ``mean_score_outer`` are the conditional first and second moments of the
    complete-data score ``sum_j grad_eta_j (u_j - mu_j)``.
    """

    s: np.ndarray
    u_cov: np.ndarray
    mean_score: np.ndarray
    mean_score_outer: np.ndarray
    n_samples: int

    @property
    def score_cov(self):
        return self.mean_score_outer - np.outer(self.mean_score, self.mean_score)


def sample_truncated_normal(mean, sd, lower, upper, rng, size=None):
    """Draw from ``Normal(mean, sd**2)`` restricted to the open interval ``(lower, upper)``.

    Returns a float, or an array when ``size`` is given.
    """
    if not sd > 0:
        raise ValueError(f"sd must be positive, got {sd}")
    if not lower < upper:
        raise ValueError(f"empty interval: lower={lower} >= upper={upper}")
    out = _trunc_many(float(mean), float(sd), float(lower), float(upper),
                      1 if size is None else int(size), rng)
    return float(out[0]) if size is None else out


def score_moments(s, u_cov, mu_row, grad_eta):
    """Moments of the complete-data score from the utility moments.

    With ``G = grad_eta`` (m x d) the score is ``G^T (u - mu)``.
    """
    centred = s - mu_row
    mean_score = grad_eta.T @ centred
    second = u_cov + np.outer(centred, centred)
    outer = grad_eta.T @ second @ grad_eta
    return mean_score, 0.5 * (outer + outer.T)


def _run(order, mu_row, sigma, config, rng, trace):
    m = order.size
    mean = np.empty(m)
    m2 = np.empty((m, m))
    kept = _chain(order, mu_row, float(sigma), config.burn_in, config.n_samples, config.thin,
                  rng, mean, m2, trace)
    cov = m2 / kept
    return mean, 0.5 * (cov + cov.T), kept


def run_chain(ranking, mu_row, noise, grad_eta, config=GibbsConfig(), rng=None):
    """Run one chain and summarize it as :class:`AgentMoments`.

    ``grad_eta`` is the (m x d) gradient of the natural parameters of this
    agent with respect to the free vector.  When ``rng`` is omitted the chain
    uses a generator derived from ``config.seed``.
    """
    order = np.asarray(ranking, dtype=np.int64)
    mu_row = np.asarray(mu_row, dtype=float)
    grad_eta = np.asarray(grad_eta, dtype=float).reshape(order.size, -1)
    if sorted(order.tolist()) != list(range(mu_row.size)):
        raise ValueError(f"ranking {tuple(order)} does not match {mu_row.size} means")
    if rng is None:
        rng = rng_for(config.seed, "chain")
    s, cov, kept = _run(order, mu_row, noise.sigma, config, rng, np.empty((0, order.size)))
    mean_score, outer = score_moments(s, cov, mu_row, grad_eta)
    return AgentMoments(s, cov, mean_score, outer, kept)


def sample_chain(ranking, mu_row, noise, config=GibbsConfig(), rng=None):
    """Retained utility vectors of one chain, shape (n_samples, m)."""
    order = np.asarray(ranking, dtype=np.int64)
    mu_row = np.asarray(mu_row, dtype=float)
    if rng is None:
        rng = rng_for(config.seed, "chain")
    trace = np.empty((config.n_samples, order.size))
    _run(order, mu_row, noise.sigma, config, rng, trace)
    return trace


def run_chains(orders, mu, noise, grad_eta, config, labels):
    """Run one independent chain per row of ``orders``.

    ``labels[c]`` is the tuple of role labels that, together with
    ``config.seed``, seeds chain ``c``.
    """
    orders = np.asarray(orders, dtype=np.int64)
    out = []
    for c in range(orders.shape[0]):
        rng = rng_for(config.seed, *labels[c])
        s, cov, kept = _run(orders[c], mu[c], noise.sigma, config, rng,
                            np.empty((0, orders.shape[1])))
        mean_score, outer = score_moments(s, cov, mu[c], grad_eta[c])
        out.append(AgentMoments(s, cov, mean_score, outer, kept))
    return out
