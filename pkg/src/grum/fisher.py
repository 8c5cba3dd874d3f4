"""Observed and expected Fisher information via Louis' identity.

For one ranking ``pi`` with complete-data score ``s`` and latent utilities
``U``,

    J_pi = E[-grad^2 log P(pi, U) | pi] - E[s s^T | pi] + E[s | pi] E[s | pi]^T.

With normal noise the complete-data Hessian is constant,
``-sigma^2 G^T G`` with ``G = grad eta``, and the last two terms combine
to the conditional covariance of the score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gibbs import GibbsConfig, run_chains
from .mcem import ranked_design
from .model import free_vector, mean_jacobian, rank_by_utility
from .seeding import rng_for

PSD_FLOOR = 1e-8


@dataclass(frozen=True)
class InfoMatrix:
    """Symmetric information matrix over the free vector.

    ``se`` holds element-wise Monte-Carlo standard errors when they are
    available; ``eps_mc`` is the magnitude of the most negative eigenvalue
    (zero for a PSD estimate).
    """

    matrix: np.ndarray
    se: np.ndarray | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", 0.5 * (mat + mat.T))

    @property
    def d(self):
        return self.matrix.shape[0]

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    @property
    def eps_mc(self):
        if self.d == 0:
            return 0.0
        return float(max(0.0, -self.eigenvalues[0]))

    def repaired(self, floor=PSD_FLOOR):
        return psd_repair(self.matrix, floor)

    def __add__(self, other):
        other_mat = other.matrix if isinstance(other, InfoMatrix) else np.asarray(other)
        se = None
        if isinstance(other, InfoMatrix) and self.se is not None and other.se is not None:
            se = np.sqrt(self.se ** 2 + other.se ** 2)
        return InfoMatrix(self.matrix + other_mat, se)


def psd_repair(matrix, floor=PSD_FLOOR):
    """Clamp eigenvalues below ``floor * max eigenvalue`` up to that floor."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return matrix.copy()
    w, v = np.linalg.eigh(0.5 * (matrix + matrix.T))
    top = max(w[-1], 0.0)
    bound = floor * top if top > 0 else floor
    if w[0] >= bound:
        return 0.5 * (matrix + matrix.T)
    w = np.maximum(w, bound)
    out = (v * w) @ v.T
    return 0.5 * (out + out.T)


def louis_term(moments, grad_eta, noise):
    """Per-ranking observed information from one chain's moments."""
    complete = noise.variance * grad_eta.T @ grad_eta
    return complete - moments.score_cov


def observed_info_from_moments(moments, profile, noise):
    design = ranked_design(profile)
    total = np.zeros((design.shape[2],) * 2)
    for k, mo in enumerate(moments):
        total += louis_term(mo, design[k] / noise.variance, noise)
    return InfoMatrix(total)


def observed_info(profile, theta_hat, noise, gibbs_config=GibbsConfig(), prior=None):
    """Observed information ``J_D = sum_i J_pi_i`` at ``theta_hat``.

    Chains are seeded by ``(gibbs_config.seed, agent index)`` so the same
    agent always contributes the same term.  When ``prior`` is proper its
    precision ``lambda I`` is added.
    """
    design = ranked_design(profile)
    d = design.shape[2]
    terms = np.zeros((0, d, d))
    if profile.n_rankings:
        mu = design @ free_vector(theta_hat)
        labels = [("louis", a) for a in profile.ranked_agents.tolist()]
        moments = run_chains(profile.orders, mu, noise, design / noise.variance,
                             gibbs_config, labels)
        terms = np.array([louis_term(mo, design[k] / noise.variance, noise)
                          for k, mo in enumerate(moments)])
    total = terms.sum(axis=0)
    if prior is not None and prior.is_proper:
        total = total + prior.precision * np.eye(d)
    return InfoMatrix(total)


def _design_rows(design_x, theta_hat, alternatives):
    x = np.asarray(design_x, dtype=float).reshape(1, -1)
    A = mean_jacobian(x, alternatives.z)[0]
    return A, A @ free_vector(theta_hat)


def _expected_gibbs(A, mu, noise, n_sim, seed, gibbs_config, u, mc_error):
    orders = rank_by_utility(u)
    m, d = A.shape
    grad = np.broadcast_to(A / noise.variance, (n_sim, m, d))
    cfg = GibbsConfig(gibbs_config.n_samples, gibbs_config.burn_in, gibbs_config.thin, seed)
    moments = run_chains(orders, np.broadcast_to(mu, (n_sim, m)), noise, grad, cfg,
                         [("expected-info", k) for k in range(n_sim)])
    terms = np.array([louis_term(mo, A / noise.variance, noise) for mo in moments])
    se = terms.std(axis=0) / np.sqrt(n_sim) if mc_error else None
    return terms.mean(axis=0), se


def _expected_grouped(A, noise, u, mc_error):
    # Draws sharing a ranking are exact samples of U given that ranking, so
    # the pooled within-ranking covariance estimates E[Cov(U | pi)].
    n_sim, m = u.shape
    orders = rank_by_utility(u)
    codes = orders @ (m ** np.arange(m - 1, -1, -1))
    _, inverse, counts = np.unique(codes, return_inverse=True, return_counts=True)
    dof = n_sim - counts.size
    if dof < 1:
        raise ValueError(
            f"{n_sim} simulated rankings fall into {counts.size} distinct rankings; "
            "increase n_sim or use method='gibbs'"
        )
    means = np.stack([np.bincount(inverse, u[:, j], counts.size) for j in range(m)], axis=1)
    resid = u - (means / counts[:, None])[inverse]
    proj = resid @ A
    var = noise.variance
    info = A.T @ A / var - (proj.T @ proj) / dof / var ** 2
    se = None
    if mc_error:
        contrib = np.einsum("nd,ne->nde", proj, proj) * (n_sim / dof)
        se = contrib.std(axis=0) / np.sqrt(n_sim) / var ** 2
    return info, se


def resolve_method(method, m):
    if method == "auto":
        return "grouped" if m <= 6 else "gibbs"
    if method not in ("gibbs", "grouped"):
        raise ValueError(f"unknown information method {method!r}")
    return method


def expected_info(design_x, theta_hat, alternatives, noise, n_sim=200, seed=0,
                  method="gibbs", gibbs_config=GibbsConfig(), mc_error=True):
    """Expected information of one full ranking from an agent with attributes ``design_x``.

    Rankings are simulated at ``theta_hat`` and their Louis information is
    averaged.  ``method="gibbs"`` runs a chain for every simulated ranking;
    ``method="grouped"`` reuses the simulated utilities themselves, grouped
    by the ranking they induce, which is exact but needs ``n_sim`` well
    above ``m!``.  ``"auto"`` picks ``grouped`` for ``m <= 6``.  Element-wise
    standard errors are attached unless ``mc_error`` is false.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be at least 1")
    A, mu = _design_rows(design_x, theta_hat, alternatives)
    method = resolve_method(method, alternatives.m)
    rng = rng_for(seed, "expected-info", "rankings")
    u = mu + noise.sigma * rng.standard_normal((n_sim, mu.size))
    if method == "gibbs":
        info, se = _expected_gibbs(A, mu, noise, n_sim, seed, gibbs_config, u, mc_error)
    else:
        info, se = _expected_grouped(A, noise, u, mc_error)
    return InfoMatrix(info, se)
