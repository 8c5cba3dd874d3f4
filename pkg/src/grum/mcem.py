"""MAP estimation by Monte-Carlo EM.

E-step: Gibbs chains estimate ``S_ij = E[u_ij | pi_i, theta_t]`` for every
ranked agent.  M-step: Newton steps on the surrogate

    Q(theta) = sum_ij eta_ij S_ij - A(eta_ij) + log prior(theta),

which, for normal noise, is a concave quadratic in the free vector, so a
single undamped step lands on its maximizer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtri_exp

from .errors import (ConditionOneError, DataValidationError, NotIdentifiableError,
                     SingularDesignError)
from .evaluation import DiagnosticsReport, diagnose
from .gibbs import AgentMoments, GibbsConfig, run_chains
from .model import NoiseModel, Prior, embed_vector, free_vector, log_prior, mean_jacobian
from .seeding import rng_for

SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 30
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    newton_steps: int = 1
    newton_damping: float = 1.0
    tol: float = 1e-3
    seed: int = 0
    # GHK draws per agent for the log-posterior monitor; 0 turns it off.
    logpost_draws: int = 100

    def __post_init__(self):
        if self.max_iters < 1 or self.newton_steps < 1:
            raise ValueError("max_iters and newton_steps must be at least 1")
        if not 0 < self.newton_damping <= 1:
            raise ValueError("newton_damping must lie in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    theta: np.ndarray
    q_before: float
    q_after: float
    logpost: float
    logpost_se: float


@dataclass(frozen=True)
class FitResult:
    theta_hat: object
    trace: tuple
    moments: list
    diagnostics: DiagnosticsReport
    start_logpost: float = float("nan")
    start_logpost_se: float = float("nan")
    converged: bool = False

    @property
    def theta(self):
        return free_vector(self.theta_hat)


def ranked_design(profile):
    """Mean-utility Jacobian restricted to the ranked agents, shape (n, m, d)."""
    x = profile.agents.x[profile.ranked_agents]
    return mean_jacobian(x, profile.alternatives.z)


def _moments_at(profile, design, theta, noise, gibbs, labels):
    if profile.n_rankings == 0:
        return []
    mu = design @ theta
    return run_chains(profile.orders, mu, noise, design / noise.variance, gibbs, labels)


def e_step(profile, params, noise, gibbs_config=GibbsConfig(), iteration=0):
    """Conditional utility moments of every ranked agent at ``params``."""
    design = ranked_design(profile)
    labels = [("e-step", iteration, a) for a in profile.ranked_agents.tolist()]
    return _moments_at(profile, design, free_vector(params), noise, gibbs_config, labels)


class Surrogate:
    """The EM surrogate with the Monte-Carlo moments held fixed.

    Rankings do not change when every utility moves by the same constant
    ``c``, so the complete-data model is expanded with such a shift and
    ``c`` is maximized out (it carries no prior).  What remains is

        Q(theta) = const + theta @ linear - theta @ quad @ theta / 2 + log prior.

    Without attributes and under a flat prior the maximizer is
    ``delta_j = mean_i S_ij - mean_i S_i0``.
    """

    def __init__(self, s, design, noise, prior):
        s = np.asarray(s, dtype=float)
        d = design.shape[2]
        self.prior = prior
        self.const = 0.0
        if s.size == 0:
            self.linear = np.zeros(d)
            self.quad = np.zeros((d, d))
            return
        var = noise.variance
        linear = np.einsum("ijd,ij->d", design, s) / var
        quad = np.einsum("ijd,ije->de", design, design) / var
        # cross terms with the shift c, whose design column is all ones
        lin_c = s.sum() / var
        cross = design.sum(axis=(0, 1)) / var
        cc = s.size / var
        self.linear = linear - lin_c * cross / cc
        self.quad = quad - np.outer(cross, cross) / cc
        self.const = 0.5 * lin_c ** 2 / cc

    @classmethod
    def from_moments(cls, moments, profile, noise, prior):
        s = np.array([mo.s for mo in moments]).reshape(len(moments), profile.m)
        return cls(s, ranked_design(profile), noise, prior)

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        lp, _, _ = log_prior(theta, self.prior)
        return float(self.const + theta @ self.linear - 0.5 * theta @ self.quad @ theta + lp)

    def gradient(self, theta):
        _, g, _ = log_prior(theta, self.prior)
        return self.linear - self.quad @ theta + g

    def hessian(self, theta=None):
        d = self.quad.shape[0]
        return -self.quad - self.prior.precision * np.eye(d)

    def newton(self, theta, steps=1, damping=1.0):
        neg_h = -self.hessian()
        eig = np.linalg.eigvalsh(neg_h)
        scale = max(eig[-1], 1.0) if eig.size else 1.0
        if eig.size and eig[0] <= SINGULAR_TOL * scale:
            raise SingularDesignError(int(np.sum(eig > SINGULAR_TOL * scale)), eig.size)
        theta = np.array(theta, dtype=float)
        for _ in range(steps):
            theta = theta + damping * np.linalg.solve(neg_h, self.gradient(theta))
        return theta


def surrogate_q(theta, moments, profile, noise, prior=Prior.flat()):
    """Value of the surrogate at ``theta`` for frozen moments (additive constant dropped)."""
    return Surrogate.from_moments(moments, profile, noise, prior).value(theta)


def m_step(moments, params_t, profile, noise, prior=Prior.flat(), config=FitConfig()):
    """Newton update of the parameters from frozen E-step moments."""
    sur = Surrogate.from_moments(moments, profile, noise, prior)
    theta = sur.newton(free_vector(params_t), config.newton_steps, config.newton_damping)
    return embed_vector(theta, profile.m, profile.agents.K, profile.alternatives.L)


def estimate_log_likelihood(profile, params, noise, n_draws=100, seed=0):
    """GHK estimate of ``sum_i log Pr(pi_i | theta)`` and its standard error.

    Utilities are drawn position by position down the ranking, each from a
    normal truncated above by the previous draw; the product of the
    truncation masses is an unbiased estimate of the ranking probability.
    """
    if profile.n_rankings == 0:
        return 0.0, 0.0
    design = ranked_design(profile)
    mu = design @ free_vector(params)
    orders = profile.orders
    mu_o = np.take_along_axis(mu, orders, axis=1)
    n, m = mu_o.shape
    sigma = noise.sigma
    rng = rng_for(seed, "ghk")
    prev = mu_o[:, :1] + sigma * rng.standard_normal((n, n_draws))
    logw = np.zeros((n, n_draws))
    for k in range(1, m):
        b = (prev - mu_o[:, k:k + 1]) / sigma
        lb = log_ndtr(b)
        logw += lb
        v = 1.0 - rng.random((n, n_draws))
        x = np.minimum(ndtri_exp(lb + np.log(v)), b)
        prev = mu_o[:, k:k + 1] + sigma * x
    per_agent = logsumexp(logw, axis=1) - np.log(n_draws)
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    rel_se = w.std(axis=1) / (w.mean(axis=1) * np.sqrt(n_draws))
    return float(per_agent.sum()), float(np.sqrt(np.sum(rel_se ** 2)))


def estimate_log_posterior(profile, params, noise, prior, n_draws=100, seed=0):
    ll, se = estimate_log_likelihood(profile, params, noise, n_draws, seed)
    lp, _, _ = log_prior(free_vector(params), prior)
    return ll + lp, se


def check_well_posed(profile, prior):
    """Run the diagnostics; raise under a flat prior, warn under a proper one."""
    report = diagnose(profile)
    if not report.condition1_ok:
        if not prior.is_proper:
            raise ConditionOneError(report.witness_partition)
        warnings.warn(
            f"Condition 1 fails (witness {report.witness_partition}); estimate relies on the prior",
            RuntimeWarning, stacklevel=3,
        )
    if not report.identifiable:
        if not prior.is_proper:
            raise NotIdentifiableError(report.design_rank, report.d)
        warnings.warn(
            f"design rank {report.design_rank} < {report.d}; estimate relies on the prior",
            RuntimeWarning, stacklevel=3,
        )
    return report


def fit_map(profile, prior=Prior.flat(), noise=NoiseModel(), config=FitConfig(), start=None):
    """MAP estimate of the parameters by Monte-Carlo EM.

    Args:
        profile: observed rankings.
        prior: flat (maximum likelihood) or isotropic gaussian.
        noise: utility noise model.
        config: iteration limits, chain lengths and seeds.
        start: optional starting :class:`Parameters`; defaults to all zeros.

    Returns:
        FitResult with the estimate, one record per iteration and the
        moments of the last E-step.
    """
    if profile.n_rankings == 0:
        raise DataValidationError("cannot fit a profile without rankings")
    report = check_well_posed(profile, prior)
    m, K, L = profile.m, profile.agents.K, profile.alternatives.L
    design = ranked_design(profile)
    theta = np.zeros(design.shape[2]) if start is None else free_vector(start)
    agents = profile.ranked_agents.tolist()

    def monitor(th):
        if config.logpost_draws <= 0:
            return float("nan"), float("nan")
        return estimate_log_posterior(profile, embed_vector(th, m, K, L), noise, prior,
                                      config.logpost_draws, seed=config.seed)

    start_lp, start_se = monitor(theta)
    trace = []
    moments = []
    converged = False
    for t in range(config.max_iters):
        gibbs = GibbsConfig(config.gibbs.n_samples, config.gibbs.burn_in, config.gibbs.thin,
                            seed=config.seed)
        moments = _moments_at(profile, design, theta, noise, gibbs,
                              [("e-step", t, a) for a in agents])
        sur = Surrogate(np.array([mo.s for mo in moments]), design, noise, prior)
        new = sur.newton(theta, config.newton_steps, config.newton_damping)
        lp, se = monitor(new)
        trace.append(IterationRecord(t, new, sur.value(theta), sur.value(new), lp, se))
        change = float(np.max(np.abs(new - theta))) if new.size else 0.0
        theta = new
        if change < config.tol:
            converged = True
            break
    return FitResult(embed_vector(theta, m, K, L), tuple(trace), moments, report,
                     start_lp, start_se, converged)
