"""Adaptive preference elicitation.

Each round fits the MAP on the rankings collected so far, approximates the
posterior by a normal with precision ``R`` (observed information), scores
every not-yet-queried agent by a design criterion evaluated on
``R + I_h`` and queries the best one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SingularDesignError
from .evaluation import kendall_tau, social_ranking
from .fisher import InfoMatrix, expected_info, observed_info, psd_repair, resolve_method
from .gibbs import GibbsConfig
from .mcem import FitConfig, fit_map
from .model import NoiseModel, Prior, free_vector, mean_jacobian, mean_utilities, rank_by_utility
from .seeding import derive_seed, rng_for

CRITERIA = ("random", "d_optimality", "e_optimality", "social_cv", "personal_cv")


@dataclass(frozen=True)
class Criterion:
    """A design criterion; ``personal_cv`` needs ``target_x`` or ``target_sample``."""

    kind: str
    target_x: np.ndarray | None = None
    target_sample: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in CRITERIA:
            raise ValueError(f"unknown criterion {self.kind!r}; choose from {', '.join(CRITERIA)}")
        if self.kind == "personal_cv" and self.target_x is None and self.target_sample is None:
            raise ValueError("personal_cv needs target_x or target_sample")

    @property
    def needs_information(self):
        return self.kind != "random"

    def targets(self):
        if self.target_sample is not None:
            return np.atleast_2d(np.asarray(self.target_sample, dtype=float))
        return np.asarray(self.target_x, dtype=float).reshape(1, -1)


def _as_matrix(info):
    return info.matrix if isinstance(info, InfoMatrix) else np.asarray(info, dtype=float)


def min_pairwise_cv(means, rows, cov):
    """``min_{j1 != j2} |mean_j1 - mean_j2| / std`` for linear functionals ``rows @ theta``.

    ``means`` has shape (..., m) and ``rows`` shape (..., m, d); leading
    axes are batch axes.
    """
    means = np.asarray(means, dtype=float)
    rows = np.asarray(rows, dtype=float)
    m = means.shape[-1]
    j1, j2 = np.triu_indices(m, k=1)
    gap = np.abs(means[..., j1] - means[..., j2])
    diff = rows[..., j1, :] - rows[..., j2, :]
    var = np.einsum("...pd,de,...pe->...p", diff, cov, diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(var > 0, gap / np.sqrt(np.maximum(var, 0.0)), np.inf)
    return ratio.min(axis=-1)


def criterion_value(criterion, theta_hat, r, i_h, alternatives=None, rng=None):
    """Score of a design whose posterior precision would be ``R + I_h``."""
    if criterion.kind == "random":
        if rng is None:
            raise ValueError("the random criterion needs a generator")
        return float(rng.random())
    raw = _as_matrix(r) + _as_matrix(i_h)
    d = raw.shape[0]
    if d and np.linalg.eigvalsh(0.5 * (raw + raw.T))[-1] <= 0:
        raise SingularDesignError(0, d)
    precision = psd_repair(raw)
    if criterion.kind == "d_optimality":
        sign, logdet = np.linalg.slogdet(precision)
        if sign <= 0:
            raise SingularDesignError(int(np.linalg.matrix_rank(precision)), d)
        return float(logdet)
    if criterion.kind == "e_optimality":
        return float(np.linalg.eigvalsh(precision)[0])
    cov = np.linalg.inv(precision)
    cov = 0.5 * (cov + cov.T)
    theta = free_vector(theta_hat)
    if criterion.kind == "social_cv":
        m = theta_hat.m
        rows = np.zeros((m, d))
        rows[1:, : m - 1] = np.eye(m - 1)
        return float(min_pairwise_cv(theta_hat.delta, rows, cov))
    if alternatives is None:
        raise ValueError("personal_cv needs the alternatives")
    rows = mean_jacobian(criterion.targets(), alternatives.z)
    return float(np.mean(min_pairwise_cv(rows @ theta, rows, cov)))


def select_design(pool, theta_hat, r, criterion, info_provider, seed=0, alternatives=None):
    """Pick the pool member maximizing the criterion.

    ``pool`` is a sequence of ``(agent_index, x)``; ``info_provider(agent, x)``
    returns the expected information of querying that agent.  Ties go to the
    lowest agent index.  Returns ``(agent_index, value)``.
    """
    if len(pool) == 0:
        raise ValueError("the design pool is empty")
    pool = sorted(pool, key=lambda item: item[0])
    rng = rng_for(seed, "random-criterion") if criterion.kind == "random" else None
    best, best_value = None, -np.inf
    for agent, x in pool:
        i_h = info_provider(agent, x) if criterion.needs_information else 0.0
        value = criterion_value(criterion, theta_hat, r, i_h, alternatives, rng)
        if best is None or value > best_value:
            best, best_value = agent, value
    return int(best), float(best_value)


@dataclass(frozen=True)
class ElicitationConfig:
    rounds: int
    initial_count: int = 5
    info_method: str = "auto"
    # simulated rankings per candidate; None picks 200 for gibbs, 4000 for grouped
    n_sim: int | None = None
    include_prior_in_r: bool = True
    warm_start: bool = True
    louis_gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    info_gibbs: GibbsConfig = field(default_factory=GibbsConfig)

    def __post_init__(self):
        if self.rounds < 0 or self.initial_count < 1:
            raise ValueError("rounds must be >= 0 and initial_count >= 1")

    def sims_for(self, m):
        if self.n_sim is not None:
            return self.n_sim
        return 4000 if resolve_method(self.info_method, m) == "grouped" else 200


@dataclass(frozen=True)
class RoundRecord:
    round: int
    queried_agent: int | None
    criterion_value: float
    theta_hat: object
    kendall_social: float
    kendall_personal_mean: float
    logpost: float


@dataclass
class ElicitationTrace:
    criterion: str
    seed: int
    initial_agents: tuple
    config: ElicitationConfig
    rounds: list = field(default_factory=list)

    @property
    def queried(self):
        return list(self.initial_agents) + [r.queried_agent for r in self.rounds[1:]]


def ranking_metrics(theta_hat, profile, truth=None):
    """Social and mean personalized Kendall correlation of an estimate.

    With ground truth, references are the true social ranking and each
    agent's true mean-utility ranking; otherwise there is no social
    reference and each agent's recorded ranking is used.
    """
    agents = profile.agents
    est = rank_by_utility(mean_utilities(theta_hat, profile.alternatives, agents))
    if truth is not None:
        social = kendall_tau(social_ranking(theta_hat), social_ranking(truth))
        ref = rank_by_utility(mean_utilities(truth, profile.alternatives, agents))
        personal = np.mean([kendall_tau(est[i], ref[i]) for i in range(agents.n)])
    else:
        social = float("nan")
        if profile.n_rankings == 0:
            return social, float("nan")
        personal = np.mean([kendall_tau(est[a], order) for a, order in profile.rankings])
    return float(social), float(personal)


def run_elicitation(full_profile, criterion, config, fit_config=FitConfig(),
                    prior=Prior.gaussian(1.0), noise=NoiseModel(), truth=None, seed=0):
    """Replay adaptive elicitation against a profile whose rankings act as the respondents."""
    if isinstance(criterion, str):
        criterion = Criterion(criterion)
    available = full_profile.ranked_agents
    if config.initial_count + config.rounds > available.size:
        raise ValueError(
            f"{config.initial_count} initial + {config.rounds} rounds exceeds "
            f"{available.size} ranked agents"
        )
    alternatives = full_profile.alternatives
    x = full_profile.agents.x
    init_rng = rng_for(seed, "initial-set")
    initial = tuple(sorted(int(a) for a in init_rng.choice(available, config.initial_count,
                                                           replace=False)))
    queried = list(initial)
    pool = [int(a) for a in available if a not in set(queried)]
    trace = ElicitationTrace(criterion.kind, seed, initial, config)
    method = resolve_method(config.info_method, alternatives.m)
    n_sim = config.sims_for(alternatives.m)

    def fit(t, start):
        cfg = replace(fit_config, seed=derive_seed(seed, "fit", t))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return fit_map(full_profile.restricted_to(queried), prior, noise, cfg,
                           start=start if config.warm_start else None)

    def record(t, agent, value, result):
        social, personal = ranking_metrics(result.theta_hat, full_profile, truth)
        logpost = result.trace[-1].logpost if result.trace else float("nan")
        trace.rounds.append(RoundRecord(t, agent, value, result.theta_hat, social, personal,
                                        logpost))

    result = fit(0, None)
    record(0, None, float("nan"), result)
    for t in range(1, config.rounds + 1):
        theta_hat = result.theta_hat
        r = 0.0
        if criterion.needs_information:
            louis_cfg = replace(config.louis_gibbs, seed=derive_seed(seed, "louis", t))
            r = observed_info(full_profile.restricted_to(queried), theta_hat, noise, louis_cfg,
                              prior if config.include_prior_in_r else None)

        def provider(agent, xa, _t=t, _theta=theta_hat):
            return expected_info(xa, _theta, alternatives, noise, n_sim,
                                 seed=derive_seed(seed, "expected-info", _t, agent),
                                 method=method, gibbs_config=config.info_gibbs,
                                 mc_error=False)

        agent, value = select_design([(a, x[a]) for a in pool], theta_hat, r, criterion,
                                     provider, seed=derive_seed(seed, "select", t),
                                     alternatives=alternatives)
        pool.remove(agent)
        queried.append(agent)
        result = fit(t, theta_hat)
        record(t, agent, value, result)
    return trace
