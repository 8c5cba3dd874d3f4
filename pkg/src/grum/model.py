"""Domain types and the generative process of a general random utility model.

Agent ``i`` perceives alternative ``j`` with utility

    u_ij = delta_j + x_i B z_j^T + eps_ij

and reports the alternatives sorted by decreasing utility.  The intrinsic
utilities ``delta`` are normalized with ``delta[0] = 0``; the remaining
``m - 1`` entries and the row-major entries of ``B`` make up the *free
vector* of length ``d = (m - 1) + K * L``, which fixes the coordinate order
of every gradient, Hessian and information matrix in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError
from .seeding import rng_for


def _as_matrix(values, name, ncols=None):
    arr = np.array(values, dtype=float)
    if arr.ndim == 1 and ncols == 0:
        arr = arr.reshape(-1, 0)
    if arr.ndim != 2:
        raise DataValidationError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataValidationError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AlternativeSet:
    """Attributes ``z`` (m x L) of the alternatives."""

    z: np.ndarray

    def __post_init__(self):
        z = _as_matrix(self.z, "alternative attributes")
        if z.shape[0] < 2:
            raise DataValidationError(f"need at least two alternatives, got {z.shape[0]}")
        object.__setattr__(self, "z", z)

    @classmethod
    def plain(cls, m):
        """``m`` alternatives without attributes (L = 0)."""
        return cls(np.zeros((m, 0)))

    @property
    def m(self):
        return self.z.shape[0]

    @property
    def L(self):
        return self.z.shape[1]

    def __eq__(self, other):
        if not isinstance(other, AlternativeSet):
            return NotImplemented
        return self.z.shape == other.z.shape and np.array_equal(self.z, other.z)

    __hash__ = None


@dataclass(frozen=True)
class AgentPool:
    """Attributes ``x`` (n x K) of the agents."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_matrix(self.x, "agent attributes"))

    @classmethod
    def plain(cls, n):
        return cls(np.zeros((n, 0)))

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def K(self):
        return self.x.shape[1]

    def __eq__(self, other):
        if not isinstance(other, AgentPool):
            return NotImplemented
        return self.x.shape == other.x.shape and np.array_equal(self.x, other.x)

    __hash__ = None


@dataclass(frozen=True)
class Parameters:
    """Intrinsic utilities ``delta`` (length m, ``delta[0] == 0``) and interaction ``b`` (K x L)."""

    delta: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float)
        if b.ndim != 2:
            raise DataValidationError(f"interaction matrix must be 2-D, got shape {b.shape}")
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(b))):
            raise DataValidationError("parameters contain non-finite entries")
        if delta.size == 0 or delta[0] != 0.0:
            raise DataValidationError("delta[0] must be exactly 0 (use Parameters.normalized)")
        delta.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "b", b)

    @classmethod
    def normalized(cls, delta, b):
        """Build parameters after shifting ``delta`` so that ``delta[0] = 0``."""
        delta = np.asarray(delta, dtype=float).reshape(-1)
        return cls(delta - delta[0], b)

    @classmethod
    def zeros(cls, m, K=0, L=0):
        return cls(np.zeros(m), np.zeros((K, L)))

    @property
    def m(self):
        return self.delta.size

    @property
    def K(self):
        return self.b.shape[0]

    @property
    def L(self):
        return self.b.shape[1]

    @property
    def d(self):
        return free_dimension(self.m, self.K, self.L)

    def __eq__(self, other):
        if not isinstance(other, Parameters):
            return NotImplemented
        return (
            self.b.shape == other.b.shape
            and np.array_equal(self.delta, other.delta)
            and np.array_equal(self.b, other.b)
        )

    __hash__ = None


@dataclass(frozen=True)
class NoiseModel:
    """Distribution of the perceived-utility noise ``eps_ij``.

    Only the normal location family ships.  In exponential-family form it has
    natural parameter ``eta = mu / sigma**2``, log-partition
    ``A(eta) = sigma**2 eta**2 / 2`` and sufficient statistic ``T(u) = u``.
    """

    sigma: float = 1.0
    family: str = "normal"

    def __post_init__(self):
        if self.family != "normal":
            raise ValueError(f"unsupported noise family {self.family!r}; only 'normal' is implemented")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"noise sigma must be positive and finite, got {self.sigma}")

    @property
    def variance(self):
        return float(self.sigma) ** 2

    def natural_parameter(self, mu):
        return np.asarray(mu) / self.variance

    def grad_eta(self, grad_mu):
        """Gradient of the natural parameter given the gradient of the mean."""
        return np.asarray(grad_mu) / self.variance


def validate_ranking(order, m):
    """Return ``order`` as a tuple of ints after checking it is a permutation of ``range(m)``."""
    order = tuple(int(j) for j in order)
    if len(order) != m or sorted(order) != list(range(m)):
        raise DataValidationError(f"ranking {order} is not a permutation of 0..{m - 1}")
    return order


@dataclass(frozen=True)
class Profile:
    """Alternatives, agents and at most one full ranking per agent.

    ``rankings`` is a tuple of ``(agent_index, order)`` pairs where ``order``
    lists alternative indices best-first.
    """

    alternatives: AlternativeSet
    agents: AgentPool
    rankings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        m, n = self.alternatives.m, self.agents.n
        seen = set()
        cleaned = []
        for agent, order in self.rankings:
            agent = int(agent)
            if not 0 <= agent < n:
                raise DataValidationError(f"agent index {agent} out of range 0..{n - 1}")
            if agent in seen:
                raise DataValidationError(f"agent {agent} has more than one ranking")
            seen.add(agent)
            cleaned.append((agent, validate_ranking(order, m)))
        object.__setattr__(self, "rankings", tuple(cleaned))

    @property
    def m(self):
        return self.alternatives.m

    @property
    def n_rankings(self):
        return len(self.rankings)

    @property
    def ranked_agents(self):
        return np.array([a for a, _ in self.rankings], dtype=np.int64)

    @property
    def orders(self):
        """Rankings as an int array of shape (n_rankings, m)."""
        if not self.rankings:
            return np.zeros((0, self.m), dtype=np.int64)
        return np.array([o for _, o in self.rankings], dtype=np.int64)

    def ranking_of(self, agent):
        for a, order in self.rankings:
            if a == agent:
                return order
        raise KeyError(agent)

    def restricted_to(self, agents):
        """Profile keeping only the rankings of ``agents`` (in the given order)."""
        lookup = dict(self.rankings)
        return Profile(self.alternatives, self.agents, tuple((a, lookup[a]) for a in agents))

    def concatenated(self, other):
        """Union of the rankings of two profiles over the same agents and alternatives."""
        return Profile(self.alternatives, self.agents, self.rankings + other.rankings)


@dataclass(frozen=True)
class Prior:
    """Isotropic prior on the free vector: flat, or gaussian with precision ``precision``."""

    kind: str = "flat"
    precision: float = 0.0

    def __post_init__(self):
        if self.kind not in ("flat", "gaussian"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if not (np.isfinite(self.precision) and self.precision >= 0):
            raise ValueError("prior precision must be a nonnegative number")
        if (self.kind == "flat") != (self.precision == 0):
            raise ValueError("a flat prior has precision 0 and a gaussian prior positive precision")

    @classmethod
    def flat(cls):
        return cls("flat", 0.0)

    @classmethod
    def gaussian(cls, precision):
        return cls("gaussian", float(precision))

    @property
    def is_proper(self):
        return self.kind == "gaussian"


def free_dimension(m, K=0, L=0):
    return (m - 1) + K * L


def free_vector(params):
    """Flatten parameters into ``(delta[1:], B row-major)``."""
    return np.concatenate([params.delta[1:], params.b.reshape(-1)])


def embed_vector(theta, m, K=0, L=0):
    """Inverse of :func:`free_vector`; ``delta[0]`` is set to 0."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != free_dimension(m, K, L):
        raise DataValidationError(
            f"free vector has length {theta.size}, expected {free_dimension(m, K, L)}"
        )
    if not np.all(np.isfinite(theta)):
        raise DataValidationError("free vector contains non-finite entries")
    delta = np.concatenate([[0.0], theta[: m - 1]])
    return Parameters(delta, theta[m - 1:].reshape(K, L))


def _check_dims(alternatives, agents, params=None):
    if params is None:
        return
    if params.m != alternatives.m:
        raise DataValidationError(f"parameters have m={params.m}, alternatives m={alternatives.m}")
    if params.K != agents.K or params.L != alternatives.L:
        raise DataValidationError(
            f"interaction matrix is {params.K}x{params.L}, attributes give "
            f"{agents.K}x{alternatives.L}"
        )


def mean_jacobian(x, z):
    """Jacobian of the mean utilities with respect to the free vector.

    ``x`` has shape (n, K) and ``z`` shape (m, L).  Returns an array ``A`` of
    shape (n, m, d) with ``mu[i, j] = A[i, j] @ theta``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    n, K = x.shape
    m, L = z.shape
    A = np.zeros((n, m, free_dimension(m, K, L)))
    A[:, 1:, : m - 1] = np.eye(m - 1)
    if K and L:
        A[:, :, m - 1:] = np.einsum("ik,jl->ijkl", x, z).reshape(n, m, K * L)
    return A


def mean_utilities(params, alternatives, agents):
    """Deterministic part ``mu_ij = delta_j + x_i B z_j^T`` as an (n, m) matrix."""
    _check_dims(alternatives, agents, params)
    return params.delta[None, :] + agents.x @ params.b @ alternatives.z.T


def rank_by_utility(u):
    """Sort alternatives by decreasing utility, ties broken by lower index."""
    u = np.asarray(u)
    return np.argsort(-u, axis=-1, kind="stable")


def sample_profile(params, alternatives, agents, noise, seed):
    """Draw one full ranking per agent from the generative model."""
    mu = mean_utilities(params, alternatives, agents)
    rng = rng_for(seed, "rankings")
    u = mu + noise.sigma * rng.standard_normal(mu.shape)
    orders = rank_by_utility(u)
    return Profile(alternatives, agents, tuple((i, tuple(orders[i])) for i in range(agents.n)))


def log_prior(theta, prior):
    """Log prior density (up to a constant) with its gradient and Hessian."""
    theta = np.asarray(theta, dtype=float)
    d = theta.size
    lam = prior.precision
    return -0.5 * lam * float(theta @ theta), -lam * theta, -lam * np.eye(d)
