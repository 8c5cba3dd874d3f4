"""Synthetic GRUM datasets with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import DataValidationError
from .model import AgentPool, AlternativeSet, NoiseModel, Parameters, sample_profile
from .seeding import rng_for


@dataclass(frozen=True)
class SyntheticSpec:
    """Sizes and scales of a synthetic dataset.

    Intrinsic utilities are ``delta_scale * Normal(delta_mean, delta_sd)``;
    ``B``, agent and alternative attributes are entry-wise centred normals
    with the given standard deviations.
    """

    n: int = 100
    m: int = 5
    K: int = 2
    L: int = 2
    delta_scale: float = 1.0
    delta_mean: float = 1.0
    delta_sd: float = 1.0
    b_sd: float = 1.0
    x_sd: float = 1.0
    z_sd: float = 1.0
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 2 or self.K < 0 or self.L < 0:
            raise DataValidationError(
                f"invalid sizes n={self.n}, m={self.m}, K={self.K}, L={self.L}"
            )
        for name in ("delta_sd", "b_sd", "x_sd", "z_sd"):
            if getattr(self, name) < 0:
                raise DataValidationError(f"{name} must be nonnegative")
        if not self.noise_sd > 0:
            raise DataValidationError("noise_sd must be positive")


PRESETS = {
    # weak social component, unit noise variance
    "dataset1": {"delta_scale": 0.1, "delta_mean": 1.0, "delta_sd": 1.0, "noise_sd": 1.0},
    # strong social component, noise variance 1/4
    "dataset2": {"delta_scale": 1.0, "delta_mean": 1.0, "delta_sd": 1.0, "noise_sd": 0.5},
}


def preset(name, **overrides):
    """A :class:`SyntheticSpec` for a named preset with optional overrides."""
    try:
        base = PRESETS[name]
    except KeyError:
        raise DataValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    known = {f.name for f in fields(SyntheticSpec)}
    extra = set(overrides) - known
    if extra:
        raise DataValidationError(f"unknown spec fields {sorted(extra)}")
    return SyntheticSpec(**{**base, **overrides})


@dataclass(frozen=True)
class SyntheticData:
    profile: object
    truth: Parameters
    noise: NoiseModel
    spec: SyntheticSpec | None = None


def generate_synthetic(spec):
    """Draw ground truth and one ranking per agent according to ``spec``."""
    seed = spec.seed
    delta = spec.delta_scale * rng_for(seed, "delta").normal(spec.delta_mean, spec.delta_sd, spec.m)
    b = rng_for(seed, "interaction").normal(0.0, spec.b_sd, (spec.K, spec.L))
    x = rng_for(seed, "agents").normal(0.0, spec.x_sd, (spec.n, spec.K))
    z = rng_for(seed, "alternatives").normal(0.0, spec.z_sd, (spec.m, spec.L))
    truth = Parameters.normalized(delta, b)
    noise = NoiseModel(spec.noise_sd)
    alternatives, agents = AlternativeSet(z), AgentPool(x)
    profile = sample_profile(truth, alternatives, agents, noise, seed)
    return SyntheticData(profile, truth, noise, spec)


def generate_from_truth(truth, alternatives, agents, noise, seed):
    """Rankings for given attributes under fixed parameters (e.g. an earlier fit)."""
    return SyntheticData(sample_profile(truth, alternatives, agents, noise, seed), truth, noise)


def with_seed(spec, seed):
    return replace(spec, seed=seed)
