"""Repeated elicitation experiments and their results files."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elicitation import CRITERIA, Criterion, ElicitationConfig, run_elicitation
from .errors import DataValidationError
from .evaluation import diagnose
from .gibbs import GibbsConfig
from .io import fmt, load_profile, read_parameters, write_csv
from .mcem import FitConfig
from .model import NoiseModel, Prior
from .synthetic import SyntheticSpec, generate_synthetic, with_seed

RESULT_COLUMNS = ("seed", "criterion", "round", "queried_agent", "kendall_social",
                  "kendall_personal_mean", "criterion_value", "logpost_estimate")
DIAGNOSTIC_COLUMNS = ("seed", "condition1_ok", "witness_c1", "witness_c2", "identifiable",
                      "design_rank", "d")
RESULTS_FILE = "results.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"


@dataclass(frozen=True)
class FileSource:
    """Profile read from CSV files; ``truth`` is optional."""

    rankings: str
    agents: str
    alternatives: str
    truth: str | None = None
    noise_sd: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a data source, the criteria to compare and the repeats.

    With a :class:`SyntheticSpec` source, each repeat seed regenerates the
    dataset (``spec.seed`` is replaced) and also seeds the elicitation.  With
    a :class:`FileSource` the data are fixed and only the elicitation seed
    varies.  Repeat seeds are ``seed, seed + 1, ..., seed + repeats - 1``.
    """

    source: SyntheticSpec | FileSource = field(default_factory=SyntheticSpec)
    criteria: tuple = ("random",)
    rounds: int = 0
    initial_count: int = 5
    seed: int = 0
    repeats: int = 1
    prior_precision: float = 1.0
    fit: FitConfig = field(default_factory=lambda: FitConfig(max_iters=10))
    info_method: str = "auto"
    n_sim: int | None = None
    louis_gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    info_gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    # "social": personal_cv runs score candidates with the social criterion;
    # "sample": average the per-agent criterion over the whole agent pool
    personal_mode: str = "social"

    def __post_init__(self):
        if not self.criteria:
            raise DataValidationError("at least one criterion is required")
        for c in self.criteria:
            if c not in CRITERIA:
                raise DataValidationError(f"unknown criterion {c!r}; choose from {', '.join(CRITERIA)}")
        if self.repeats < 1:
            raise DataValidationError("repeats must be at least 1")
        if self.rounds < 0 or self.initial_count < 1:
            raise DataValidationError("rounds must be >= 0 and initial_count >= 1")
        if isinstance(self.source, SyntheticSpec) and self.rounds > self.source.n - self.initial_count:
            raise DataValidationError(
                f"rounds {self.rounds} exceeds n - initial_count = "
                f"{self.source.n - self.initial_count}"
            )
        if self.personal_mode not in ("social", "sample"):
            raise DataValidationError("personal_mode must be 'social' or 'sample'")
        if self.prior_precision < 0:
            raise DataValidationError("prior_precision must be nonnegative")

    @property
    def seeds(self):
        return list(range(self.seed, self.seed + self.repeats))

    @property
    def prior(self):
        return Prior.gaussian(self.prior_precision) if self.prior_precision > 0 else Prior.flat()

    def elicitation_config(self):
        return ElicitationConfig(self.rounds, self.initial_count, self.info_method, self.n_sim,
                                 louis_gibbs=self.louis_gibbs, info_gibbs=self.info_gibbs)


def _dataset(config, seed):
    src = config.source
    if isinstance(src, SyntheticSpec):
        data = generate_synthetic(with_seed(src, seed))
        return data.profile, data.truth, data.noise
    profile = load_profile(src.rankings, src.agents, src.alternatives)
    if config.rounds + config.initial_count > profile.n_rankings:
        raise DataValidationError(
            f"{config.initial_count} initial + {config.rounds} rounds exceeds "
            f"{profile.n_rankings} rankings"
        )
    truth, noise_sd = (None, None)
    if src.truth is not None:
        truth, noise_sd = read_parameters(src.truth, profile.agents.K, profile.alternatives.L)
        if truth.m != profile.m:
            raise DataValidationError(f"truth has {truth.m} alternatives, data have {profile.m}",
                                      path=src.truth)
    return profile, truth, NoiseModel(noise_sd if noise_sd is not None else src.noise_sd)


def _criterion(kind, profile, personal_mode):
    if kind == "personal_cv":
        if personal_mode == "social":
            return Criterion("social_cv")
        return Criterion(kind, target_sample=profile.agents.x)
    return Criterion(kind)


def experiment_rows(config):
    """Run every (seed, criterion) pair; returns result and diagnostic rows."""
    results, diagnostics = [], []
    for seed in config.seeds:
        profile, truth, noise = _dataset(config, seed)
        report = diagnose(profile)
        c1, c2 = report.witness_partition if report.witness_partition else ((), ())
        diagnostics.append([seed, int(report.condition1_ok), " ".join(map(str, c1)),
                            " ".join(map(str, c2)), int(report.identifiable),
                            report.design_rank, report.d])
        for kind in config.criteria:
            trace = run_elicitation(profile, _criterion(kind, profile, config.personal_mode),
                                    config.elicitation_config(), config.fit, config.prior,
                                    noise, truth, seed)
            for rec in trace.rounds:
                results.append([seed, kind, rec.round, rec.queried_agent, rec.kendall_social,
                                rec.kendall_personal_mean, rec.criterion_value, rec.logpost])
    return results, diagnostics


def _cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, float) and np.isnan(value):
        return "nan"
    return fmt(value)


def run_experiment(config, out_dir):
    """Run the experiment and write ``results.csv`` and ``diagnostics.csv``.

    Returns the result rows (lists in :data:`RESULT_COLUMNS` order).
    """
    out_dir = Path(out_dir)
    results, diagnostics = experiment_rows(config)
    write_csv(out_dir / RESULTS_FILE, RESULT_COLUMNS, ([_cell(v) for v in row] for row in results))
    write_csv(out_dir / DIAGNOSTICS_FILE, DIAGNOSTIC_COLUMNS,
              ([_cell(v) for v in row] for row in diagnostics))
    return results
