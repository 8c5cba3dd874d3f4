"""Command-line interface: ``grum generate | fit | elicit | info | eval``.

Every subcommand accepts ``--seed``, ``--config`` and ``--out``.  A config
file holds ``key = value`` lines whose keys are the long flag names of the
subcommand (dashes or underscores); explicit flags override it.

Exit codes: 0 success, 1 usage, 2 data validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .elicitation import CRITERIA, ranking_metrics
from .errors import DataValidationError, NumericalFailure
from .experiment import FileSource, ExperimentConfig, run_experiment
from .fisher import expected_info, observed_info
from .gibbs import GibbsConfig
from .mcem import FitConfig, fit_map
from .model import AgentPool, AlternativeSet, NoiseModel, Prior, free_vector
from .seeding import rng_for
from .synthetic import PRESETS, generate_from_truth, generate_synthetic, preset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_list(text):
    return [s.strip() for s in str(text).split(",") if s.strip()]


def _common(p, out_default):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--config", default=None, help="flat key = value file of flag defaults")
    p.add_argument("--out", default=out_default, help=f"output directory (default {out_default})")


def _data_flags(p):
    p.add_argument("--data", default=None,
                   help="directory holding agents.csv, alternatives.csv and rankings.csv")
    p.add_argument("--rankings", default=None)
    p.add_argument("--agents", default=None)
    p.add_argument("--alternatives", default=None)
    p.add_argument("--noise-sd", type=float, default=None,
                   help="noise standard deviation (default: truth/theta file, else 1)")


def _gibbs_flags(p):
    p.add_argument("--samples", type=int, default=200, help="retained Gibbs samples per chain")
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--thin", type=int, default=1)


def build_parser():
    parser = _Parser(prog="grum", description="MAP inference and preference elicitation "
                     "for random utility models with agent and alternative attributes.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("generate", help="write a synthetic dataset and its ground truth")
    _common(p, "data")
    p.add_argument("--preset", choices=sorted(PRESETS), default="dataset1")
    p.add_argument("--n", type=int, default=100, help="number of agents")
    p.add_argument("--m", type=int, default=5, help="number of alternatives")
    p.add_argument("--K", type=int, default=2, help="agent attributes")
    p.add_argument("--L", type=int, default=2, help="alternative attributes")
    p.add_argument("--noise-sd", type=float, default=None, help="override the preset noise")
    p.add_argument("--from-truth", default=None,
                   help="parameter file to use as ground truth instead of drawing one")
    p.add_argument("--agents", default=None, help="with --from-truth: reuse these agents")
    p.add_argument("--alternatives", default=None,
                   help="with --from-truth: reuse these alternatives")

    p = sub.add_parser("fit", help="MAP estimate from ranking files")
    _common(p, "fit")
    _data_flags(p)
    p.add_argument("--prior-precision", type=float, default=0.0,
                   help="gaussian prior precision; 0 gives maximum likelihood")
    p.add_argument("--iters", type=int, default=30, help="EM iterations")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--logpost-draws", type=int, default=100)
    _gibbs_flags(p)

    p = sub.add_parser("elicit", help="replay adaptive elicitation and write results.csv")
    _common(p, "results")
    p.add_argument("--criteria", "--criterion", default="random",
                   help=f"comma-separated subset of {', '.join(CRITERIA)}")
    p.add_argument("--rounds", type=int, default=40)
    p.add_argument("--initial-count", type=int, default=5)
    p.add_argument("--repeats", type=int, default=1, help="seeds seed, seed+1, ...")
    p.add_argument("--preset", choices=sorted(PRESETS), default="dataset2")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--L", type=int, default=2)
    _data_flags(p)
    p.add_argument("--truth", default=None, help="ground truth for file data")
    p.add_argument("--prior-precision", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=10, help="EM iterations per refit")
    p.add_argument("--info-method", choices=("auto", "gibbs", "grouped"), default="auto")
    p.add_argument("--n-sim", type=int, default=None)
    _gibbs_flags(p)
    p.add_argument("--personal-mode", choices=("social", "sample"), default="social",
                   help="personal_cv runs: score with the social criterion, or average the "
                        "per-agent criterion over the agent pool")
    p.add_argument("--figures", action="store_true", help="also write learning-curve PNGs")

    p = sub.add_parser("info", help="observed and expected information matrices")
    _common(p, "info")
    _data_flags(p)
    p.add_argument("--theta", default=None, help="parameter file (e.g. from fit), required")
    p.add_argument("--prior-precision", type=float, default=0.0)
    p.add_argument("--query-agents", default="",
                   help="comma-separated agent ids whose expected information is written")
    p.add_argument("--info-method", choices=("auto", "gibbs", "grouped"), default="auto")
    p.add_argument("--n-sim", type=int, default=None)
    _gibbs_flags(p)

    p = sub.add_parser("eval", help="Kendall correlations of a fit against ground truth")
    _common(p, "eval")
    _data_flags(p)
    p.add_argument("--theta", default=None, help="fitted parameter file, required")
    p.add_argument("--truth", default=None, help="ground-truth parameter file, required")
    return parser, sub.choices


def _apply_config(parser, subparsers, argv):
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    values = io.read_config(args.config)
    sub = subparsers[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in values.items():
        if key not in actions:
            raise UsageError(f"{args.config}: unknown key {key!r} for '{args.command}'")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"{args.config}: {key} expects true or false")
            defaults[key] = raw.lower() in ("true", "1", "yes")
        else:
            try:
                defaults[key] = action.type(raw) if action.type else raw
            except ValueError:
                raise UsageError(f"{args.config}: bad value {raw!r} for {key}") from None
            if action.choices and defaults[key] not in action.choices:
                raise UsageError(f"{args.config}: {key} must be one of {sorted(action.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _require(args, *flags):
    for flag in flags:
        if getattr(args, flag) is None:
            raise UsageError(f"--{flag} is required")


def _profile_paths(args):
    base = Path(args.data) if args.data else None

    def pick(flag, name):
        value = getattr(args, flag)
        if value is not None:
            return value
        if base is None:
            raise UsageError(f"give --data or --{flag}")
        return base / name

    return (pick("rankings", io.RANKINGS_FILE), pick("agents", io.AGENTS_FILE),
            pick("alternatives", io.ALTERNATIVES_FILE))


def _has_files(args):
    return any(getattr(args, f) is not None for f in ("data", "rankings", "agents", "alternatives"))


def _gibbs(args):
    return GibbsConfig(args.samples, args.burn_in, args.thin, seed=args.seed)


def _read_theta(path, profile):
    theta, noise_sd = io.read_parameters(path, profile.agents.K, profile.alternatives.L)
    if theta.m != profile.m:
        raise DataValidationError(f"{theta.m} alternatives in parameters, {profile.m} in data",
                                  path=path)
    return theta, noise_sd


def _noise(args, file_sd=None):
    if args.noise_sd is not None:
        return NoiseModel(args.noise_sd)
    return NoiseModel(file_sd if file_sd is not None else 1.0)


def _prior(precision):
    return Prior.gaussian(precision) if precision > 0 else Prior.flat()


def cmd_generate(args):
    out = Path(args.out)
    if args.from_truth is None:
        overrides = dict(n=args.n, m=args.m, K=args.K, L=args.L, seed=args.seed)
        if args.noise_sd is not None:
            overrides["noise_sd"] = args.noise_sd
        data = generate_synthetic(preset(args.preset, **overrides))
    else:
        truth, file_sd = io.read_parameters(args.from_truth)
        noise = _noise(args, file_sd)
        if args.alternatives is not None:
            _, z = io.read_attributes(args.alternatives, "alt_id", "z")
            alternatives = AlternativeSet(z)
        else:
            z = rng_for(args.seed, "alternatives").normal(0.0, 1.0, (truth.m, truth.L))
            alternatives = AlternativeSet(z)
        if args.agents is not None:
            _, x = io.read_attributes(args.agents, "agent_id", "x")
            agents = AgentPool(x)
        else:
            agents = AgentPool(rng_for(args.seed, "agents").normal(0.0, 1.0, (args.n, truth.K)))
        if alternatives.m != truth.m or alternatives.L != truth.L or agents.K != truth.K:
            raise DataValidationError("attribute files do not match the truth dimensions",
                                      path=args.from_truth)
        data = generate_from_truth(truth, alternatives, agents, noise, args.seed)
    io.write_profile(data.profile, out)
    io.write_parameters(data.truth, out / io.TRUTH_FILE, data.noise.sigma)
    print(f"wrote {data.profile.agents.n} agents, {data.profile.m} alternatives to {out}")


def _write_diagnostics(path, report):
    c1, c2 = report.witness_partition if report.witness_partition else ((), ())
    io.write_csv(path, ["condition1_ok", "witness_c1", "witness_c2", "identifiable",
                        "design_rank", "d"],
                 [[int(report.condition1_ok), " ".join(map(str, c1)), " ".join(map(str, c2)),
                   int(report.identifiable), report.design_rank, report.d]])


def cmd_fit(args):
    profile = io.load_profile(*_profile_paths(args))
    noise = _noise(args)
    cfg = FitConfig(max_iters=args.iters, gibbs=_gibbs(args), tol=args.tol, seed=args.seed,
                    logpost_draws=args.logpost_draws)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        result = fit_map(profile, _prior(args.prior_precision), noise, cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    io.write_parameters(result.theta_hat, out / "theta.csv", noise.sigma)
    names = io.parameter_names(profile.m, profile.agents.K, profile.alternatives.L)
    io.write_csv(out / "fit_trace.csv",
                 ["iteration", "q_before", "q_after", "logpost_estimate", "logpost_se"] + names,
                 ([rec.iteration] + [io.fmt(v) for v in (rec.q_before, rec.q_after, rec.logpost,
                                                         rec.logpost_se)]
                  + [io.fmt(v) for v in rec.theta] for rec in result.trace))
    _write_diagnostics(out / "diagnostics.csv", result.diagnostics)
    print(f"iterations {len(result.trace)} converged {result.converged}")
    print(f"logpost_estimate {result.trace[-1].logpost:.6g}")


def cmd_elicit(args):
    criteria = tuple(_csv_list(args.criteria))
    unknown = [c for c in criteria if c not in CRITERIA]
    if unknown or not criteria:
        raise UsageError(f"--criteria must list some of {', '.join(CRITERIA)}")
    gibbs = _gibbs(args)
    fit = FitConfig(max_iters=args.iters, gibbs=gibbs, seed=args.seed)
    if _has_files(args):
        r, a, c = _profile_paths(args)
        source = FileSource(str(r), str(a), str(c), args.truth,
                            args.noise_sd if args.noise_sd is not None else 1.0)
    else:
        overrides = dict(n=args.n, m=args.m, K=args.K, L=args.L)
        if args.noise_sd is not None:
            overrides["noise_sd"] = args.noise_sd
        source = preset(args.preset, **overrides)
    config = ExperimentConfig(source, criteria, args.rounds, args.initial_count, args.seed,
                              args.repeats, args.prior_precision, fit, args.info_method,
                              args.n_sim, gibbs, gibbs, args.personal_mode)
    out = Path(args.out)
    run_experiment(config, out)
    print(f"wrote {out / 'results.csv'} and {out / 'diagnostics.csv'}")
    if args.figures:
        from .plotting import plot_learning_curves

        with open(out / "results.csv", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        for path in plot_learning_curves(rows, out, args.initial_count):
            print(f"wrote {path}")


def cmd_info(args):
    _require(args, "theta")
    profile = io.load_profile(*_profile_paths(args))
    theta, file_sd = _read_theta(args.theta, profile)
    noise = _noise(args, file_sd)
    gibbs = _gibbs(args)
    names = io.parameter_names(profile.m, profile.agents.K, profile.alternatives.L)
    out = Path(args.out)
    prior = _prior(args.prior_precision)
    obs = observed_info(profile, theta, noise, gibbs, prior if prior.is_proper else None)
    io.write_matrix(out / "observed_info.csv", obs.matrix, names)
    print(f"observed information: min eigenvalue {obs.eigenvalues[0]:.6g}")
    ids = io.agent_ids(profile.agents.n)
    for ident in _csv_list(args.query_agents):
        if ident not in ids:
            raise DataValidationError(f"unknown agent id {ident!r}")
        agent = ids.index(ident)
        n_sim = args.n_sim
        if n_sim is None:
            n_sim = 4000 if args.info_method != "gibbs" and profile.m <= 6 else 200
        info = expected_info(profile.agents.x[agent], theta, profile.alternatives, noise, n_sim,
                             seed=args.seed, method=args.info_method, gibbs_config=gibbs)
        io.write_matrix(out / f"expected_info_{ident}.csv", info.matrix, names)
        print(f"expected information for {ident}: logdet "
              f"{np.linalg.slogdet(info.repaired())[1]:.6g}")


def cmd_eval(args):
    _require(args, "theta", "truth")
    profile = io.load_profile(*_profile_paths(args))
    theta, _ = _read_theta(args.theta, profile)
    truth, _ = _read_theta(args.truth, profile)
    social, personal = ranking_metrics(theta, profile, truth)
    dist = float(np.max(np.abs(free_vector(theta) - free_vector(truth)))) if theta.d else 0.0
    io.write_csv(Path(args.out) / "eval.csv",
                 ["kendall_social", "kendall_personal_mean", "max_abs_param_error"],
                 [[io.fmt(social), io.fmt(personal), io.fmt(dist)]])
    print(f"kendall_social {social:.6f}")
    print(f"kendall_personal_mean {personal:.6f}")


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "elicit": cmd_elicit, "info": cmd_info,
            "eval": cmd_eval}


def main(argv=None):
    parser, subparsers = build_parser()
    try:
        args = _apply_config(parser, subparsers, argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
