"""Command-line entry point: ``tomocg <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment, mle, mwe, qops, randgen, sampler
from .randgen import SeedSpec
from .sampler import Counts

MANIFEST = "manifest.json"


def _write_povm(out: Path, setup: randgen.MeasurementSetup, params: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    groups = [("well", setup.well), ("intended", setup.intended)]
    if params["mu"] > 0:
        groups.append(("actual_ill", setup.actual_ill))
    for role, ops in groups:
        for i, op in enumerate(ops):
            name = f"{role}_{i:03d}.txt"
            qops.write_operator(out / name, op)
            entries.append({"file": name, "role": role, "index": i})
    manifest = dict(params, scale=setup.scale, outcomes=entries)
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")


def load_setup(povm_dir) -> randgen.MeasurementSetup:
    """Rebuild a MeasurementSetup from a directory written by ``gen-povm``."""
    d = Path(povm_dir)
    manifest = json.loads((d / MANIFEST).read_text())
    roles: dict[str, list] = {"well": [], "intended": [], "actual_ill": []}
    for e in sorted(manifest["outcomes"], key=lambda e: (e["role"], e["index"])):
        roles[e["role"]].append(qops.read_operator(d / e["file"]))
    actual = roles["actual_ill"] or roles["intended"]
    return randgen.MeasurementSetup(
        dim=manifest["dim"],
        well=tuple(roles["well"]),
        intended=tuple(roles["intended"]),
        actual_ill=tuple(actual),
        scale=manifest.get("scale", 1.0),
        mu=manifest.get("mu", 0.0),
    )


def cmd_gen_povm(args) -> None:
    pom = randgen.random_rank1_pom(args.dim, args.m_total, SeedSpec(args.seed, (0,)))
    setup = randgen.perturb_pom(pom, args.m_well, args.mu, SeedSpec(args.seed, (1,)))
    params = {"dim": args.dim, "m_total": args.m_total, "m_well": args.m_well, "seed": args.seed, "mu": args.mu}
    _write_povm(Path(args.out), setup, params)


def cmd_simulate(args) -> None:
    setup = load_setup(args.povm)
    if args.state:
        rho = qops.density_matrix(qops.read_operator(args.state))
    else:
        rho = randgen.haar_pure_state(setup.dim, SeedSpec(args.haar_seed))
    rho = qops.admix(rho, args.gamma)
    counts = sampler.simulate_counts(rho, setup, args.n_copies, SeedSpec(args.seed))
    _emit(args.out, counts.to_csv())


def cmd_mwe(args) -> None:
    counts = Counts.read(args.counts)
    _emit(args.out, mwe.mwe_counts(counts, args.t_exponent).to_csv())


def cmd_estimate(args) -> None:
    setup = load_setup(args.povm)
    counts = Counts.read(args.counts)
    if (len(counts.well), len(counts.ill)) != (setup.m_well, setup.m_ill):
        raise ValueError("counts file does not match the outcome roles in the manifest")
    opts = mle.SolverOptions(tol=args.tol, max_iters=args.max_iters)
    if args.strategy == "1":
        res = mle.strategy1(counts, setup, opts)
    elif args.strategy == "2":
        res = mle.strategy2(counts, setup, opts)
    elif args.strategy == "3":
        res = mle.strategy3(counts, setup, args.t_exponent, opts)
    else:
        res = mle.reference_estimate(counts, setup, opts)
    _emit(args.out, qops.format_operator(res.rho_hat))
    print(
        f"iterations={res.iterations} residual={res.residual:.3e} "
        f"log_likelihood={res.log_likelihood!r} converged={res.converged}",
        file=sys.stderr if args.out in (None, "-") else sys.stdout,
    )


def cmd_run(args) -> None:
    cfg = experiment.CampaignConfig.from_text(Path(args.config).read_text()) if args.config else experiment.CampaignConfig()
    trials, summary = experiment.run_campaign(cfg, args.workers)
    out = Path(args.out)
    experiment.write_outputs(out, trials, summary)
    (out / "config.txt").write_text(cfg.to_text())
    _print_ranges(summary)


def cmd_summarize(args) -> None:
    trials = experiment.trials_from_csv(Path(args.trials).read_text())
    summary = experiment.summarize(trials)
    _emit(args.out, experiment.summary_to_csv(summary))
    _print_ranges(summary, file=sys.stderr if args.out in (None, "-") else sys.stdout)


def _print_ranges(summary, file=None) -> None:
    for gamma in sorted({r.gamma for r in summary}):
        rows = [r for r in summary if r.gamma == gamma]
        try:
            rng = experiment.performance_range(rows)
        except ValueError:
            rng = None
        text = "none" if rng is None else f"[{rng[0]:.3f}, {rng[1]:.3f}]"
        print(f"gamma={gamma:g} performance range: {text}", file=file or sys.stdout)


def _emit(dest, text: str) -> None:
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tomocg", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-povm", help="draw a random rank-one POM and write its outcomes")
    g.add_argument("--dim", type=int, default=4)
    g.add_argument("--m-total", type=int, default=16)
    g.add_argument("--m-well", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mu", type=float, default=0.0, help="noise level; >0 also writes actual_ill outcomes")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen_povm)

    s = sub.add_parser("simulate", help="simulate detection counts for a POM directory")
    s.add_argument("--povm", required=True, help="directory written by gen-povm")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--state", help="true state in operator text format")
    src.add_argument("--haar-seed", type=int, help="draw a Haar-random pure state instead")
    s.add_argument("--gamma", type=float, default=0.0, help="maximally-mixed admixture")
    s.add_argument("--n-copies", type=int, default=8000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="counts CSV (default: stdout)")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("mwe", help="replace ill-calibrated counts by their MWE re-estimates")
    m.add_argument("--counts", required=True)
    m.add_argument("--t-exponent", type=float, default=1.0)
    m.add_argument("--out", help="output CSV (default: stdout)")
    m.set_defaults(func=cmd_mwe)

    e = sub.add_parser("estimate", help="maximum-likelihood state estimate")
    e.add_argument("--povm", required=True)
    e.add_argument("--counts", required=True)
    e.add_argument("--strategy", choices=["1", "2", "3", "ref"], default="3")
    e.add_argument("--t-exponent", type=float, default=1.0)
    e.add_argument("--tol", type=float, default=1e-8)
    e.add_argument("--max-iters", type=int, default=100_000)
    e.add_argument("--out", help="estimate in operator text format (default: stdout)")
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("run", help="run a Monte Carlo campaign")
    r.add_argument("--config", help="key = value config file (defaults otherwise)")
    r.add_argument("--out", required=True, help="output directory for trials.csv and summary.csv")
    r.add_argument("--workers", type=int, help="process count (default: TOMOCG_THREADS or CPU count)")
    r.set_defaults(func=cmd_run)

    u = sub.add_parser("summarize", help="recompute summary.csv from trials.csv")
    u.add_argument("--trials", required=True)
    u.add_argument("--out", help="summary CSV (default: stdout)")
    u.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, KeyError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"tomocg {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
