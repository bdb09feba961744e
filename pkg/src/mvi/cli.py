"""Command-line entry point ``mvi``.

Exit codes: 0 success, 1 validation error or failed bound, 2 usage error,
3 numerical breakdown.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, certify, chain, complexity, generators, oracle, solvers
from .bellman import greedy
from .errors import MviError, NumericalError, ValidationError
from .mdp import Policy, load, policy_count, save

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
ALGS = ("vi", "alg1", "alg2", "alg3", "baseline")


def _read_mdp(path):
    return load(Path(path).read_bytes())


def _read_policy(path):
    return Policy.from_dict(json.loads(Path(path).read_text()))


def _emit(data, out=None):
    text = json.dumps(data, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_validate(args):
    mdp = _read_mdp(args.mdp)
    print(f"ok: {mdp.name or args.mdp}: {mdp.n_states} states, {mdp.n_pairs} state-action pairs")
    return EXIT_OK


def cmd_analyze(args):
    mdp = _read_mdp(args.mdp)
    if args.policy:
        _emit({"chain": chain.analyze(mdp, _read_policy(args.policy)).to_dict()})
        return EXIT_OK
    reference = _read_policy(args.reference) if args.reference else None
    gt = oracle.ground_truth(mdp, reference=reference)
    feasible = policy_count(mdp) <= args.cap
    report = complexity.complexity_report(mdp, gt.rho_star, enumerate_all=feasible, cap=args.cap)
    _emit({"ground_truth": gt.to_dict(), "complexity": report.to_dict()})
    return EXIT_OK


def cmd_solve(args):
    mdp = _read_mdp(args.mdp)
    n = args.n
    zero = np.zeros(mdp.n_states)
    if args.alg == "vi":
        report = solvers.picard(solvers.bellman_operator(mdp), zero, n)
        report.output_policy = greedy(mdp, report.output_value)
    elif args.alg == "alg1":
        report = solvers.approx_shifted_halpern(mdp, zero, n)
    elif args.alg == "alg2":
        gamma = args.gamma if args.gamma is not None else 1.0 - 1.0 / max(n, 2)
        report = solvers.halpern_then_picard(solvers.bellman_operator(mdp, gamma), zero, n)
        report.output_policy = greedy(mdp, report.output_value, gamma)
    elif args.alg == "alg3":
        if args.gamma is None:
            report = solvers.solve_multichain(mdp, n, extra_k=args.extra_k)
        else:
            report = solvers.warm_start_htp(mdp, args.gamma, n)
    else:
        report = solvers.dmdp_baseline(mdp, n)
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_certify(args):
    mdp = _read_mdp(args.mdp)
    try:
        grid = tuple(int(x) for x in args.n_grid.split(",") if x.strip())
    except ValueError:
        grid = ()
    if not grid or min(grid) < 1:
        print(f"mvi certify: error: --n-grid needs positive integers, got {args.n_grid!r}", file=sys.stderr)
        return EXIT_USAGE
    reference = _read_policy(args.reference) if args.reference else None
    result = certify.theorem_suite(mdp, certify.SuiteConfig(n_grid=grid, reference=reference))
    print(result.table())
    if args.json:
        Path(args.json).write_text(result.to_json() + "\n")
    for c in result.failures:
        print(f"FAILED {c.label} n={c.n} margin={c.margin:.3e}", file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_gen(args):
    if args.kind == "mkt":
        mdp = generators.gen_mkt(args.k, args.T, args.eps, args.seed)
    elif args.kind == "four-state":
        mdp = generators.gen_four_state(args.eps)
    else:
        mdp = generators.gen_random_multichain(
            args.components, args.states_per, args.actions_per, args.leak, args.seed, n_transient=args.transient
        )
    data = save(mdp)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        print(data.decode())
    return EXIT_OK


def cmd_bench(args):
    config = bench.ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
    result = bench.run_experiment(config)
    print(f"wrote {len(result.files)} files; index at {result.index_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvi", description="Value iteration for multichain average-reward MDPs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check an MDP file")
    s.add_argument("mdp")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("analyze", help="ground truth and complexity parameters, or one policy's chain")
    s.add_argument("mdp")
    s.add_argument("--policy", help="policy JSON; prints its chain analysis")
    s.add_argument("--reference", help="known optimal policy JSON; skips enumeration")
    s.add_argument("--cap", type=int, default=10**5, help="enumeration cap for B and per-policy T_drop")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("solve", help="run one algorithm")
    s.add_argument("mdp")
    s.add_argument("--alg", choices=ALGS, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--gamma", type=float)
    s.add_argument("--extra-k", type=float, default=0.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("certify", help="check every convergence bound on an instance")
    s.add_argument("mdp")
    s.add_argument("--n-grid", default="1,2,5,10,50,200")
    s.add_argument("--reference", help="known optimal policy JSON; skips enumeration")
    s.add_argument("--json", help="also write the checks as JSON")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("gen", help="generate an instance")
    s.add_argument("kind", choices=("mkt", "four-state", "random"))
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--T", type=float, default=5.0)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--components", type=int, default=2)
    s.add_argument("--states-per", type=int, default=2)
    s.add_argument("--actions-per", type=int, default=2)
    s.add_argument("--leak", type=float, default=0.3)
    s.add_argument("--transient", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("bench", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, MviError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
