"""Command-line interface: ``loccdisc {optimum,build,verify,simulate,random}``.

Every subcommand prints a JSON report on stdout.  Exit status is 0 on
success, 1 when a verification or optimality check fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .checks import invariant_suite
from .core import random_instance
from .errors import InputError, NumericalFailure
from .io import instance_digest, parse_instance, protocol_to_dict, write_instance
from .optimum import pmax
from .protocol import build_protocol
from .simulate import simulate

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loccdisc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("optimum", help="closed-form optimal success probability")
    q.add_argument("file")

    q = sub.add_parser("build", help="build the LOCC protocol and export it")
    q.add_argument("file")
    q.add_argument("-o", "--output", required=True)

    q = sub.add_parser("verify", help="run the full invariant suite")
    q.add_argument("file")
    q.add_argument("--tol", type=float, default=None, help="override every check threshold")

    q = sub.add_parser("simulate", help="build the protocol and run Monte Carlo trials")
    q.add_argument("file")
    q.add_argument("--trials", type=int, default=100_000)
    q.add_argument("--seed", type=int, default=0)

    q = sub.add_parser("random", help="write a random instance file")
    q.add_argument("--da", type=int, required=True)
    q.add_argument("--db", type=int, required=True)
    q.add_argument("--prior", type=float, required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("-o", "--output", required=True)
    return p


def _base_report(argv, instance) -> dict:
    opt = pmax(instance.prior, instance.overlap)
    return {
        "command": list(argv),
        "instanceDigest": instance_digest(instance),
        "swapped": instance.prior.swapped,
        "priorPhi": instance.prior.t if instance.prior.swapped else instance.prior.s,
        "overlap": instance.overlap,
        "caseTag": opt.case.value,
        "pmax": opt.value,
    }


def _user_tallies(report, swapped: bool) -> dict:
    d = report.to_dict()
    phi, psi = d.pop("count_correct_phi"), d.pop("count_correct_psi")
    # counts refer to the caller's labels, not the canonical (s <= t) ones
    if swapped:
        phi, psi = psi, phi
    return {
        "trials": d["trials"],
        "countCorrectPhi": phi,
        "countCorrectPsi": psi,
        "countInconclusive": d["count_inconclusive"],
        "countError": d["count_error"],
        "empiricalSuccess": d["empirical_success"],
        "analyticSuccess": d["analytic_success"],
        "seed": d["seed"],
    }


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _parser().parse_args(argv)
    start = time.perf_counter()
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        code, report = _dispatch(args, argv)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report["wallTime"] = round(time.perf_counter() - start, 6)
    print(json.dumps(report, indent=1))
    return code


def _dispatch(args, argv) -> tuple[int, dict]:
    if args.command == "random":
        inst = random_instance(args.da, args.db, args.prior, args.seed)
        write_instance(inst, args.output)
        return EXIT_OK, {**_base_report(argv, inst), "output": args.output}

    inst = parse_instance(args.file)
    report = _base_report(argv, inst)
    if args.command == "optimum":
        return EXIT_OK, report

    protocol = build_protocol(inst)
    report["analyticSuccess"] = protocol.analytic_success
    optimal = abs(protocol.analytic_success - report["pmax"]) <= 1e-9
    report["optimal"] = optimal

    if args.command == "build":
        Path(args.output).write_text(json.dumps(protocol_to_dict(protocol), indent=1) + "\n")
        report["output"] = args.output
        return (EXIT_OK if optimal else EXIT_FAIL), report

    if args.command == "verify":
        if args.tol is not None and not args.tol > 0:
            raise InputError("--tol must be positive")
        results = invariant_suite(protocol, override=args.tol)
        report["checks"] = [
            {"name": r.name, "residual": r.residual, "threshold": r.threshold, "passed": r.passed}
            for r in results
        ]
        report["allPassed"] = all(r.passed for r in results)
        return (EXIT_OK if report["allPassed"] else EXIT_FAIL), report

    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    sim = simulate(protocol, inst, args.trials, args.seed)
    report["simulation"] = _user_tallies(sim, inst.prior.swapped)
    ok = optimal and sim.count_error == 0
    return (EXIT_OK if ok else EXIT_FAIL), report


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
