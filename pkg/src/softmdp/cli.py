"""``softmdp`` command line: check, generate, solve, compare, verify.

Exit codes: 0 ok, 1 unreadable or unparsable input, 2 invalid input or
arguments, 3 equivalence or verification failure, 4 solver non-convergence,
5 exhaustive check refused (instance too large).
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from datetime import datetime, timezone

from . import __version__
from ._backend import BACKEND
from .equivalence import SuiteInstance, random_suite, sweep
from .fileio import MdpDocument, MdpParseError, dumps, read_mdp, write_text
from .mdp import ENTROPY, KL, NONE, RegularizerSpec, random_mdp, random_policy, uniform_policy
from .oracle import (
    InstanceTooLarge,
    exhaustive_policy_check,
    kkt_residual,
    multiplier_identity_gap,
    proposition1_check,
    MAX_EXHAUSTIVE_ACTIONS,
    MAX_EXHAUSTIVE_STATES,
)
from .solvers import EXACT, ITERATIVE, SolveConfig, soft_policy_iteration, soft_value_iteration

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INVALID = 2
EXIT_EQUIVALENCE = 3
EXIT_NONCONVERGED = 4
EXIT_GUARD = 5

TOL_ENV = "SOFTMDP_DEFAULT_TOL"
MAX_SUMMARY_STATES = 10
CSV_COLUMNS = ["instance_id", "S", "A", "gamma", "eta", "reg", "q_gap", "v_gap",
               "policy_gap", "vi_iters", "spi_iters", "verdict"]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(path) -> tuple[MdpDocument, str]:
    try:
        doc, digest = read_mdp(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_PARSE) from None
    except MdpParseError as exc:
        raise CliError(f"{path}: parse error: {exc}", EXIT_PARSE) from None
    violations = doc.violations()
    if violations:
        raise CliError("\n".join(f"{path}: {v}" for v in violations), EXIT_INVALID)
    return doc, digest


def _default_tol() -> float:
    env = os.environ.get(TOL_ENV)
    if env is None:
        return 1e-10
    try:
        tol = float(env)
    except ValueError:
        raise CliError(f"{TOL_ENV}={env!r} is not a number", EXIT_INVALID) from None
    return tol


def _config(args) -> SolveConfig:
    tol = args.tol if args.tol is not None else _default_tol()
    try:
        return SolveConfig(tolerance=tol, max_iterations=args.max_iter,
                           evaluation_mode=args.eval_mode,
                           record_trace=getattr(args, "trace", False))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVALID) from None


def _regularizer(kind: str, eta, doc: MdpDocument, uniform_prior: bool) -> RegularizerSpec:
    if kind == NONE:
        if eta is not None:
            _err("warning: --eta is ignored with --reg none")
        if uniform_prior:
            raise CliError("--uniform-prior only applies to --reg kl", EXIT_INVALID)
        return RegularizerSpec.none()
    eta = 1.0 if eta is None else eta
    if not eta > 0:
        raise CliError(f"--eta must be > 0 for --reg {kind}", EXIT_INVALID)
    if kind == ENTROPY:
        if uniform_prior:
            raise CliError("--uniform-prior only applies to --reg kl", EXIT_INVALID)
        return RegularizerSpec.entropy(eta)
    if uniform_prior and doc.prior_policy is not None:
        raise CliError("--uniform-prior conflicts with the prior_policy in the file", EXIT_INVALID)
    if uniform_prior:
        return RegularizerSpec.kl(eta, uniform_policy(doc.mdp))
    if doc.prior_policy is None:
        raise CliError("--reg kl needs a prior_policy in the file or --uniform-prior", EXIT_INVALID)
    return RegularizerSpec.kl(eta, doc.prior_policy)


def _provenance(args, digest, config: SolveConfig, extra=None) -> dict:
    prov = {
        "artifact_version": __version__,
        "backend": BACKEND,
        "input_digest": digest,
        "seed": getattr(args, "seed", None),
        "config": config.as_dict(),
    }
    if extra:
        prov.update(extra)
    if not args.deterministic:
        prov["timestamp"] = datetime.now(timezone.utc).isoformat()
    return prov


def _write(path, text: str) -> None:
    try:
        write_text(path, text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_PARSE) from None


# -- commands ---------------------------------------------------------------

def cmd_check(args) -> int:
    try:
        _load(args.path)
    except CliError as exc:
        if exc.code != EXIT_INVALID:
            raise
        print(exc)
        return exc.code
    return EXIT_OK


def cmd_generate(args) -> int:
    low, high = args.reward_range
    try:
        mdp = random_mdp(args.seed, args.states, args.actions, args.gamma, (low, high))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    prior = None
    if args.with_prior:
        prior = random_policy(args.seed + 1, args.states, args.actions)
    text = MdpDocument(mdp, prior).dumps()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        _write(args.out, text)
    return EXIT_OK


def _summary_lines(report, reg: RegularizerSpec) -> list[str]:
    reg_desc = reg.kind if reg.kind == NONE else f"{reg.kind} (eta={reg.eta:g})"
    lines = [
        f"method: {report.method}   regularizer: {reg_desc}",
        f"iterations: {report.iterations}   final residual: {report.final_residual:.3e}   "
        f"converged: {'yes' if report.converged else 'no'}",
    ]
    v = report.fixed_point_v
    for s in range(min(len(v), MAX_SUMMARY_STATES)):
        lines.append(f"V[{s}] = {v[s]:.9f}")
    if len(v) > MAX_SUMMARY_STATES:
        lines.append(f"... {len(v) - MAX_SUMMARY_STATES} more states in the report file")
    if not report.converged:
        lines.append(f"not converged: {report.reason}")
    return lines


def cmd_solve(args) -> int:
    doc, digest = _load(args.path)
    reg = _regularizer(args.reg, args.eta, doc, args.uniform_prior)
    config = _config(args)
    solve = soft_value_iteration if args.method == "vi" else soft_policy_iteration
    report = solve(doc.mdp, reg, config)
    print("\n".join(_summary_lines(report, reg)))
    if args.out:
        result = {
            "method": report.method,
            "iterations": report.iterations,
            "final_residual": report.final_residual,
            "converged": report.converged,
            "reason": report.reason,
            "fixed_point_v": report.fixed_point_v,
            "fixed_point_q": report.fixed_point_q,
            "policy": report.policy,
        }
        if report.trace is not None:
            result["trace"] = report.trace
        doc_out = {
            "report": "solve",
            "provenance": _provenance(args, digest, config, {"regularizer": reg.describe()}),
            "result": result,
        }
        _write(args.out, dumps(doc_out))
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def _parse_ranges(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, _, rng = part.partition("=")
        lo, sep, hi = rng.partition(":")
        if key not in ("states", "actions", "gamma") or not sep:
            raise CliError(f"bad --shape-ranges entry {part!r} "
                           "(expected states=LO:HI, actions=LO:HI, gamma=LO:HI)", EXIT_INVALID)
        try:
            conv = float if key == "gamma" else int
            out["gammas" if key == "gamma" else key] = (conv(lo), conv(hi))
        except ValueError:
            raise CliError(f"bad --shape-ranges entry {part!r}", EXIT_INVALID) from None
    return out


def _parse_etas(text: str) -> list[float]:
    try:
        etas = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"bad --eta-list {text!r}", EXIT_INVALID) from None
    if not etas or any(not e > 0 for e in etas):
        raise CliError("--eta-list needs positive temperatures", EXIT_INVALID)
    return etas


def _csv_text(instances, reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for inst, rep in zip(instances, reports):
        w.writerow([
            inst.instance_id, inst.mdp.num_states, inst.mdp.num_actions, repr(inst.mdp.gamma),
            repr(inst.reg.eta), inst.reg.kind, repr(rep.q_gap), repr(rep.v_gap),
            repr(rep.policy_gap), rep.vi_iterations, rep.spi_iterations, rep.verdict,
        ])
    return buf.getvalue()


def cmd_compare(args) -> int:
    if (args.path is None) == (args.random_suite is None):
        raise CliError("give either an MDP file or --random-suite N", EXIT_INVALID)
    etas = _parse_etas(args.eta_list)
    config = _config(args)
    digest = None
    if args.random_suite is not None:
        if args.random_suite < 1:
            raise CliError("--random-suite needs N >= 1", EXIT_INVALID)
        if args.uniform_prior:
            raise CliError("--uniform-prior only applies to a file input", EXIT_INVALID)
        kinds = (ENTROPY, KL) if args.reg in (None, "both") else (args.reg,)
        ranges = _parse_ranges(args.shape_ranges)
        try:
            instances = random_suite(args.random_suite, args.seed, etas=etas, kinds=kinds, **ranges)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INVALID) from None
    else:
        doc, digest = _load(args.path)
        has_prior = doc.prior_policy is not None or args.uniform_prior
        if args.reg is None:
            kinds = (ENTROPY, KL) if has_prior else (ENTROPY,)
        else:
            kinds = (ENTROPY, KL) if args.reg == "both" else (args.reg,)
        instances = []
        for kind in kinds:
            for eta in etas:
                reg = _regularizer(kind, eta, doc, args.uniform_prior and kind == KL)
                instances.append(SuiteInstance(f"file-{kind}-{eta:g}", doc.mdp, reg))

    result = sweep(instances, config, args.threshold, jobs=args.jobs)
    table = _csv_text(instances, result.reports)
    if args.csv:
        _write(args.csv, table)
    else:
        sys.stdout.write(table)
    s = result.summary
    summary_out = sys.stdout if args.csv else sys.stderr
    print(f"instances: {s['instances']}  passed: {s['passed']}  failed: {s['failed']}  "
          f"nonconverged: {s['nonconverged']}  max q_gap: {s['max_q_gap']:.3e}  "
          f"max policy_gap: {s['max_policy_gap']:.3e}", file=summary_out)
    if args.out:
        doc_out = {
            "report": "compare",
            "provenance": _provenance(args, digest, config, {
                "threshold": args.threshold,
                "eta_list": etas,
                "random_suite": args.random_suite,
                "shape_ranges": args.shape_ranges if args.random_suite else None,
            }),
            "summary": s,
            "instances": [
                {"instance_id": inst.instance_id, "num_states": inst.mdp.num_states,
                 "num_actions": inst.mdp.num_actions, "gamma": inst.mdp.gamma,
                 "regularizer": inst.reg.describe(), **rep.as_dict()}
                for inst, rep in zip(instances, result.reports)
            ],
        }
        _write(args.out, dumps(doc_out))
    if s["nonconverged"]:
        return EXIT_NONCONVERGED
    return EXIT_EQUIVALENCE if s["failed"] else EXIT_OK


def cmd_verify(args) -> int:
    doc, digest = _load(args.path)
    reg = _regularizer(args.reg, args.eta, doc, args.uniform_prior)
    checks = {"kkt", "prop1", "exhaustive"} if "all" in args.checks else set(args.checks)
    mdp = doc.mdp
    if "exhaustive" in checks and (mdp.num_states > MAX_EXHAUSTIVE_STATES
                                   or mdp.num_actions > MAX_EXHAUSTIVE_ACTIONS):
        raise CliError(
            f"exhaustive check refused: instance is {mdp.num_states} states x "
            f"{mdp.num_actions} actions, limit is {MAX_EXHAUSTIVE_STATES} x {MAX_EXHAUSTIVE_ACTIONS}",
            EXIT_GUARD,
        )
    config = _config(args)
    report = soft_value_iteration(mdp, reg, config)
    if not report.converged:
        _err(f"value iteration did not converge: {report.reason}")
        return EXIT_NONCONVERGED
    tol = config.tolerance
    results = []
    if "kkt" in checks:
        if reg.kind == NONE:
            print("kkt         skipped (no regularizer)")
        else:
            kkt = kkt_residual(mdp, reg, report.fixed_point_v, report.policy)
            ident = multiplier_identity_gap(mdp, reg, report.fixed_point_v, report.policy)
            results.append(("kkt", kkt.max_abs, kkt.max_abs <= 10 * tol))
            results.append(("multiplier", ident, ident <= 10 * tol))
    if "prop1" in checks:
        p1 = proposition1_check(mdp, reg, report.fixed_point_v, args.trials, args.seed)
        results.append(("prop1", p1.max_excess, p1.passed))
    if "exhaustive" in checks:
        ex = exhaustive_policy_check(mdp, reg, report.fixed_point_q, args.grid_resolution)
        results.append(("exhaustive", ex.max_excess, ex.passed))
    for name, value, ok in results:
        print(f"{name:<11} {value: .3e}  {'pass' if ok else 'FAIL'}")
    return EXIT_OK if all(ok for _, _, ok in results) else EXIT_EQUIVALENCE


# -- argument parsing -------------------------------------------------------

def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None,
                   help=f"stopping tolerance (default 1e-10, or ${TOL_ENV})")
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--eval-mode", choices=(EXACT, ITERATIVE), default=EXACT)
    p.add_argument("--deterministic", action="store_true",
                   help="omit the timestamp so reruns give identical files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softmdp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"softmdp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and validate an MDP file")
    p.add_argument("path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("generate", help="write a seeded random MDP file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--states", type=int, required=True)
    p.add_argument("--actions", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--reward-range", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--with-prior", action="store_true", help="also write a random prior_policy")
    p.add_argument("--out", required=True, help="output path, or - for stdout")
    p.add_argument("--deterministic", action="store_true", help="accepted for symmetry; output is always deterministic")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve by value iteration or soft policy iteration")
    p.add_argument("path")
    p.add_argument("--method", choices=("vi", "spi"), default="vi")
    p.add_argument("--reg", choices=(ENTROPY, KL, NONE), default=ENTROPY)
    p.add_argument("--eta", type=float, default=None, help="temperature (default 1)")
    p.add_argument("--uniform-prior", action="store_true", help="KL prior = uniform policy")
    p.add_argument("--trace", action="store_true", help="store per-iteration residuals")
    p.add_argument("--out", default=None, help="report file (JSON)")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="certify that both routes reach the same fixed point")
    p.add_argument("path", nargs="?", default=None)
    p.add_argument("--random-suite", type=int, default=None, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shape-ranges", default="states=2:20,actions=2:8,gamma=0.5:0.95")
    p.add_argument("--reg", choices=(ENTROPY, KL, "both"), default=None)
    p.add_argument("--eta-list", default="0.01,0.1,1,10")
    p.add_argument("--uniform-prior", action="store_true")
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", default=None, help="gap table path (default: stdout)")
    p.add_argument("--out", default=None, help="report file (JSON)")
    _solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="solve and run the oracle checks")
    p.add_argument("path")
    p.add_argument("--reg", choices=(ENTROPY, KL, NONE), default=ENTROPY)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--uniform-prior", action="store_true")
    p.add_argument("--checks", nargs="+", choices=("kkt", "prop1", "exhaustive", "all"), default=["all"])
    p.add_argument("--grid-resolution", type=int, default=11)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    _solver_flags(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _err(str(exc))
        return exc.code
    except InstanceTooLarge as exc:
        _err(str(exc))
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
