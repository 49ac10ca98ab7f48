"""Command-line driver: ``tangency-lab {validate,build,verify,simulate}``.

Every subcommand reads a flat ``key = value`` parameter file (the reference
set when --config is omitted) and writes CSV files into --out.  Exit codes:
0 success, 1 a constraint or verification failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import random
import sys
from pathlib import Path

from gmpy2 import mpq

from . import linking as lk
from . import params as P
from . import perturbation as pt
from . import statistics as S
from . import wandering as wd
from .errors import MajorityViolation, OutsideDomain, RefinementFailure

EPS = mpq(1, 1000)


class UsageError(Exception):
    pass


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _num(v):
    """Floats as shortest round-trip decimals; exact values as p/q."""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def load_params(args):
    if args.config is None:
        params = P.reference_instance()
    else:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            params = P.load(path)
        except ValueError as exc:
            raise UsageError(f"{path}: {exc}") from None
    return params.as_float() if args.mode == "float" else params


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _construction(params, k_max, variant, eras, L=None):
    L = params.L if L is None else L
    sched = S.era_schedule(eras)
    codes = S.u_codes(variant, k_max, sched)
    states = lk.build_linked_sequence(params, EPS, k_max + 1)
    alignments = lk.build_alignments(params, L, codes, EPS, states)
    return states, alignments, pt.build_schedule(alignments, params, L)


# --- subcommands ------------------------------------------------------------------

def cmd_validate(args) -> int:
    params = load_params(args)
    report = P.validate(params)
    rows = [(name, "pass" if ok else "FAIL", _num(lhs), _num(rhs)) for name, ok, lhs, rhs in report.rows()]
    _write_csv(_out(args) / "validation.csv", ["constraint", "verdict", "lhs", "rhs"], rows)
    for name, verdict, _, _ in rows:
        print(f"{verdict:4}  {name}")
    if not report.passed:
        print(f"failed: {', '.join(report.failed())}", file=sys.stderr)
        return 1
    return 0


def cmd_build(args) -> int:
    params = load_params(args)
    if not params.exact:
        raise UsageError("build needs --mode rational: the linked-pair search is exact")
    out = _out(args)
    try:
        states, alignments, schedule = _construction(params, args.k_max, args.variant, args.eras)
    except RefinementFailure as exc:
        print(f"refinement failed at k = {exc.generation}: {exc}", file=sys.stderr)
        return 1
    (out / "linked_pairs.csv").write_text(lk.construction_log(states), encoding="utf-8")
    _write_csv(out / "codes.csv", ["k", "alpha", "u_free", "omega_next", "n_hat0", "n_hat1", "majority"],
               [(a.k, a.code.alpha, a.code.u_free, a.code.omega_next, a.code.n_hat0, a.code.n_hat1,
                 a.code.majority) for a in alignments])
    _write_csv(out / "centres.csv", ["k", "x_u", "y_u", "t", "t_tilde"],
               [(a.k, a.center[0], a.center[1], a.translation[0], a.translation[1]) for a in alignments])
    (out / "schedule.csv").write_text(schedule.to_csv(), encoding="utf-8")
    sep = lk.scale_separation(alignments, params, params.L)
    _write_csv(out / "separation.csv", ["k", "m", "n", "gap", "bound", "separated"],
               [(r["k"], r["m"], r["n"], repr(float(r["gap"])), repr(float(r["bound"])), r["separated"])
                for r in sep])
    residuals = lk.return_residual(alignments, params)
    # the residual against the base-translated map is exactly the next plateau translation
    aligned = all(r == (*b.translation, 0, 0) for r, b in zip(residuals, alignments[1:]))
    print(f"built k = 1..{args.k_max}: linked pairs {len(states)}, centre alignment "
          f"{'exact' if aligned else 'BROKEN'}, rigorous L = {schedule.rigorous}")
    for r in sep:
        if not r["separated"]:
            print(f"warning: scales not separated at k = {r['k']}", file=sys.stderr)
    return 0 if aligned else 1


def cmd_verify(args) -> int:
    # the construction is always exact; --mode picks the arithmetic of the return-map check
    params = load_params(argparse.Namespace(config=args.config, mode="rational"))
    out = _out(args)
    _, alignments, schedule = _construction(params, args.k_max, args.variant, args.eras)
    boxes = wd.build_boxes(alignments, params)
    report = wd.check_nesting(boxes, alignments, params)
    (out / "nesting.csv").write_text(report.to_csv(), encoding="utf-8")
    centre = alignments[0].center
    disj = wd.orbit_disjointness(schedule, boxes, alignments, params, samples=[centre])
    _write_csv(out / "diameters.csv", ["k", "log_diam"],
               [(b.k, repr(d)) for b, d in zip(boxes, disj["log_diams"])])
    rng = random.Random(args.seed)
    rows = []
    for a, nxt in zip(alignments, alignments[1:]):
        hx, hy = wd.tangency_offsets(a, params)
        offs = [tuple(h * mpq(rng.randint(-10 ** 6, 10 ** 6), 10 ** 6) for h in (hx, hy))
                + (mpq(rng.randint(-2000, 2000), 1000), mpq(rng.randint(-2000, 2000), 1000))
                for _ in range(args.samples)]
        exact = args.mode == "rational" and a.k <= 3
        err = wd.return_map_error(schedule, a, nxt, offs, params, exact=exact)
        rows.append((a.k, "exact" if exact else "mpfr", repr(float(err))))
    _write_csv(out / "return_map.csv", ["k", "arithmetic", "max_relative_error"], rows)
    nested = all(report.verified_exponent(b.k) is not None for b in boxes[:-1])
    formula = all(float(r[2]) <= 1e-9 for r in rows)
    print(f"return map agrees: {formula}; boxes disjoint: {disj['disjoint']}; "
          f"diameters decreasing: {disj['diam_decreasing']}")
    for b in boxes[:-1]:
        e = report.verified_exponent(b.k)
        failing = sorted({r.axis for r in report.rows if r.k == b.k and not r.holds})
        print(f"k = {b.k}: verified exponent {e if e else 'none'}"
              + (f" (failing axes: {', '.join(failing)})" if e is None else ""))
    ok = nested and formula and disj["disjoint"] and disj["diam_decreasing"]
    return 0 if ok else 1


def cmd_simulate(args) -> int:
    params = load_params(args)
    if not params.exact:
        raise UsageError("simulate builds the construction exactly; give a rational config")
    out = _out(args)
    try:
        rep = S.run(params, args.variant, eras=args.eras, k_max=args.k_max_sim, L=args.L,
                    eps=EPS, enforce_majority=not args.diagnostic)
    except MajorityViolation as exc:
        _write_csv(out / "majority.csv", ["k", "zeros", "ones", "ok"],
                   [(r["k"], r["zeros"], r["ones"], r["ok"]) for r in exc.rows])
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    except OutsideDomain as exc:
        print(f"orbit left the domain at step {exc.step}: {exc}", file=sys.stderr)
        return 1
    (out / "series.csv").write_text(rep.series.to_csv(), encoding="utf-8")
    (out / "era_averages.csv").write_text(rep.series.plot_data(), encoding="utf-8")
    _write_csv(out / "majority.csv", ["k", "zeros", "ones", "ok"],
               [(r["k"], r["zeros"], r["ones"], r["ok"]) for r in rep.majority])
    flag = "rigorous" if rep.rigorous else "non-rigorous (exploration L)"
    if rep.verdict is None:
        d = rep.inconclusive
        print(f"verdict: inconclusive after {d['steps']} steps, L = {rep.L} {flag}; "
              f"era-end averages {list(d['era_ends'])}, tail oscillation {d['tail_oscillation']}, "
              f"limit {d['limit']}")
        return 1
    v = rep.verdict
    print(f"verdict: {v.verdict}, L = {rep.L} {flag}; first gap {v.first_gap!r}, limit {v.limit!r}")
    return 0


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="parameter file (default: reference set)")
    common.add_argument("--mode", choices=("rational", "float"), default="rational")
    common.add_argument("--out", metavar="DIR", default="tangency-out")
    common.add_argument("--k-max", type=int, default=6, metavar="N", help="last construction index")
    common.add_argument("--eras", type=int, default=3, metavar="S")
    common.add_argument("--seed", type=int, default=0, metavar="N")
    common.add_argument("--variant", choices=S.VARIANTS, default="convergent",
                        help="free u-codes: era/code condition or all zeros")

    parser = argparse.ArgumentParser(prog="tangency-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the named parameter constraints")
    sub.add_parser("build", parents=[common], help="linked pairs, gamma codes, centres, schedule")
    v = sub.add_parser("verify", parents=[common], help="return map, nesting, disjointness")
    v.add_argument("--samples", type=int, default=20, help="random offsets per index")
    s = sub.add_parser("simulate", parents=[common], help="centre orbit averages and verdict")
    s.add_argument("--L", type=int, default=S.EXPLORATION_L, help="translation depth (small = exploration)")
    s.add_argument("--blocks", dest="k_max_sim", type=int, default=None,
                   help="blocks to simulate (default: the era span, or 12 for convergent)")
    s.add_argument("--diagnostic", action="store_true",
                   help="run even when the majority condition fails")
    return parser


COMMANDS = {"validate": cmd_validate, "build": cmd_build, "verify": cmd_verify, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "k_max", 1) < 1 or args.eras < 1:
        print("tangency-lab: --k-max and --eras must be positive", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tangency-lab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
