"""Command line entry point: ``slowbond <subcommand> ...``."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .errors import SlowBondError
from .lattice import Critical, LatticeSpec, Subcritical
from .pde import DiscreteField, field_to_csv, solve_continuous_heat, solve_discrete_heat
from .profiles import box_average_profile, make_profile
from .report import format_report
from .simulator import ReplicaPlan, box_average_paths, write_box_averages_csv


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {key} must be a number") from None


def _times(text: str):
    return tuple(float(t) for t in text.split(",") if t)


def _add_model(p, with_size=True):
    if with_size:
        p.add_argument("--n", type=int, default=8)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.5)
    p.add_argument("--profile", default="sine")
    p.add_argument("--param", type=_param, action="append", default=[],
                   help="profile parameter as key=value (repeatable)")


def _profile(args):
    return make_profile(args.profile, **dict(args.param))


def _print_assertions(table) -> None:
    for a in table.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'} {a.name} {a.detail}".rstrip())


def cmd_simulate(args) -> int:
    spec = LatticeSpec(args.n, args.k, args.alpha, args.beta)
    regime = Critical() if args.theta is None else Subcritical(args.theta)
    plan = ReplicaPlan(args.replicas, args.seed, args.times, regime)
    paths = box_average_paths(plan, spec, _profile(args), method=args.method)
    write_box_averages_csv(args.out, paths, plan.macro_times)
    print(f"wrote {args.out}")
    return 0


def cmd_pde(args) -> int:
    gamma = _profile(args)
    t = args.time
    if args.kind == "discrete":
        rho0 = box_average_profile(gamma, args.k)
        field = DiscreteField(solve_discrete_heat(rho0, args.alpha, args.k, t))
        values = {f"rho_{i}": float(v) for i, v in enumerate(field.values)}
        print(format_report(values, prefix="discrete"), end="")
    else:
        field = solve_continuous_heat(gamma, args.alpha, t)
        print(format_report({"mean": field.mean, "tail_bound": field.tail_bound}, prefix="continuous"), end="")
    if args.out:
        field_to_csv(field, args.out)
        print(f"wrote {args.out}")
    return 0


def _suite(args, name) -> int:
    sizes = [tuple(int(v) for v in s.split("x")) for s in args.sizes.split(",")] if args.sizes else []
    spec = harness.ExperimentSpec(name=name, sizes=sizes, theta=getattr(args, "theta", None),
                                  alpha=getattr(args, "alpha", 1.0), beta=getattr(args, "beta", 1.5),
                                  profile=getattr(args, "profile", "sine"),
                                  profile_params=dict(getattr(args, "param", [])),
                                  macro_times=getattr(args, "times", (0.01, 0.1, 0.5)),
                                  base_seed=args.seed)
    table = harness.run_experiment(spec)
    _print_assertions(table)
    if args.out:
        harness.emit(table, args.out)
    return 0 if table.passed else 1


def cmd_oracle(args) -> int:
    return _suite(args, "oracle-suite")


def cmd_check(args) -> int:
    return _suite(args, "appendix-suite")


def cmd_experiment(args) -> int:
    spec = harness.with_seed(harness.ExperimentSpec.from_toml(args.config), args.seed)
    table = harness.run_experiment(spec)
    written = harness.emit(table, args.out, plot=args.plot)
    for path in written:
        print(f"wrote {path}")
    _print_assertions(table)
    return 0 if table.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slowbond", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate replicas and dump box averages")
    _add_model(p)
    p.add_argument("--theta", type=float, default=None, help="subcritical exponent (default: critical)")
    p.add_argument("--times", type=_times, default=(0.01, 0.05, 0.1))
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("gillespie", "uniformized"), default="uniformized")
    p.add_argument("--out", default="box_averages.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pde", help="reference heat-equation solutions")
    _add_model(p, with_size=False)
    p.add_argument("--kind", choices=("discrete", "continuous"), default="discrete")
    p.add_argument("--time", type=float, default=0.05)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pde)

    p = sub.add_parser("oracle", help="exact-enumeration checks on tiny lattices")
    p.add_argument("--sizes", default="2x2,3x2,4x2", help="comma separated NxK list")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.5)
    p.add_argument("--theta", type=float, default=None,
                   help="exponent of the subcritical scale also checked (default 0.5)")
    p.add_argument("--profile", default="sine")
    p.add_argument("--param", type=_param, action="append", default=[])
    p.add_argument("--times", type=_times, default=(0.01, 0.1, 0.5))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check", help="subgaussian toolkit checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", default="")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("experiment", help="run a convergence experiment from a TOML file")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override base_seed")
    p.add_argument("--out", default="experiment.csv")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SlowBondError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
