"""Command-line entry point: ``pbpc <command> ...``.

Exit codes: 0 success, 1 usage or input error, 2 instance validation
failure, 3 search or expectation budget exceeded.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from pbpc import __version__
from pbpc.equilibrium import (
    bounds_summary,
    construct_pc_pure_ne,
    enumerate_mixed_ne_2p,
    enumerate_pure_ne,
    expected_unit_price,
    is_mixed_ne,
    is_pure_ne,
)
from pbpc.errors import (
    BudgetExceededError,
    InfeasibleInstanceError,
    InvalidInputError,
    PbpcError,
    ValidationError,
)
from pbpc.instances import BUILTINS, FIGURES, parse_generator
from pbpc.io import (
    RunManifest,
    atomic_write_text,
    instance_digest,
    instance_to_dict,
    load_instance,
    load_profile,
    save_instance,
    write_csv,
)
from pbpc.learning import SimConfig, run_simulation, summarize
from pbpc.market import MarketInstance, validate_instance
from pbpc.mechanisms import Mechanism, run_mechanism

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which we reserve
        raise UsageError(f"{self.prog}: {message}")


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def resolve_instance(arg: str) -> MarketInstance:
    """A path to a JSON file, a builtin name, or a generator spec like ``vcg:4,3``."""
    if os.path.exists(arg):
        return load_instance(arg)
    inst = parse_generator(arg)
    report = validate_instance(inst)
    if not report.ok:
        raise ValidationError(list(report.problems))
    return inst


class _Outputs:
    """Tracks files a command writes so a failure can remove partial results."""

    def __init__(self) -> None:
        self.paths: list[Path] = []

    def add(self, path: Path) -> Path:
        self.paths.append(path)
        return path

    def rollback(self) -> None:
        for p in self.paths:
            p.unlink(missing_ok=True)


# -- commands ----------------------------------------------------------------


def cmd_analyze(args, out: _Outputs) -> int:
    inst = resolve_instance(args.instance)
    report = bounds_summary(inst, method=args.method)
    data = {"instance": inst.name, **report.to_dict()}
    if args.json:
        print(json.dumps(data, indent=2))
    else:
        print(f"instance {inst.name}: n={inst.n}, M={inst.max_bid}")
        print(f"  b_high          {list(report.b_high)}")
        print(f"  b_low           {list(report.b_low)}")
        print(f"  eligible        {list(report.eligible)}")
        print(f"  pc_pure_price   {report.pc_pure_price}")
        print(f"  pc_floor        {report.pc_floor}")
        print(f"  pb_interval     [{report.pb_interval[0]}, {report.pb_interval[1]}]")
        refined = report.refined_pb_bound
        print(
            "  refined_pb      "
            + ("n/a" if refined is None else f"{refined} (~{float(refined):.4f})")
        )
    if args.out:
        out.add(atomic_write_text(args.out, json.dumps(data, indent=2) + "\n"))
    return EXIT_OK


def _simulate_one(inst, config: SimConfig, out_dir: Path, out: _Outputs) -> tuple[Path, object]:
    started = _now()
    traj = run_simulation(inst, config)
    stem = f"{inst.name.replace(':', '_').replace(',', '_')}_{config.mechanism.value}_seed{config.seed}"
    csv_path = out.add(write_csv(out_dir / f"{stem}.csv", traj.csv_lines()))
    manifest = RunManifest(
        tool_version=__version__,
        instance_name=inst.name,
        instance_digest=instance_digest(inst),
        instance=instance_to_dict(inst),
        config={**config.to_dict(), "eta_resolved": traj.eta},
        seed=config.seed,
        started=started,
        finished=_now(),
        outputs=[str(csv_path)],
    )
    out.add(atomic_write_text(out_dir / f"{stem}.manifest.json", manifest.to_json()))
    return csv_path, traj


def _config(args, mech) -> SimConfig:
    eta = "auto" if args.eta is None else args.eta
    return SimConfig(
        mechanism=mech,
        iterations=args.iters,
        seed=args.seed,
        learning_rate=eta,
        snapshot_every=args.snapshot_every,
        feedback=args.feedback,
        workers=args.workers,
    )


def _report_run(mech: str, path: Path, traj) -> None:
    s = summarize(traj, max(1, len(traj.snapshots) // 4))
    print(
        f"{mech}: time-average unit price {s.time_average:.4f} "
        f"(normalized {s.normalized_time_average:.4f}); "
        f"last-quarter normalized mean {s.window_mean:.4f} -> {path}"
    )


def cmd_simulate(args, out: _Outputs) -> int:
    inst = resolve_instance(args.instance)
    config = _config(args, args.mech)
    path, traj = _simulate_one(inst, config, Path(args.out), out)
    _report_run(config.mechanism.value, path, traj)
    return EXIT_OK


def _profile_text(p) -> str:
    if isinstance(p, tuple) and p and isinstance(p[0], dict):
        parts = []
        for d in p:
            parts.append("{" + ", ".join(f"{b}: {w}" for b, w in sorted(d.items())) + "}")
        return "(" + ", ".join(parts) + ")"
    return str(tuple(p))


def cmd_enumerate(args, out: _Outputs) -> int:
    inst = resolve_instance(args.instance)
    mech = Mechanism.parse(args.mech)
    if args.pure:
        found = enumerate_pure_ne(mech, inst, budget=args.budget)
        rows = [list(p) for p in found]
        kind = "pure"
    else:
        found = enumerate_mixed_ne_2p(mech, inst, max_support=args.max_support)
        rows = [[{str(b): str(w) for b, w in sorted(d.items())} for d in p] for p in found]
        kind = "mixed"
    print(f"{len(found)} {kind} equilibria of {mech.value.upper()} on {inst.name}")
    for p in found:
        price = (
            run_mechanism(mech, inst, p).unit_price
            if kind == "pure"
            else expected_unit_price(mech, inst, p)
        )
        print(f"  {_profile_text(p)}  unit price {price}")
    if args.out:
        payload = {"instance": inst.name, "mechanism": mech.value, "kind": kind, "equilibria": rows}
        out.add(atomic_write_text(args.out, json.dumps(payload, indent=2) + "\n"))
    return EXIT_OK


def cmd_reproduce(args, out: _Outputs) -> int:
    if args.figure not in FIGURES:
        raise UsageError(f"unknown figure {args.figure!r}; choose from {', '.join(FIGURES)}")
    inst = parse_generator(args.figure)
    out_dir = Path(args.out)
    report = bounds_summary(inst)
    out.add(
        atomic_write_text(
            out_dir / f"{args.figure}_bounds.json", json.dumps(report.to_dict(), indent=2) + "\n"
        )
    )
    print(
        f"{args.figure}: pc_pure_price {report.pc_pure_price}, pc_floor {report.pc_floor}, "
        f"pb_interval {list(report.pb_interval)}"
    )
    for mech in ("pb", "pc"):
        path, traj = _simulate_one(inst, _config(args, mech), out_dir, out)
        _report_run(mech, path, traj)
    return EXIT_OK


def cmd_gen(args, out: _Outputs) -> int:
    inst = parse_generator(args.spec)
    if args.out == "-":
        print(json.dumps(instance_to_dict(inst), indent=2))
    else:
        out.add(save_instance(inst, args.out))
        print(f"wrote {inst.name} to {args.out}")
    return EXIT_OK


def cmd_verify(args, out: _Outputs) -> int:
    inst = resolve_instance(args.instance)
    mech = Mechanism.parse(args.mech)
    profile = load_profile(args.profile)
    tol = Fraction(args.tolerance)
    if isinstance(profile[0], dict):
        report = is_mixed_ne(mech, inst, profile, tolerance=tol)
    else:
        report = is_pure_ne(mech, inst, profile, tolerance=tol)
    verdict = _color("equilibrium", "32") if report.is_equilibrium else _color("not an equilibrium", "31")
    print(f"{mech.value.upper()} on {inst.name}: {verdict}; epsilon = {report.epsilon}")
    if report.worst_deviator is not None:
        agent, bid = report.worst_deviator
        print(f"  agent {agent} gains {report.epsilon} by bidding {bid}")
    return EXIT_OK


def cmd_construct(args, out: _Outputs) -> int:
    inst = resolve_instance(args.instance)
    profile = construct_pc_pure_ne(inst)
    price = run_mechanism(Mechanism.PC, inst, profile).unit_price
    print(f"PC pure equilibrium {tuple(profile)} with unit price {price}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_sim_options(p: argparse.ArgumentParser, iters_default: int | None) -> None:
    p.add_argument("--iters", type=int, default=iters_default, required=iters_default is None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", type=float, default=None, help="learning rate (default: auto)")
    p.add_argument("--snapshot-every", type=int, default=1)
    p.add_argument("--feedback", choices=("sampled", "exact"), default="sampled")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbpc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pbpc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    inst_help = "instance file, builtin name (" + ", ".join(sorted(BUILTINS)) + "), vcg:k,d or bestpc:d"

    p = sub.add_parser("analyze", help="bound quantities and equilibrium price ranges")
    p.add_argument("instance", help=inst_help)
    p.add_argument("--method", choices=("auto", "exhaustive", "clustered"), default="auto")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Hedge dynamics, trajectory CSV plus run manifest")
    p.add_argument("instance", help=inst_help)
    p.add_argument("--mech", required=True, choices=("pb", "pc", "vcg"))
    _add_sim_options(p, None)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("enumerate", help="exhaustive pure or two-agent mixed equilibria")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--pure", action="store_true")
    mode.add_argument("--mixed2p", action="store_true")
    p.add_argument("instance", help=inst_help)
    p.add_argument("--mech", required=True, choices=("pb", "pc", "vcg"))
    p.add_argument("--budget", type=int, default=10**7, help="max profiles for --pure")
    p.add_argument("--max-support", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("reproduce", help="PB and PC runs for a figure instance")
    p.add_argument("figure", help=", ".join(FIGURES))
    p.add_argument("--out", required=True, help="output directory")
    _add_sim_options(p, 20000)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("gen", help="write a builtin or generated instance as JSON")
    p.add_argument("spec", help="builtin name, vcg:k,delta or bestpc:delta")
    p.add_argument("--out", required=True, help="output file, or - for stdout")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="check whether a pure or mixed profile is an equilibrium")
    p.add_argument("instance", help=inst_help)
    p.add_argument("--profile", required=True, help="JSON list of bids or of {bid: prob} maps")
    p.add_argument("--mech", required=True, choices=("pb", "pc", "vcg"))
    p.add_argument("--tolerance", default="0")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("construct", help="build the PC pure equilibrium at the highest bound")
    p.add_argument("instance", help=inst_help)
    p.set_defaults(func=cmd_construct)
    return parser


def main(argv: list[str] | None = None) -> int:
    out = _Outputs()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, InfeasibleInstanceError) as exc:
        out.rollback()
        problems = getattr(exc, "problems", None) or [str(exc)]
        print("invalid instance:", file=sys.stderr)
        for msg in problems:
            print(f"  - {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetExceededError as exc:
        out.rollback()
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InvalidInputError, PbpcError, ValueError) as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        out.rollback()
        return 130


if __name__ == "__main__":
    sys.exit(main())
