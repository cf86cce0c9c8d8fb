"""Command-line entry point: ``erlang-econ {sweep,example,validate}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import DomainError, SimulationError
from .sweep import (
    MODES,
    SpecError,
    _parse_cost,
    build_spec,
    load_config,
    run_example_report,
    run_sweep,
    run_validation,
    with_overrides,
)


def _cost_arg(text: str) -> tuple[float, ...]:
    try:
        return _parse_cost(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value file; flags override its values")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--seed", type=int, help="simulation seed (unsigned 64-bit)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--rho-min", type=float)
    p.add_argument("--rho-max", type=float)
    p.add_argument("--rho-step", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--reward", type=float)
    p.add_argument("--cost", type=_cost_arg, help="comma-separated C1,C2,...")
    p.add_argument("--workers", type=int, help="parallel processes")
    sim = p.add_argument_group("simulation")
    sim.add_argument("--threshold", type=int, help="observable threshold (default: n_s)")
    sim.add_argument("--replications", type=int)
    sim.add_argument("--horizon", type=float, help="time units per replication")
    sim.add_argument("--service", choices=("exponential", "deterministic", "uniform", "lognormal"))
    sim.add_argument("--sigma", type=float, help="lognormal log-scale deviation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erlang-econ",
        description="Admission thresholds and pricing for a loss system with congestion costs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sweep = sub.add_parser("sweep", help="evaluate thresholds, welfare and revenue over a load grid")
    _grid_flags(sweep)
    sweep.add_argument("--simulate", action="store_true", default=None,
                       help="also validate every grid point by simulation")
    sub.add_parser("example", help="worked-example report")
    validate = sub.add_parser("validate", help="simulation against analytic values")
    _grid_flags(validate)
    return parser


_FLAG_FIELDS = (
    "out", "seed", "mode", "rho_min", "rho_max", "rho_step", "mu", "reward", "cost",
    "workers", "threshold", "replications", "horizon", "service", "sigma", "simulate",
)


def spec_from_args(args: argparse.Namespace):
    file_values = load_config(args.config) if args.config else {}
    overrides = {k: getattr(args, k, None) for k in _FLAG_FIELDS}
    return build_spec(file_values, overrides)


def _validation_path(out: str | None) -> str | None:
    if out is None:
        return None
    path = Path(out)
    return str(path.with_name(path.stem + "_validation" + (path.suffix or ".csv")))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "example":
            sys.stdout.write(run_example_report())
            return 0
        spec = spec_from_args(args)
        if args.command == "sweep":
            text, summary = run_sweep(spec)
            if spec.out is None:
                sys.stdout.write(text)
            sys.stdout.write(summary)
            if not spec.simulate:
                return 0
            spec = with_overrides(spec, out=_validation_path(spec.out))
        text, summary, ok = run_validation(spec)
        if spec.out is None:
            sys.stdout.write(text)
        sys.stdout.write(summary)
        return 0 if ok else 1
    except (SpecError, DomainError, SimulationError, OverflowError, OSError) as exc:
        print(f"erlang-econ: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
