"""
Command Line Interface for the Ising Spin-Chain Full Adder Simulator

Subcommands: compile, run-exact, run-map, compare, reproduce, verify.
Exit codes: 0 ok, 1 usage, 2 invariant failure, 3 resource cap.
"""
import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from config import LOG_LEVEL, VERSION
from errors import AdderError, InvariantFailure

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse with the usage exit code of this tool."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"❌ {message}", file=sys.stderr)
        sys.exit(1)


# =============================================================================
# ARGUMENTS
# =============================================================================

def _addend(text: str):
    if text in ("sweep", "random"):
        return text
    return int(text)


def _initial(text: str):
    if text.startswith("random:"):
        return text
    return _int_list(text)


def _int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_physics(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--K", type=int, help="2*pi*K condition integer")
    p.add_argument("--K2", type=int, help="K of the first composite pulse (default 2K)")
    p.add_argument("--Kc", type=int, help="K of the correction pulse (default 2K)")
    p.add_argument("--delta-omega", dest="delta_omega", type=float, help="Larmor gradient in units of J")
    p.add_argument("--ratio", dest="delta_omega_over_omega", type=float,
                   help="set delta_omega = ratio * Omega instead")
    p.add_argument("--omega0", type=float)
    p.add_argument("--l", type=int, help="number of addend qubits")
    p.add_argument("--A", type=_addend, help="addend number, 'sweep' or 'random'")
    p.add_argument("--output", help="output file")


def _add_initial(p: argparse.ArgumentParser):
    p.add_argument("--initial", type=_initial, help="comma separated numbers or random:M:seed")
    p.add_argument("--random-coefficients", dest="random_coefficients", action="store_true", default=None)
    p.add_argument("--schedule", help="pulse schedule file written by 'compile'")


def _add_map(p: argparse.ArgumentParser):
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--xi-factor", dest="xi_factor", type=float)
    p.add_argument("--tail-factor", dest="tail_factor", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-counts", dest="track_counts", action="store_false", default=None)
    p.add_argument("--phase-model", dest="phase_model", choices=("random", "analytic"),
                   help="phases of new unwanted amplitudes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adder", description="Quantum full adder on an Ising spin chain")
    parser.add_argument("--log-level", default=LOG_LEVEL)
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="compile FA(A) and dump the pulse schedule")
    _add_physics(p)

    p = sub.add_parser("run-exact", help="exact state-vector simulation")
    _add_physics(p)
    _add_initial(p)
    p.add_argument("--method", choices=("eigh", "expm"))

    p = sub.add_parser("run-map", help="quantum-map simulation")
    _add_physics(p)
    _add_initial(p)
    _add_map(p)

    p = sub.add_parser("compare", help="exact and map probability-error traces side by side")
    _add_physics(p)
    _add_initial(p)
    _add_map(p)
    p.add_argument("--method", choices=("eigh", "expm"))

    p = sub.add_parser("reproduce", help="data series of a published figure")
    p.add_argument("figure", choices=("fig1", "fig2", "fig3", "fig4"))
    p.add_argument("--K", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--A", type=_addend)
    p.add_argument("--delta-omega", dest="delta_omega", type=float)
    p.add_argument("--M", type=int, help="size of the random initial superposition")
    p.add_argument("--robustness", action="store_true", default=None,
                   help="rerun the map at xi/2 with the same streams")
    p.add_argument("--m-sweep", dest="m_sweep", type=_int_list,
                   help="comma separated superposition sizes M to compare final errors over")
    p.add_argument("--output")
    _add_map(p)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--delta-omega", dest="delta_omega", type=float, default=100.0)
    p.add_argument("--quick", action="store_true")
    p.add_argument("--json", action="store_true", help="print the machine-readable report")
    return parser


_MAP_KEYS = ("realizations", "xi_factor", "tail_factor", "workers", "track_counts", "phase_model")
_SKIP_KEYS = ("command", "log_level", "config", "seed", "schedule", "json", "quick", "figure")


def experiment_fields(args: argparse.Namespace, mode: Optional[str] = None) -> Dict[str, Any]:
    """Config file values overridden by the flags that were given."""
    fields: Dict[str, Any] = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            fields = json.load(f)
    if mode:
        fields["mode"] = mode
    map_fields = dict(fields.get("map", {}))
    for key, value in vars(args).items():
        if value is None or key in _SKIP_KEYS:
            continue
        if key in _MAP_KEYS:
            map_fields[key] = value
        else:
            fields[key] = value
    if getattr(args, "seed", None) is not None:
        map_fields["rng_seed"] = args.seed
    if getattr(args, "schedule", None):
        fields["schedule"] = args.schedule
    fields["map"] = map_fields
    return fields


# =============================================================================
# COMMANDS
# =============================================================================

def _print_checks(checks: Dict[str, Any]) -> bool:
    ok = True
    for name, value in checks.items():
        if isinstance(value, bool):
            print(f"  {'✓' if value else '❌'} {name}")
            ok &= value
        else:
            print(f"    {name} = {value:.6g}" if isinstance(value, float) else f"    {name} = {value}")
    return ok


def run(args: argparse.Namespace) -> int:
    import experiments
    from experiments import ExperimentConfig

    if args.command == "compile":
        cfg = ExperimentConfig(**experiment_fields(args))
        result = experiments.cmd_compile(cfg)
        if result["path"]:
            print(f"✓ Schedule written to {result['path']}")
        else:
            sys.stdout.write(result["schedule"])
        print(f"# qpulse_count={result['qpulse_count']} physical_pulse_count="
              f"{result['physical_pulse_count']} total_time={result['total_time']:.10g}")
        return 0

    if args.command == "run-exact":
        cfg = ExperimentConfig(**experiment_fields(args, "exact"))
        result = experiments.cmd_run_exact(cfg)
        for row in result["rows"]:
            print(f"  A={row[0]:<6d} phase error {row[2]:.3e} pi   common phase {row[3]:+.6f}"
                  f"   probability error {row[6]:.3e}")
        print(f"✓ Results written to {result['path']}")
        return 0

    if args.command == "run-map":
        cfg = ExperimentConfig(**experiment_fields(args, "map"))
        result = experiments.cmd_run_map(cfg)
        final = [t.records[-1].cumulative_error for t in result["runs"]]
        print(f"  final error (mean over {len(final)}): {sum(final) / len(final):.4e}")
        print(f"✓ Results written to {result['path']}")
        return 0

    if args.command == "compare":
        cfg = ExperimentConfig(**experiment_fields(args, "compare"))
        result = experiments.cmd_compare(cfg)
        status = "✓" if result["agreeing"] == result["points"] else "❌"
        print(f"{status} {result['agreeing']}/{result['points']} points inside the agreement band")
        print(f"✓ Results written to {result['path']}")
        return 0 if result["agreeing"] == result["points"] else InvariantFailure.exit_code

    if args.command == "reproduce":
        overrides = {k: v for k, v in vars(args).items()
                     if k not in ("command", "log_level", "figure") and v is not None}
        result = experiments.cmd_reproduce(args.figure, overrides)
        print(f"{args.figure}:")
        ok = _print_checks(result.get("checks", {}))
        print(f"✓ Data written to {result['path']}")
        return 0 if ok else InvariantFailure.exit_code

    if args.command == "verify":
        report = experiments.cmd_verify(K=args.K, delta_omega=args.delta_omega, quick=args.quick)
        if args.json:
            print(report.model_dump_json(indent=2))
        else:
            for check in report.checks:
                measured = "" if check.measured is None else f" measured={check.measured:.4g}"
                bound = "" if check.bound is None else f" bound={check.bound:.4g}"
                print(f"  {'✓' if check.passed else '❌'} {check.name}{measured}{bound} {check.detail}")
        print("\n" + ("✓ All checks passed" if report.passed else "❌ Some checks failed"))
        return 0 if report.passed else InvariantFailure.exit_code

    raise AssertionError(f"unhandled command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except ValidationError as e:
        print(f"❌ Invalid configuration:\n{e}", file=sys.stderr)
        return 1
    except AdderError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, json.JSONDecodeError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
