"""
Main Entry Point
Runs experiments, prints basis tables or checks the numerical invariants.

Usage:
  python main.py regress --experiment legendre-recovery --n-points 4096
  python main.py pde --experiment pde-allencahn --sampling equispaced
  python main.py basis-info --out outputs/basis.csv
  python main.py check

Every experiment field has a flag (underscores become dashes); flags override
the `experiment` section of --config.

Exit codes: 0 success, 1 configuration error, 2 data error,
3 training diverged in every trial, 4 invariant check failed.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Union, get_args, get_origin
import argparse
import logging
import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from src.errors import PannError
from src.harness.config import ExperimentConfig
from src.ui import CLI


def _flag_kwargs(annotation) -> Dict[str, Any]:
    """argparse keyword arguments for one ExperimentConfig field type."""
    if get_origin(annotation) is Union:
        inner = [a for a in get_args(annotation) if a is not type(None)]
        annotation = inner[0]
    if annotation is bool:
        return {"action": argparse.BooleanOptionalAction}
    if get_origin(annotation) in (list, List):
        (item,) = get_args(annotation)
        return {"nargs": "*", "type": item, "metavar": item.__name__.upper()}
    if isinstance(annotation, type) and issubclass(annotation, Enum):
        return {"choices": [member.value for member in annotation]}
    return {"type": annotation}


def add_experiment_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("experiment")
    for name, info in ExperimentConfig.model_fields.items():
        default = info.get_default(call_default_factory=True)
        group.add_argument(
            f"--{name.replace('_', '-')}",
            dest=name,
            default=None,
            help=f"(default: {default.value if isinstance(default, Enum) else default})",
            **_flag_kwargs(info.annotation),
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Polynomial-augmented neural networks: regression and PDE experiments"
    )
    parser.add_argument(
        "--config",
        default=None,
        help="Path to configuration file (default: $PANN_CONFIG or config.yaml)"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    regress = commands.add_parser("regress", help="Regression experiments")
    add_experiment_flags(regress)
    pde = commands.add_parser("pde", help="Physics-informed PDE experiments")
    add_experiment_flags(pde)

    basis = commands.add_parser("basis-info", help="Print basis-size tables")
    basis.add_argument("--out", default=None, help="Write the tables as CSV")

    commands.add_parser("check", help="Run the numerical invariant suite")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        cli = CLI(config_path=args.config)
        if args.command == "check":
            return cli.run_check()
        if args.command == "basis-info":
            return cli.run_basis_info(args.out)

        overrides = {
            name: getattr(args, name)
            for name in ExperimentConfig.model_fields
            if getattr(args, name, None) is not None
        }
        cfg = cli.experiment_config(args.command, overrides)
        return cli.run_experiment(cfg)
    except PannError as e:
        logging.getLogger("main").error(str(e))
        print(f"\nError: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
