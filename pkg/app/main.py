"""
Main Application Entry Point
Builds the command line interface and dispatches to the module commands
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from app.core.config import LOG_LEVEL

# Import module command registrations
from app.modules.synthdata import register_synthdata_commands
from app.modules.hard_region import register_hard_region_commands
from app.modules.model import register_model_commands
from app.modules.trainer import register_trainer_commands
from app.modules.evaluation import register_evaluation_commands

logger = logging.getLogger(__name__)


def create_cli() -> argparse.ArgumentParser:
    """CLI factory"""
    # Global flags shared by every subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base random seed")
    common.add_argument("--config", default=None, help="key=value experiment config file")
    common.add_argument("--out", default=None, help="run directory for all outputs")

    parser = argparse.ArgumentParser(
        prog="microsegnet",
        description="Annotation-guided, deep-supervised segmentation pipeline",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    # Register all module commands
    register_synthdata_commands(subparsers, common)
    register_hard_region_commands(subparsers, common)
    register_trainer_commands(subparsers, common)
    register_evaluation_commands(subparsers, common)
    register_model_commands(subparsers, common)
    return parser


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = create_cli().parse_args(argv)
    logger.info(f"[*] Running {args.command}")
    return args.handler(args)


if __name__ == '__main__':
    sys.exit(main())
