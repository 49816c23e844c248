"""
Module: main
Description: Command-line entry point.

Usage:
    python -m app.cli.main <command> [--config FILE] [--seed N] [--out DIR] [--threads N] [--log-level LEVEL]

Commands: capture, train, attack, mine, locate, select, protect, evaluate, study-naive, overhead, pipeline.
Exit status: 0 on success, 1 on an expected failure of the lab (missing artifact, invalid input, ...), 2 otherwise.
"""

import argparse
import logging
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from app.cli.config import PipelineConfig
from app.cli.pipeline import COMMANDS, run
from app.errors import LabError
from app.settings import load_settings
from app.utils import dict2str, init_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="side-channel-lab",
        description="Adversarial noise insertion against profiled side-channel attacks on a simulated device.",
    )
    parser.add_argument("command", choices=COMMANDS, help="Stage to run, or `pipeline` for all stages in order.")
    parser.add_argument("--config", help="Flat KEY=VALUE run configuration (APP_-prefixed keys, like `.env`).")
    parser.add_argument("--seed", type=int, help="Master seed (overrides APP_MASTER_SEED).")
    parser.add_argument("--out", help="Output directory (overrides APP_OUTPUT_DIR).")
    parser.add_argument("--threads", type=int, help="Worker threads of the parallel stages (overrides APP_THREADS).")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.config is not None and not Path(args.config).is_file():
        init_logging()
        logger.error(f"Configuration file {args.config} not found")
        return 1
    try:
        settings = load_settings(
            args.config, master_seed=args.seed, output_dir=args.out, threads=args.threads, log_level=args.log_level
        )
        init_logging(settings.log_level)
        config = PipelineConfig.from_settings(settings)
    except ValidationError as e:
        init_logging()
        logger.error(f"Invalid configuration: {e}")
        return 1
    logger.debug(f"Configuration:\n{dict2str(config.model_dump(mode='json'))}")

    try:
        workspace = run(args.command, config)
    except LabError as e:
        logger.error(f"`{args.command}` failed: {e}")
        return 1
    except Exception:
        logger.error(f"An unexpected error occurred while running `{args.command}`.", exc_info=True)
        return 2
    logger.info(f"`{args.command}` complete, manifest at {workspace.root / 'manifest.json'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
