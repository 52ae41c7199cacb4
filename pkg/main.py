import argparse
import importlib
import logging
import os
import sys

import commands
from commands._shared import common_parser
from config.constants import LOGGER_NAME, app_name, version
from config.logger import setup_logger
from config.settings import LOG_DIR, debug
from utils.handle_command import CommandParser


logger = logging.getLogger(LOGGER_NAME)


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(
        prog=app_name,
        description="Adaptive robust portfolio control under copula uncertainty",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {version}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    parents = [common_parser()]
    for module in sorted(os.listdir(os.path.dirname(commands.__file__))):
        if module.endswith(".py") and not module.startswith("_"):
            importlib.import_module(f"commands.{module[:-3]}").setup(
                subparsers, parents
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if debug:
        setup_logger(log_level=logging.DEBUG, log_dir=LOG_DIR)
    else:
        setup_logger(log_level=logging.INFO, log_dir=LOG_DIR)
    return args.handler(args, logger)


if __name__ == "__main__":
    sys.exit(main())
