import argparse
import logging
import os

from numpy.typing import NDArray

from config.run_config import RunConfig, load_run_config
from config.settings import RUN_CONFIG, debug
from core.checkpoints import CheckpointStore, open_store
from models.strategy import StrategyKind
from utils.csv_io import read_matrix

DATA_PREFIX = "z"


def common_parser() -> argparse.ArgumentParser:
    """Flags shared by every command."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--config",
        default=None,
        help=f"KEY=VALUE run file (default: {RUN_CONFIG} if present, else defaults)",
    )
    parser.add_argument("--seed", type=int, default=None, help="Master seed")
    parser.add_argument(
        "--workers", type=int, default=None, help="Worker processes for solves"
    )
    parser.add_argument(
        "--out", default=None, help="Output path (file or directory per command)"
    )
    return parser


def add_kind_argument(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument(
        "--kind",
        required=required,
        type=StrategyKind.from_str_repr,
        metavar="{" + ",".join(k.str_repr for k in StrategyKind) + "}",
        help="Strategy to work on",
    )


def load_config(args: argparse.Namespace) -> RunConfig:
    path = args.config
    if path is None and os.path.isfile(RUN_CONFIG):
        path = RUN_CONFIG
    cfg = load_run_config(path)
    return cfg.with_overrides(seed=args.seed, workers=args.workers)


def read_historical(cfg: RunConfig) -> NDArray:
    return read_matrix(cfg.data_path, DATA_PREFIX, cfg.n)


def open_checkpoints(cfg: RunConfig, logger: logging.Logger) -> CheckpointStore:
    return open_store(cfg.checkpoint_dir, cfg.box(), logger, echo=debug)


def output_dir(cfg: RunConfig, args: argparse.Namespace) -> str:
    path = args.out or cfg.output_dir
    os.makedirs(path, exist_ok=True)
    return path
