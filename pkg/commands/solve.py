import argparse
import logging
import os

from commands._shared import (
    add_kind_argument,
    load_config,
    open_checkpoints,
    output_dir,
    read_historical,
)
from config.settings import debug
from core.bellman_engine import BellmanEngine
from models.strategy import StrategyKind
from utils.csv_io import data_digest, write_frame
from utils.handle_command import handle_command
from utils.presenters import layer_summary_frame, trace_frame


@handle_command("solve")
def run(args: argparse.Namespace, logger: logging.Logger) -> None:
    """Backward recursion for one strategy, or all three without --kind."""
    cfg = load_config(args)
    data = read_historical(cfg)
    fingerprint = cfg.solve_fingerprint(data_digest(data))
    store = open_checkpoints(cfg, logger)
    tracing = args.trace or debug
    bundle = cfg.bundle().with_trace() if tracing else cfg.bundle()
    engine = BellmanEngine(bundle, logger, store=store)
    kinds = [args.kind] if args.kind else list(StrategyKind)
    out = output_dir(cfg, args)
    for kind in kinds:
        artifacts = engine.backward_solve(kind, data, fingerprint)
        path = write_frame(
            layer_summary_frame(artifacts),
            os.path.join(out, f"solve_{kind.str_repr}.csv"),
        )
        logger.info(f"{kind.str_repr} solved (checkpoint {fingerprint}); see {path}")
        if tracing and kind.is_robust:
            trace_path = write_frame(
                trace_frame(artifacts),
                os.path.join(out, f"trace_{kind.str_repr}.csv"),
            )
            logger.debug(f"{kind.str_repr} SGDA trace written to {trace_path}")


def setup(subparsers, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "solve",
        parents=parents,
        help="Fit value and policy surrogates by backward recursion",
    )
    add_kind_argument(parser, required=False)
    parser.add_argument(
        "--trace",
        action="store_true",
        help="Write the SGDA iteration trace of robust kinds (implied by DEBUG)",
    )
    parser.set_defaults(handler=run)
