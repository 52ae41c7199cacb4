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
from core.evaluation import (
    ForwardSimulator,
    paths_frame,
    summarize_paths,
    wealth_quantiles,
)
from utils.csv_io import data_digest, write_frame
from utils.handle_command import handle_command
from utils.presenters import format_summary_stats


@handle_command("simulate")
def run(args: argparse.Namespace, logger: logging.Logger) -> None:
    """Out-of-sample paths of one solved strategy."""
    cfg = load_config(args)
    data = read_historical(cfg)
    fingerprint = cfg.solve_fingerprint(data_digest(data))
    store = open_checkpoints(cfg, logger)
    kind = args.kind
    artifacts = store.load_artifacts(kind, fingerprint, cfg.horizon_periods)
    simulator = ForwardSimulator(cfg.bundle(), logger)
    paths = simulator.forward_simulate(artifacts, cfg.eval_paths, cfg.seed, data)
    out = output_dir(cfg, args)
    write_frame(paths_frame(paths), os.path.join(out, f"paths_{kind.str_repr}.csv"))
    write_frame(
        wealth_quantiles(paths),
        os.path.join(out, f"wealth_quantiles_{kind.str_repr}.csv"),
    )
    logger.info(format_summary_stats(kind, summarize_paths(paths)))
    logger.info(f"Wrote path records and wealth quantiles to {out}")


def setup(subparsers, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "simulate",
        parents=parents,
        help="Simulate a solved strategy on out-of-sample paths",
    )
    add_kind_argument(parser, required=True)
    parser.set_defaults(handler=run)
