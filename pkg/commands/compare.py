import argparse
import logging
import os

import pandas as pd

from commands._shared import load_config, open_checkpoints, output_dir, read_historical
from core.evaluation import (
    ForwardSimulator,
    common_noise,
    comparison_table,
    paths_frame,
    summarize_paths,
    wealth_quantiles,
)
from models.strategy import StrategyKind
from utils.csv_io import data_digest, write_frame
from utils.handle_command import handle_command
from utils.presenters import format_comparison


@handle_command("compare")
def run(args: argparse.Namespace, logger: logging.Logger) -> None:
    """Simulates all three strategies on the same returns and tabulates them."""
    cfg = load_config(args)
    data = read_historical(cfg)
    fingerprint = cfg.solve_fingerprint(data_digest(data))
    store = open_checkpoints(cfg, logger)
    bundle = cfg.bundle()
    simulator = ForwardSimulator(bundle, logger)

    artifacts = {
        kind: store.load_artifacts(kind, fingerprint, cfg.horizon_periods)
        for kind in StrategyKind
    }
    for solved in artifacts.values():
        solved.require_complete()

    noise = common_noise(bundle, cfg.eval_paths, cfg.seed)
    out = output_dir(cfg, args)
    stats, quantiles = {}, []
    for kind, solved in artifacts.items():
        paths = simulator.forward_simulate(
            solved, cfg.eval_paths, cfg.seed, data, noise=noise
        )
        stats[kind] = summarize_paths(paths)
        frame = wealth_quantiles(paths)
        frame.insert(0, "strategy", kind.table_label)
        quantiles.append(frame)
        write_frame(paths_frame(paths), os.path.join(out, f"paths_{kind.str_repr}.csv"))

    table = comparison_table(stats)
    write_frame(table, os.path.join(out, "comparison.csv"), index=True)
    write_frame(
        pd.concat(quantiles, ignore_index=True),
        os.path.join(out, "wealth_quantiles.csv"),
    )
    logger.info("\n" + format_comparison(table))
    logger.info(f"Wrote comparison table and wealth quantiles to {out}")


def setup(subparsers, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "compare",
        parents=parents,
        help="Compare the three solved strategies on common out-of-sample paths",
    )
    parser.set_defaults(handler=run)
