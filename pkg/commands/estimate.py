import argparse
import logging
import os

import pandas as pd

from commands._shared import load_config, output_dir, read_historical
from core.copula_estimation import estimate_copula, radius, summarize
from utils.csv_io import write_frame, write_matrix
from utils.handle_command import handle_command


def summary_frame(moments, pairs, r: float) -> pd.DataFrame:
    n, m = moments.shape
    rows = [
        {"statistic": f"moment_{i + 1}_{k + 1}", "value": float(moments[i, k])}
        for i in range(n)
        for k in range(m)
    ]
    pair_names = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rows += [
        {"statistic": f"cov_{i + 1}_{j + 1}", "value": float(v)}
        for (i, j), v in zip(pair_names, pairs)
    ]
    rows.append({"statistic": "radius", "value": r})
    return pd.DataFrame(rows)


@handle_command("estimate")
def run(args: argparse.Namespace, logger: logging.Logger) -> None:
    """Snapshot of the empirical copula of the historical sample."""
    cfg = load_config(args)
    data = read_historical(cfg)
    sample = estimate_copula(data, cfg.true_model())
    summary = summarize(sample, cfg.moment_count)
    r = radius(cfg.alpha, sample.t0, sample.t, cfg.radius_config())
    out = output_dir(cfg, args)
    points_path = write_matrix(
        sample.points, os.path.join(out, "pseudo_observations.csv"), "u"
    )
    summary_path = write_frame(
        summary_frame(summary.marginal_moments, summary.pair_covariances, r),
        os.path.join(out, "copula_summary.csv"),
    )
    logger.info(f"Radius at t=0 with {sample.count} points: {r:.6g}")
    logger.info(f"Wrote {points_path} and {summary_path}")


def setup(subparsers, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "estimate",
        parents=parents,
        help="Write the empirical copula snapshot of the historical sample",
    )
    parser.set_defaults(handler=run)
