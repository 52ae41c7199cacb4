import argparse
import logging

from commands._shared import DATA_PREFIX, load_config
from utils.csv_io import write_matrix
from utils.handle_command import handle_command
from utils.rng import substream


@handle_command("generate")
def run(args: argparse.Namespace, logger: logging.Logger) -> None:
    """Draws the t0 historical log-returns from the true model."""
    cfg = load_config(args)
    model = cfg.true_model()
    data = model.sample(substream(cfg.seed, "data"), cfg.t0_samples)
    path = write_matrix(data, args.out or cfg.data_path, DATA_PREFIX)
    logger.info(f"Wrote {data.shape[0]} historical returns to {path}")


def setup(subparsers, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "generate",
        parents=parents,
        help="Synthesize the historical sample (--out overrides DATA_PATH)",
    )
    parser.set_defaults(handler=run)
