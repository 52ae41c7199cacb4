import zlib

import numpy as np

STREAMS = ("data", "design", "sgda", "eval", "qmc", "fit")


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """
    Returns an independent generator for a named stage of a run.

    The same (seed, name, keys) always yields the same stream, regardless of the
    order in which streams are requested or the process that requests them.
    """
    if name not in STREAMS:
        raise ValueError(f"Unknown random stream: {name}")
    spawn_key = (zlib.crc32(name.encode("utf-8")), *(int(k) for k in keys))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=spawn_key))


def substream_seed(seed: int, name: str, *keys: int) -> int:
    """Derives a plain integer seed, for APIs that do not accept a Generator."""
    return int(substream(seed, name, *keys).integers(0, 2**31 - 1))
