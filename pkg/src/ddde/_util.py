"""Small shared helpers."""

import os

import numpy as np

# Named consumers of the top-level seed. Every piece of randomness in a run
# draws from its own substream, so adding a consumer never perturbs the
# streams of existing ones.
STREAM_DATA, STREAM_INIT, STREAM_DROPOUT, STREAM_UNIFORM, STREAM_GENERATOR, STREAM_FOLDS = range(6)


def consumer_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one named consumer of a top-level seed."""
    child = np.random.SeedSequence(seed).spawn(stream + 1)[stream]
    return np.random.default_rng(child)


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial output."""
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
