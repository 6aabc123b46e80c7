import numpy as np


def child_rng(seed: int, *indices: int) -> np.random.Generator:
    """Independent generator for one task (graph/repeat, epoch/batch...), derived from the root seed.

    Streams for distinct index tuples never collide, so tasks can run in any
    order or in parallel and still draw the same numbers.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, *indices]))
