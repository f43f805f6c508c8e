import time
from contextlib import contextmanager

import numpy as np

from src.exceptions import ConfigError

# Substream keys of the counter-based generator; every random draw of a run is keyed by (seed, stream, index)
STREAM_INIT = 0
STREAM_BATCH = 1
STREAM_SCENE = 2
STREAM_SPLIT = 3


def make_generator(seed, *keys):
    """
    Independent Philox generator for the substream (seed, keys...).

    The same (seed, keys) always yields the same sequence, regardless of what other streams were drawn from.

    :param int seed: run seed (>= 0)
    :param int keys: substream keys, e.g. ``STREAM_SCENE, sequence_index``
    :return: numpy Generator
    """
    if seed < 0:
        raise ConfigError('seed must be non-negative, got ' + str(seed))
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(key) for key in keys))
    return np.random.Generator(np.random.Philox(sequence))


@contextmanager
def timed(message):
    """
    Prints ``message...`` on entry and ``message completed in x s`` on exit.
    """
    print(message + '...')
    start = time.time()
    yield
    print(message + ' completed in ' + str(round(time.time() - start, 2)) + ' s')
