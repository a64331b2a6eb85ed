"""Reproducible random streams keyed by (master seed, stream index).

Every stochastic routine in the package draws from a numpy Generator that is
a pure function of a 64-bit master seed plus an integer key path.  Streams
with distinct key paths are statistically independent, so replications can be
executed in any order or degree of parallelism without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """Address of one independent random stream.

    The stream's output is a pure function of ``(master_seed, salt,
    stream_index)``; the optional salt namespaces groups of streams (e.g.
    sweep points) so their replication indices never collide.
    """

    master_seed: int
    stream_index: int
    salt: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.master_seed, spawn_key=(*self.salt, self.stream_index)
        )
        return np.random.Generator(np.random.PCG64(seq))


def stream(master_seed: int, stream_index: int, salt: tuple[int, ...] = ()) -> np.random.Generator:
    """Generator for stream ``stream_index`` under ``master_seed`` and ``salt``."""
    return RngStream(master_seed, stream_index, salt).generator()
