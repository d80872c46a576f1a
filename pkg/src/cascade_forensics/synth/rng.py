"""The one pseudorandom generator used for every seeded draw in the package.

Philox-4x64 (a 64-bit counter-based generator, Salmon et al. 2011) keyed
through numpy's ``SeedSequence``.  Its output stream is fixed by the
algorithm and the integer seed, independent of platform.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "philox4x64-10"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for ``seed``; extra integers select independent sub-streams."""
    if int(seed) < 0:
        raise ValueError("seed must be a non-negative integer")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))
