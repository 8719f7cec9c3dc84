"""Named random substreams derived from one seed."""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int | None, name: str) -> np.random.Generator:
    """Independent generator for ``name`` ("init", "sampling", "split", ...) under ``seed``.

    The same ``(seed, name)`` always yields the same stream, and distinct names
    never share state, so components can be reproduced in isolation.
    """
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))
