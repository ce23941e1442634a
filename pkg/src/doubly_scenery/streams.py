"""Reproducible random streams.

Every stream is a Philox generator seeded from ``SeedSequence(root_seed,
spawn_key=keys)``.  String keys are folded to integers with CRC32 so the
derivation is stable across interpreter runs (``hash()`` is salted).

A stream for replica block ``b`` of experiment ``e`` in module ``m`` is::

    make_stream(root_seed, e, m, b)

which is all another implementation needs to reproduce our draws.
"""
from __future__ import annotations

import zlib

import numpy as np

__all__ = ["make_stream", "stream_key"]


def stream_key(*keys) -> tuple[int, ...]:
    out = []
    for k in keys:
        if isinstance(k, str):
            out.append(zlib.crc32(k.encode("utf-8")))
        else:
            k = int(k)
            if k < 0:
                raise ValueError("stream keys must be nonnegative")
            out.append(k)
    return tuple(out)


def make_stream(root_seed: int, *keys) -> np.random.Generator:
    """Counter-based generator keyed by ``(root_seed, *keys)``."""
    seq = np.random.SeedSequence(int(root_seed), spawn_key=stream_key(*keys))
    return np.random.Generator(np.random.Philox(seq))
