"""Named deterministic random streams.

Every noise consumer (each sensor channel, each fault process) owns its own
substream derived from the scenario seed and a stable stream name, so adding
or removing one consumer never perturbs the draws seen by any other.

Stream derivation is pinned so runs are reproducible across platforms and so
expected values can be re-derived outside this package:

    key    = first 8 bytes of SHA-256(stream name, UTF-8), big-endian uint64
    stream = numpy PCG64 seeded with SeedSequence(entropy=(seed, key))
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(name: str) -> int:
    """Stable 64-bit key for a stream name."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for (seed, name)."""
    ss = np.random.SeedSequence(entropy=(int(seed) & 0xFFFFFFFFFFFFFFFF, stream_key(name)))
    return np.random.Generator(np.random.PCG64(ss))


class StreamBank:
    """Lazily-created named substreams of one scenario seed.

    Generators are stateful: each stream advances independently as it is
    consumed, and identical (seed, request sequence per name) yields
    identical draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def get(self, name: str) -> np.random.Generator:
        gen = self._streams.get(name)
        if gen is None:
            gen = named_stream(self.seed, name)
            self._streams[name] = gen
        return gen

    def normal(self, name: str, sigma: float) -> float:
        """One Gaussian draw from the named stream; 0.0 without consuming a draw if sigma == 0."""
        if sigma == 0.0:
            return 0.0
        return float(self.get(name).normal(0.0, sigma))
