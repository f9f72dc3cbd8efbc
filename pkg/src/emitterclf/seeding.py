"""Named deterministic RNG derivation.

Every source of randomness in the package flows from a root integer seed
through `derive_rng(root, *parts)`, where the parts name the consumer
(component string, class index, epoch number, ...). Derivation goes through
`numpy.random.SeedSequence`, so child streams are independent and the same
(root, parts) always yields the same stream regardless of execution order,
process, or platform.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["derive_rng", "derive_int"]


def _as_word(part: int | str | np.integer) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"seed derivation parts must be int or str, got {type(part)!r}")


def derive_rng(root: int, *parts: int | str) -> np.random.Generator:
    """Return a Generator for the stream named by (root, *parts)."""
    entropy = [_as_word(root)] + [_as_word(p) for p in parts]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_int(root: int, *parts: int | str) -> int:
    """Return a derived 32-bit seed integer (for APIs that take plain seeds)."""
    entropy = [_as_word(root)] + [_as_word(p) for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
