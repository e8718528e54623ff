"""Seedable, splittable random streams for the map engine.

Every stream is numpy's PCG64 bit generator fed from a SeedSequence; child
streams come from SeedSequence.spawn, so realization r of a run seeded with
s draws the same numbers on every platform and in any worker process.
"""
from typing import List, Optional

import numpy as np

from config import DEFAULT_SEED
from errors import DomainError

_prng: Optional[np.random.Generator] = None


def seed(value: int = DEFAULT_SEED) -> np.random.Generator:
    """Reset the process-wide generator."""
    global _prng
    _prng = make_stream(value)
    return _prng


def prng() -> np.random.Generator:
    """Process-wide generator, seeded with the configured default on first use."""
    return _prng if _prng is not None else seed()


def make_stream(value: int, spawn_key: tuple = ()) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(value, spawn_key=spawn_key)))


def realization_streams(value: int, count: int) -> List[np.random.Generator]:
    """Independent child streams, one per realization."""
    children = np.random.SeedSequence(value).spawn(count)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def realization_stream(value: int, index: int) -> np.random.Generator:
    """Stream `index` of realization_streams(value, n), rebuilt without spawning the others."""
    return make_stream(value, spawn_key=(index,))


def random_phases(rng: np.random.Generator, count: int) -> np.ndarray:
    """Phases uniform on [0, 2 pi)."""
    return rng.uniform(0.0, 2.0 * np.pi, size=count)


def random_register_numbers(rng: np.random.Generator, count: int, l: int) -> List[int]:
    """`count` distinct l-bit numbers in increasing order."""
    if l < 1 or count < 1:
        raise DomainError(f"need l >= 1 and count >= 1, got l={l}, count={count}")
    if l <= 20:
        if count > 1 << l:
            raise DomainError(f"cannot draw {count} distinct numbers of {l} bits")
        return sorted(int(x) for x in rng.choice(1 << l, size=count, replace=False))
    numbers = set()
    while len(numbers) < count:
        numbers.add(int.from_bytes(rng.bytes((l + 7) // 8), "little") & ((1 << l) - 1))
    return sorted(numbers)
