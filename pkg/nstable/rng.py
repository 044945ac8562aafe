#!/usr/bin/env python3
"""
Seed derivation for reproducible Monte Carlo.

A master seed is split three levels deep (experiment, replica, role) with
numpy's SeedSequence spawn keys; every stream is a counter-based Philox
generator, so streams never overlap and results do not depend on the order
in which replica blocks are executed.
"""

import zlib
from typing import Union

import numpy as np

Key = Union[int, str]

# replicas are simulated in blocks; block b draws from replica stream b
REPLICA_BLOCK = 2048


def _key(value: Key) -> int:
    if isinstance(value, str):
        return zlib.crc32(value.encode("utf-8"))
    if value < 0:
        raise ValueError(f"stream keys must be non-negative, got {value}")
    return int(value)


def stream(seed: int, experiment: Key = 0, replica: Key = 0, role: Key = 0) -> np.random.Generator:
    """Return the generator for one (experiment, replica, role) stream of a master seed."""
    sequence = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(_key(experiment), _key(replica), _key(role)),
    )
    return np.random.Generator(np.random.Philox(sequence))


def as_generator(seed: Union[int, np.random.Generator], role: Key = 0) -> np.random.Generator:
    """Accept either a master seed or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(seed, role=role)


def replica_blocks(replicas: int, block: int = REPLICA_BLOCK):
    """Yield (block_index, start, stop) covering range(replicas) in fixed-size blocks."""
    for index, start in enumerate(range(0, replicas, block)):
        yield index, start, min(start + block, replicas)
