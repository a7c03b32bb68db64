from __future__ import annotations
import zlib

import numpy as np

def av(*args):
    return sum(args)/len(args)

def _key(name: str | int) -> int:
    if isinstance(name, int):
        return name
    return zlib.crc32(name.encode("utf-8"))

def derive_seed(root: int, *names: str | int) -> int:
    """
    A 32-bit seed for the named sub-stream of `root`.
    Streams with different names are independent; the same names always give the same seed.
    """
    sequence = np.random.SeedSequence(entropy=root, spawn_key=tuple(_key(n) for n in names))
    return int(sequence.generate_state(1)[0])

def derive_rng(root: int, *names: str | int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *names))
